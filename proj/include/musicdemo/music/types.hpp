#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace musicdemo::music {

inline constexpr int kDrumInstruments = 9;
inline constexpr int kDrumSteps = 96;
inline constexpr int kDrumStepsPerSixteenth = kDrumSteps / 16;

inline constexpr int kBars = 4;
inline constexpr int kStepsPerBar = 16;
inline constexpr int kMelodySteps = kBars * kStepsPerBar;
inline constexpr int kHalfBars = 2 * kBars;
inline constexpr int kStepsPerHalfBar = kMelodySteps / kHalfBars;

inline constexpr int kRestToken = 0;
inline constexpr int kHoldToken = 1;
inline constexpr int kLowestPitch = 48;
inline constexpr int kHighestPitch = 96;
inline constexpr int kMelodyVocab = 2 + (kHighestPitch - kLowestPitch + 1);

// 12 major triads, 12 minor triads, N.C.
inline constexpr int kChordVocab = 25;
inline constexpr int kNoChordClass = 24;

inline constexpr int kLatentDim = 32;
inline constexpr double kLatentLimit = 4.0;

enum class DrumInstrument : int {
  kick,
  snare,
  closed_hihat,
  open_hihat,
  low_tom,
  mid_tom,
  high_tom,
  crash,
  ride,
};

/// Thrown when a value or wire document breaks a structural rule. `field`
/// names the offending field (e.g. "grid", "tokens[3]").
class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Thrown for music-theoretic operations that are undefined on their input.
class TheoryError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

using DrumGrid = Eigen::Matrix<std::uint8_t, kDrumInstruments, kDrumSteps, Eigen::RowMajor>;

/// One bar of drums on a 96-step grid. Cells are always 0 or 1.
class DrumPattern {
 public:
  DrumPattern() { grid_.setZero(); }

  /// Throws SchemaError("grid") unless every cell is 0 or 1.
  explicit DrumPattern(const DrumGrid& grid);

  bool at(int instrument, int step) const { return grid_(instrument, step) != 0; }
  bool at(DrumInstrument instrument, int step) const { return at(static_cast<int>(instrument), step); }
  void set(int instrument, int step, bool on);
  void set(DrumInstrument instrument, int step, bool on) { set(static_cast<int>(instrument), step, on); }

  const DrumGrid& grid() const { return grid_; }
  int onset_count() const;
  double density() const { return static_cast<double>(onset_count()) / (kDrumInstruments * kDrumSteps); }

  friend bool operator==(const DrumPattern& a, const DrumPattern& b) { return a.grid_ == b.grid_; }

 private:
  DrumGrid grid_;
};

int hamming_distance(const DrumPattern& a, const DrumPattern& b);

inline constexpr int pitch_to_token(int midi) { return midi - kLowestPitch + 2; }
inline constexpr int token_to_pitch(int token) { return token - 2 + kLowestPitch; }
inline constexpr bool is_pitch_token(int token) { return token >= 2 && token < kMelodyVocab; }

/// 64 sixteenth-note tokens: REST, HOLD, or a pitch onset.
class MelodyLine {
 public:
  /// All REST.
  MelodyLine() { tokens_.fill(kRestToken); }

  /// Throws SchemaError("tokens[i]") on an out-of-vocabulary token or a HOLD
  /// that does not continue a sounding note.
  explicit MelodyLine(const std::array<int, kMelodySteps>& tokens);

  /// Rewrites orphan HOLDs (step 0 or after REST) as REST; rejects only
  /// out-of-vocabulary ids. Used on decoder output.
  static MelodyLine repaired(std::array<int, kMelodySteps> tokens);

  int operator[](int step) const { return tokens_[static_cast<std::size_t>(step)]; }
  const std::array<int, kMelodySteps>& tokens() const { return tokens_; }
  bool all_rest() const;
  bool half_bar_rests(int half_bar) const;

  friend bool operator==(const MelodyLine&, const MelodyLine&) = default;

 private:
  std::array<int, kMelodySteps> tokens_{};
};

enum class ChordQuality { major, minor, none };

struct ChordSymbol {
  int root = 0;
  ChordQuality quality = ChordQuality::none;

  static ChordSymbol no_chord() { return {0, ChordQuality::none}; }
  static ChordSymbol major(int root) { return {root, ChordQuality::major}; }
  static ChordSymbol minor(int root) { return {root, ChordQuality::minor}; }

  bool is_no_chord() const { return quality == ChordQuality::none; }

  /// Index into the 25-label vocabulary: majors 0-11, minors 12-23, N.C. 24.
  int class_index() const;
  static ChordSymbol from_class_index(int index);

  /// Throws SchemaError("root") for a root outside [0, 11].
  void validate() const;

  friend bool operator==(const ChordSymbol& a, const ChordSymbol& b) {
    if (a.is_no_chord() || b.is_no_chord()) return a.quality == b.quality;
    return a.root == b.root && a.quality == b.quality;
  }
};

std::string chord_name(const ChordSymbol& chord);

using Chroma = Eigen::Matrix<std::uint8_t, 12, 1>;
using ChromaRows = Eigen::Matrix<std::uint8_t, kHalfBars, 12, Eigen::RowMajor>;

/// Eight half-bar chords. The chroma view is derived from the labels, so the
/// two can never disagree.
class ChordSequence {
 public:
  ChordSequence() { chords_.fill(ChordSymbol::no_chord()); }
  explicit ChordSequence(const std::array<ChordSymbol, kHalfBars>& chords);

  const ChordSymbol& operator[](int slot) const { return chords_[static_cast<std::size_t>(slot)]; }
  const std::array<ChordSymbol, kHalfBars>& chords() const { return chords_; }
  ChromaRows chroma() const;

  friend bool operator==(const ChordSequence&, const ChordSequence&) = default;

 private:
  std::array<ChordSymbol, kHalfBars> chords_;
};

struct LeadSheet {
  MelodyLine melody;
  ChordSequence chords;
  int key = 0;

  friend bool operator==(const LeadSheet&, const LeadSheet&) = default;
};

enum class HarmonicFunction { tonic, subdominant, dominant };

inline constexpr int kFunctionClasses = 3;

std::string_view to_string(HarmonicFunction function);
std::optional<HarmonicFunction> harmonic_function_from_string(std::string_view name);

using LatentValues = Eigen::Matrix<double, kLatentDim, 1>;

/// 32-dimensional VAE code. Always finite.
class LatentVector {
 public:
  LatentVector() { values_.setZero(); }

  /// Throws SchemaError("values") on non-finite entries.
  explicit LatentVector(const LatentValues& values);

  const LatentValues& values() const { return values_; }
  double operator[](int index) const { return values_(index); }

  friend bool operator==(const LatentVector& a, const LatentVector& b) { return a.values_ == b.values_; }

 private:
  LatentValues values_;
};

}  // namespace musicdemo::music
