#include "musicdemo/music/theory.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>
#include <string>

namespace musicdemo::music {

namespace {

constexpr std::array<int, 7> kMajorScale = {0, 2, 4, 5, 7, 9, 11};
// vii is listed as minor: the vocabulary has no diminished triads.
constexpr std::array<ChordQuality, 7> kDegreeQuality = {
    ChordQuality::major, ChordQuality::minor, ChordQuality::minor, ChordQuality::major,
    ChordQuality::major, ChordQuality::minor, ChordQuality::minor};
constexpr std::array<HarmonicFunction, 7> kDegreeFunction = {
    HarmonicFunction::tonic,    HarmonicFunction::subdominant, HarmonicFunction::tonic,
    HarmonicFunction::subdominant, HarmonicFunction::dominant, HarmonicFunction::tonic,
    HarmonicFunction::dominant};

int wrap12(int value) { return ((value % 12) + 12) % 12; }

}  // namespace

Chroma chord_to_chroma(const ChordSymbol& chord) {
  Chroma chroma = Chroma::Zero();
  if (chord.is_no_chord()) return chroma;
  chord.validate();
  const int third = chord.quality == ChordQuality::major ? 4 : 3;
  chroma(chord.root) = 1;
  chroma(wrap12(chord.root + third)) = 1;
  chroma(wrap12(chord.root + 7)) = 1;
  return chroma;
}

int circle_of_fifths_index(int pitch_class) {
  if (pitch_class < 0 || pitch_class > 11) {
    throw std::out_of_range("pitch class out of range: " + std::to_string(pitch_class));
  }
  return (pitch_class * 7) % 12;
}

int harmonic_distance(const ChordSymbol& a, const ChordSymbol& b) {
  if (a.is_no_chord() || b.is_no_chord()) throw TheoryError("distance undefined for N.C.");
  const int steps = wrap12(circle_of_fifths_index(a.root) - circle_of_fifths_index(b.root));
  return std::min(steps, 12 - steps);
}

std::optional<int> diatonic_degree(const ChordSymbol& chord, int key) {
  if (chord.is_no_chord()) return std::nullopt;
  const int interval = wrap12(chord.root - key);
  for (int degree = 0; degree < 7; ++degree) {
    if (kMajorScale[degree] == interval) {
      if (kDegreeQuality[degree] == chord.quality) return degree;
      return std::nullopt;
    }
  }
  return std::nullopt;
}

std::optional<HarmonicFunction> try_chord_function(const ChordSymbol& chord, int key) {
  const auto degree = diatonic_degree(chord, key);
  if (!degree) return std::nullopt;
  return kDegreeFunction[*degree];
}

HarmonicFunction chord_function(const ChordSymbol& chord, int key) {
  if (chord.is_no_chord()) throw TheoryError("function undefined for N.C.");
  const auto function = try_chord_function(chord, key);
  if (!function) throw TheoryError("function undefined for non-diatonic chord " + chord_name(chord));
  return *function;
}

ChordSymbol diatonic_triad(int degree, int key) {
  if (degree < 0 || degree > 6) throw std::out_of_range("scale degree out of range");
  return {wrap12(key + kMajorScale[degree]), kDegreeQuality[degree]};
}

std::vector<ChordAnnotation> annotate_progression(const ChordSequence& chords, int key) {
  std::vector<ChordAnnotation> out;
  out.reserve(kHalfBars);
  for (const auto& chord : chords.chords()) {
    if (chord.is_no_chord()) {
      out.push_back({});
      continue;
    }
    out.push_back({try_chord_function(chord, key), circle_of_fifths_index(chord.root)});
  }
  return out;
}

}  // namespace musicdemo::music
