#include "musicdemo/music/corpus.hpp"

#include "musicdemo/music/theory.hpp"
#include "musicdemo/music/wire.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <fstream>
#include <random>
#include <string>

namespace musicdemo::music {

namespace {

template <typename T, typename Parse>
std::vector<T> read_lines(const std::filesystem::path& path, Parse parse) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus " + path.string());
  std::vector<T> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse(parse_json(line)));
    } catch (const SchemaError& e) {
      throw SchemaError("line " + std::to_string(number) + ": " + e.field(), e.what());
    }
  }
  return out;
}

template <typename T>
void write_lines(const std::filesystem::path& path, const std::vector<T>& values) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write corpus " + path.string());
  for (const auto& value : values) out << serialize(value) << '\n';
}

bool coin(std::mt19937_64& rng, double p) { return std::bernoulli_distribution(p)(rng); }

void hit(DrumPattern& pattern, DrumInstrument instrument, std::initializer_list<int> sixteenths) {
  for (int s : sixteenths) pattern.set(instrument, s * kDrumStepsPerSixteenth, true);
}

DrumPattern drum_from_template(int style, std::mt19937_64& rng) {
  using enum DrumInstrument;
  DrumPattern p;
  const DrumInstrument hat = coin(rng, 0.2) ? ride : closed_hihat;
  switch (style) {
    case 0:  // rock
      hit(p, kick, {0, 8});
      if (coin(rng, 0.5)) hit(p, kick, {10});
      hit(p, snare, {4, 12});
      if (coin(rng, 0.5)) {
        for (int s = 0; s < 16; s += 2) hit(p, hat, {s});
      } else {
        for (int s = 0; s < 16; ++s) hit(p, hat, {s});
      }
      break;
    case 1:  // funk
      hit(p, kick, {0, 3, 10});
      if (coin(rng, 0.4)) hit(p, kick, {7});
      hit(p, snare, {4, 12});
      for (int ghost : {7, 9, 15}) {
        if (coin(rng, 0.35)) hit(p, snare, {ghost});
      }
      for (int s = 0; s < 16; ++s) hit(p, hat, {s});
      if (coin(rng, 0.5)) {
        p.set(hat, 14 * kDrumStepsPerSixteenth, false);
        hit(p, open_hihat, {14});
      }
      break;
    case 2:  // four on the floor
      hit(p, kick, {0, 4, 8, 12});
      hit(p, snare, {4, 12});
      hit(p, open_hihat, {2, 6, 10, 14});
      if (coin(rng, 0.5)) hit(p, hat, {0, 4, 8, 12});
      break;
    default:  // half time
      hit(p, kick, {0, 10});
      if (coin(rng, 0.5)) hit(p, kick, {3});
      hit(p, snare, {8});
      for (int s = 0; s < 16; s += 2) hit(p, ride, {s});
      break;
  }
  if (coin(rng, 0.3)) hit(p, crash, {0});
  if (coin(rng, 0.2)) {
    // tom fill over the last beat
    constexpr std::array toms = {high_tom, mid_tom, low_tom};
    for (int s = 12; s < 16; ++s) {
      p.set(hat, s * kDrumStepsPerSixteenth, false);
      hit(p, toms[static_cast<std::size_t>(std::min(2, (s - 12) * 3 / 4))], {s});
    }
  }
  return p;
}

constexpr std::array<std::array<int, kHalfBars>, 8> kProgressions = {{
    {0, 0, 4, 4, 5, 5, 3, 3},  // I V vi IV
    {0, 0, 5, 5, 3, 3, 4, 4},  // I vi IV V
    {1, 1, 4, 4, 0, 0, 0, 0},  // ii V I
    {5, 5, 3, 3, 0, 0, 4, 4},  // vi IV I V
    {0, 0, 3, 3, 4, 4, 0, 0},  // I IV V I
    {0, 0, 2, 2, 3, 3, 4, 4},  // I iii IV V
    {0, 4, 5, 2, 3, 0, 3, 4},  // canon
    {0, 3, 1, 4, 0, 3, 1, 4},  // I IV ii V
}};

// Onset offsets within a half-bar (8 sixteenths).
constexpr std::array<std::array<int, 4>, 4> kRhythms = {{
    {0, 4, -1, -1},
    {0, 2, 4, 6},
    {0, 4, 6, -1},
    {0, 2, 4, -1},
}};

std::vector<int> chord_tone_pitches(const ChordSymbol& chord, int lo, int hi) {
  const Chroma chroma = chord_to_chroma(chord);
  std::vector<int> out;
  for (int midi = lo; midi <= hi; ++midi) {
    if (chroma(midi % 12)) out.push_back(midi);
  }
  return out;
}

}  // namespace

std::vector<DrumPattern> read_drum_corpus(const std::filesystem::path& path) {
  return read_lines<DrumPattern>(path, drum_from_json);
}

std::vector<LeadSheet> read_leadsheet_corpus(const std::filesystem::path& path) {
  return read_lines<LeadSheet>(path, leadsheet_from_json);
}

void write_corpus(const std::filesystem::path& path, const std::vector<DrumPattern>& patterns) {
  write_lines(path, patterns);
}

void write_corpus(const std::filesystem::path& path, const std::vector<LeadSheet>& sheets) {
  write_lines(path, sheets);
}

std::vector<DrumPattern> generate_drum_corpus(int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<DrumPattern> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(drum_from_template(i % 4, rng));
  return out;
}

std::vector<LeadSheet> generate_leadsheet_corpus(int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<LeadSheet> out;
  out.reserve(static_cast<std::size_t>(count));
  auto pick = [&rng](int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); };

  for (int n = 0; n < count; ++n) {
    const auto& degrees = kProgressions[static_cast<std::size_t>(n) % kProgressions.size()];
    std::array<ChordSymbol, kHalfBars> chords;
    for (int i = 0; i < kHalfBars; ++i) chords[i] = diatonic_triad(degrees[i], 0);

    const std::array<int, 2> motif = {pick(4), pick(4)};
    std::array<int, kMelodySteps> tokens{};
    int previous = 64 + pick(8);
    for (int half = 0; half < kHalfBars; ++half) {
      const ChordSymbol& chord = chords[half];
      const auto pitches = chord_tone_pitches(chord, 60, 79);
      const int base = half * kStepsPerHalfBar;
      for (int s = 0; s < kStepsPerHalfBar; ++s) tokens[base + s] = kHoldToken;

      // First onset is the root or third nearest the previous note.
      const int third = (chord.root + (chord.quality == ChordQuality::major ? 4 : 3)) % 12;
      const int anchor_pc = coin(rng, 0.6) ? chord.root : third;
      int idx = 0;
      for (int i = 0; i < static_cast<int>(pitches.size()); ++i) {
        if (pitches[i] % 12 != anchor_pc) continue;
        if (pitches[idx] % 12 != anchor_pc ||
            std::abs(pitches[i] - previous) < std::abs(pitches[idx] - previous)) {
          idx = i;
        }
      }

      if (half == kHalfBars - 1) {
        tokens[base] = pitch_to_token(pitches[idx]);
        tokens[base + 6] = kRestToken;
        tokens[base + 7] = kRestToken;
        break;
      }
      int direction = coin(rng, 0.5) ? 1 : -1;
      for (int onset : kRhythms[static_cast<std::size_t>(motif[half % 2])]) {
        if (onset < 0) break;
        tokens[base + onset] = pitch_to_token(pitches[idx]);
        previous = pitches[idx];
        if (idx + direction < 0 || idx + direction >= static_cast<int>(pitches.size())) direction = -direction;
        idx += direction;
      }
    }
    LeadSheet sheet;
    sheet.melody = MelodyLine(tokens);
    sheet.chords = ChordSequence(chords);
    sheet.key = 0;
    out.push_back(sheet);
  }
  return out;
}

}  // namespace musicdemo::music
