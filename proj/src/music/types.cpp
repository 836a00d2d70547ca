#include "musicdemo/music/types.hpp"

#include "musicdemo/music/theory.hpp"

#include <cmath>

namespace musicdemo::music {

DrumPattern::DrumPattern(const DrumGrid& grid) : grid_(grid) {
  if ((grid_.array() > 1).any()) throw SchemaError("grid", "cells must be 0 or 1");
}

void DrumPattern::set(int instrument, int step, bool on) {
  if (instrument < 0 || instrument >= kDrumInstruments || step < 0 || step >= kDrumSteps) {
    throw std::out_of_range("drum cell out of range");
  }
  grid_(instrument, step) = on ? 1 : 0;
}

int DrumPattern::onset_count() const { return grid_.cast<int>().sum(); }

int hamming_distance(const DrumPattern& a, const DrumPattern& b) {
  return (a.grid().array() != b.grid().array()).count();
}

MelodyLine::MelodyLine(const std::array<int, kMelodySteps>& tokens) : tokens_(tokens) {
  for (int i = 0; i < kMelodySteps; ++i) {
    const int token = tokens_[i];
    const std::string field = "tokens[" + std::to_string(i) + "]";
    if (token < 0 || token >= kMelodyVocab) throw SchemaError(field, "token out of vocabulary");
    if (token == kHoldToken && (i == 0 || tokens_[i - 1] == kRestToken)) {
      throw SchemaError(field, "HOLD must continue a sounding note");
    }
  }
}

MelodyLine MelodyLine::repaired(std::array<int, kMelodySteps> tokens) {
  for (int i = 0; i < kMelodySteps; ++i) {
    if (tokens[i] == kHoldToken && (i == 0 || tokens[i - 1] == kRestToken)) tokens[i] = kRestToken;
  }
  return MelodyLine(tokens);
}

bool MelodyLine::all_rest() const {
  for (int token : tokens_) {
    if (token != kRestToken) return false;
  }
  return true;
}

bool MelodyLine::half_bar_rests(int half_bar) const {
  for (int i = half_bar * kStepsPerHalfBar; i < (half_bar + 1) * kStepsPerHalfBar; ++i) {
    if (tokens_[i] != kRestToken) return false;
  }
  return true;
}

int ChordSymbol::class_index() const {
  switch (quality) {
    case ChordQuality::major: return root;
    case ChordQuality::minor: return 12 + root;
    case ChordQuality::none: return kNoChordClass;
  }
  return kNoChordClass;
}

ChordSymbol ChordSymbol::from_class_index(int index) {
  if (index < 0 || index >= kChordVocab) throw std::out_of_range("chord class out of range");
  if (index == kNoChordClass) return no_chord();
  return index < 12 ? major(index) : minor(index - 12);
}

void ChordSymbol::validate() const {
  if (root < 0 || root > 11) throw SchemaError("root", "must be in [0, 11]");
}

std::string chord_name(const ChordSymbol& chord) {
  static constexpr std::array<const char*, 12> kNames = {"C",  "C#", "D",  "D#", "E",  "F",
                                                          "F#", "G",  "G#", "A",  "A#", "B"};
  if (chord.is_no_chord()) return "N.C.";
  return std::string(kNames[chord.root]) + (chord.quality == ChordQuality::minor ? "m" : "");
}

ChordSequence::ChordSequence(const std::array<ChordSymbol, kHalfBars>& chords) : chords_(chords) {
  for (auto& chord : chords_) {
    if (chord.is_no_chord()) {
      chord.root = 0;
    } else {
      chord.validate();
    }
  }
}

ChromaRows ChordSequence::chroma() const {
  ChromaRows rows;
  for (int i = 0; i < kHalfBars; ++i) rows.row(i) = chord_to_chroma(chords_[i]).transpose();
  return rows;
}

std::string_view to_string(HarmonicFunction function) {
  switch (function) {
    case HarmonicFunction::tonic: return "tonic";
    case HarmonicFunction::subdominant: return "subdominant";
    case HarmonicFunction::dominant: return "dominant";
  }
  return "tonic";
}

std::optional<HarmonicFunction> harmonic_function_from_string(std::string_view name) {
  if (name == "tonic") return HarmonicFunction::tonic;
  if (name == "subdominant") return HarmonicFunction::subdominant;
  if (name == "dominant") return HarmonicFunction::dominant;
  return std::nullopt;
}

LatentVector::LatentVector(const LatentValues& values) : values_(values) {
  if (!values_.allFinite()) throw SchemaError("values", "latent entries must be finite");
}

}  // namespace musicdemo::music
