#pragma once

#include "musicdemo/music/types.hpp"

#include <optional>
#include <vector>

namespace musicdemo::music {

/// Triad pitch classes of `chord`; all zero for N.C.
Chroma chord_to_chroma(const ChordSymbol& chord);

/// Position on the circle of fifths, C=0, G=1, D=2, ... F=11.
/// Throws std::out_of_range for a pitch class outside [0, 11].
int circle_of_fifths_index(int pitch_class);

/// Shortest walk between the two roots around the circle of fifths (0-6).
/// Throws TheoryError for N.C.
int harmonic_distance(const ChordSymbol& a, const ChordSymbol& b);

/// Major-scale degree (0-6) of a diatonic triad in `key`, if any. Degree 6
/// (vii diminished) is represented by the minor triad on that root.
std::optional<int> diatonic_degree(const ChordSymbol& chord, int key);

/// I, iii, vi -> tonic; ii, IV -> subdominant; V, vii -> dominant.
/// Throws TheoryError for N.C. or a chord outside the key.
HarmonicFunction chord_function(const ChordSymbol& chord, int key);

std::optional<HarmonicFunction> try_chord_function(const ChordSymbol& chord, int key);

/// The diatonic triad on `degree` (0-6) of the major scale on `key`.
ChordSymbol diatonic_triad(int degree, int key);

struct ChordAnnotation {
  std::optional<HarmonicFunction> function;
  std::optional<int> circle_index;
};

/// Per-slot function and circle-of-fifths position for the visual views.
/// Non-diatonic chords keep their circle index; N.C. slots carry neither.
std::vector<ChordAnnotation> annotate_progression(const ChordSequence& chords, int key);

}  // namespace musicdemo::music
