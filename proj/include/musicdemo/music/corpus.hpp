#pragma once

#include "musicdemo/music/types.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace musicdemo::music {

// JSON Lines corpora: one canonical object per line. Errors carry the line
// number in the SchemaError field ("line 12: grid").
std::vector<DrumPattern> read_drum_corpus(const std::filesystem::path& path);
std::vector<LeadSheet> read_leadsheet_corpus(const std::filesystem::path& path);
void write_corpus(const std::filesystem::path& path, const std::vector<DrumPattern>& patterns);
void write_corpus(const std::filesystem::path& path, const std::vector<LeadSheet>& sheets);

/// One-bar patterns from rock, funk, four-on-the-floor and half-time
/// templates with seeded hat, ghost-note, crash and fill variation.
std::vector<DrumPattern> generate_drum_corpus(int count, std::uint64_t seed);

/// Four-bar C-major sheets over common diatonic progressions. Melodies are
/// chord-tone figures on a per-sheet rhythmic motif.
std::vector<LeadSheet> generate_leadsheet_corpus(int count, std::uint64_t seed);

}  // namespace musicdemo::music
