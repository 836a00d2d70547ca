#pragma once

// Canonical JSON wire format shared by the server, the corpus files and the
// browser client. Field names and nesting are fixed:
//   drum      {"type":"drum","grid":[[0|1 x96] x9]}
//   melody    {"type":"melody","tokens":[int x64]}
//   chord     {"root":0-11,"quality":"maj"|"min"|"nc"}
//   leadsheet {"type":"leadsheet","melody":{...},"chords":[chord x8],"key":0-11}
//   latent    {"type":"latent","dim":32,"values":[float x32]}

#include "musicdemo/music/types.hpp"

#include <json.hpp>

#include <string>
#include <string_view>

namespace musicdemo::music {

using Json = nlohmann::ordered_json;

Json to_json(const DrumPattern& pattern);
Json to_json(const MelodyLine& melody);
Json to_json(const ChordSymbol& chord);
Json to_json(const ChordSequence& chords);
Json to_json(const LeadSheet& sheet);
Json to_json(const LatentVector& latent);

// All of these throw SchemaError naming the offending field.
DrumPattern drum_from_json(const Json& json);
MelodyLine melody_from_json(const Json& json);
ChordSymbol chord_from_json(const Json& json);
ChordSequence chords_from_json(const Json& json);
LeadSheet leadsheet_from_json(const Json& json);
LatentVector latent_from_json(const Json& json);

template <typename T>
std::string serialize(const T& value) {
  return to_json(value).dump();
}

/// Parses text; malformed JSON is reported as SchemaError("json").
Json parse_json(std::string_view text);

template <typename T>
T deserialize(std::string_view text);

template <> DrumPattern deserialize<DrumPattern>(std::string_view text);
template <> MelodyLine deserialize<MelodyLine>(std::string_view text);
template <> LeadSheet deserialize<LeadSheet>(std::string_view text);
template <> LatentVector deserialize<LatentVector>(std::string_view text);

}  // namespace musicdemo::music
