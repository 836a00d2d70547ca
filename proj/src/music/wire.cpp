#include "musicdemo/music/wire.hpp"

#include <cmath>

namespace musicdemo::music {

namespace {

const Json& require(const Json& json, const char* field) {
  if (!json.is_object()) throw SchemaError(field, "expected an object containing this field");
  const auto it = json.find(field);
  if (it == json.end()) throw SchemaError(field, "missing");
  return *it;
}

void require_type(const Json& json, const char* expected) {
  const Json& type = require(json, "type");
  if (!type.is_string() || type.get<std::string>() != expected) {
    throw SchemaError("type", std::string("expected \"") + expected + "\"");
  }
}

int require_int(const Json& json, const std::string& field, int lo, int hi) {
  if (!json.is_number_integer()) throw SchemaError(field, "expected an integer");
  const auto value = json.get<std::int64_t>();
  if (value < lo || value > hi) {
    throw SchemaError(field, "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  return static_cast<int>(value);
}

void require_array(const Json& json, const std::string& field, std::size_t size) {
  if (!json.is_array()) throw SchemaError(field, "expected an array");
  if (json.size() != size) throw SchemaError(field, "expected " + std::to_string(size) + " entries");
}

}  // namespace

Json to_json(const DrumPattern& pattern) {
  Json grid = Json::array();
  for (int i = 0; i < kDrumInstruments; ++i) {
    Json row = Json::array();
    for (int t = 0; t < kDrumSteps; ++t) row.push_back(pattern.at(i, t) ? 1 : 0);
    grid.push_back(std::move(row));
  }
  return Json{{"type", "drum"}, {"grid", std::move(grid)}};
}

Json to_json(const MelodyLine& melody) {
  return Json{{"type", "melody"}, {"tokens", melody.tokens()}};
}

Json to_json(const ChordSymbol& chord) {
  const char* quality = chord.quality == ChordQuality::major   ? "maj"
                        : chord.quality == ChordQuality::minor ? "min"
                                                               : "nc";
  return Json{{"root", chord.is_no_chord() ? 0 : chord.root}, {"quality", quality}};
}

Json to_json(const ChordSequence& chords) {
  Json out = Json::array();
  for (const auto& chord : chords.chords()) out.push_back(to_json(chord));
  return out;
}

Json to_json(const LeadSheet& sheet) {
  return Json{{"type", "leadsheet"},
              {"melody", to_json(sheet.melody)},
              {"chords", to_json(sheet.chords)},
              {"key", sheet.key}};
}

Json to_json(const LatentVector& latent) {
  Json values = Json::array();
  for (int i = 0; i < kLatentDim; ++i) values.push_back(latent[i]);
  return Json{{"type", "latent"}, {"dim", kLatentDim}, {"values", std::move(values)}};
}

DrumPattern drum_from_json(const Json& json) {
  require_type(json, "drum");
  const Json& grid = require(json, "grid");
  require_array(grid, "grid", kDrumInstruments);
  DrumPattern pattern;
  for (int i = 0; i < kDrumInstruments; ++i) {
    const Json& row = grid[static_cast<std::size_t>(i)];
    if (!row.is_array() || row.size() != kDrumSteps) {
      throw SchemaError("grid", "row " + std::to_string(i) + " must have 96 cells");
    }
    for (int t = 0; t < kDrumSteps; ++t) {
      const Json& cell = row[static_cast<std::size_t>(t)];
      if (!cell.is_number_integer() || (cell.get<int>() != 0 && cell.get<int>() != 1)) {
        throw SchemaError("grid", "cells must be 0 or 1");
      }
      pattern.set(i, t, cell.get<int>() == 1);
    }
  }
  return pattern;
}

MelodyLine melody_from_json(const Json& json) {
  require_type(json, "melody");
  const Json& tokens = require(json, "tokens");
  require_array(tokens, "tokens", kMelodySteps);
  std::array<int, kMelodySteps> values{};
  for (int i = 0; i < kMelodySteps; ++i) {
    values[i] = require_int(tokens[static_cast<std::size_t>(i)], "tokens[" + std::to_string(i) + "]", 0,
                            kMelodyVocab - 1);
  }
  return MelodyLine(values);
}

ChordSymbol chord_from_json(const Json& json) {
  const int root = require_int(require(json, "root"), "root", 0, 11);
  const Json& quality = require(json, "quality");
  if (!quality.is_string()) throw SchemaError("quality", "expected a string");
  const auto name = quality.get<std::string>();
  if (name == "maj") return ChordSymbol::major(root);
  if (name == "min") return ChordSymbol::minor(root);
  if (name == "nc") return ChordSymbol::no_chord();
  throw SchemaError("quality", "expected \"maj\", \"min\" or \"nc\"");
}

ChordSequence chords_from_json(const Json& json) {
  require_array(json, "chords", kHalfBars);
  std::array<ChordSymbol, kHalfBars> chords;
  for (int i = 0; i < kHalfBars; ++i) chords[i] = chord_from_json(json[static_cast<std::size_t>(i)]);
  return ChordSequence(chords);
}

LeadSheet leadsheet_from_json(const Json& json) {
  require_type(json, "leadsheet");
  LeadSheet sheet;
  sheet.melody = melody_from_json(require(json, "melody"));
  sheet.chords = chords_from_json(require(json, "chords"));
  sheet.key = require_int(require(json, "key"), "key", 0, 11);
  return sheet;
}

LatentVector latent_from_json(const Json& json) {
  require_type(json, "latent");
  require_int(require(json, "dim"), "dim", kLatentDim, kLatentDim);
  const Json& values = require(json, "values");
  require_array(values, "values", kLatentDim);
  LatentValues out;
  for (int i = 0; i < kLatentDim; ++i) {
    const Json& v = values[static_cast<std::size_t>(i)];
    if (!v.is_number()) throw SchemaError("values", "expected numbers");
    out(i) = v.get<double>();
  }
  return LatentVector(out);
}

Json parse_json(std::string_view text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("json", e.what());
  }
}

template <>
DrumPattern deserialize<DrumPattern>(std::string_view text) {
  return drum_from_json(parse_json(text));
}

template <>
MelodyLine deserialize<MelodyLine>(std::string_view text) {
  return melody_from_json(parse_json(text));
}

template <>
LeadSheet deserialize<LeadSheet>(std::string_view text) {
  return leadsheet_from_json(parse_json(text));
}

template <>
LatentVector deserialize<LatentVector>(std::string_view text) {
  return latent_from_json(parse_json(text));
}

}  // namespace musicdemo::music
