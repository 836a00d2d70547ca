#include "musicdemo/server/service.hpp"

#include "musicdemo/models/interpolation.hpp"
#include "musicdemo/music/theory.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace musicdemo::server {

namespace {

class ApiError : public std::runtime_error {
 public:
  ApiError(int status, const std::string& message, std::string field = {})
      : std::runtime_error(message), status_(status), field_(std::move(field)) {}
  int status() const { return status_; }
  const std::string& field() const { return field_; }

 private:
  int status_;
  std::string field_;
};

HttpResult json_result(const Json& body, int status = 200) { return {status, body.dump(), "application/json"}; }

HttpResult error_result(int status, const std::string& message, const std::string& field = {}) {
  Json body = {{"error", message}};
  if (!field.empty()) body["field"] = field;
  return json_result(body, status);
}

const Json& field(const Json& body, const char* name) {
  if (!body.is_object()) throw music::SchemaError("body", "expected a JSON object");
  const auto it = body.find(name);
  if (it == body.end()) throw music::SchemaError(name, "missing");
  return *it;
}

int int_field(const Json& body, const char* name) {
  const Json& v = field(body, name);
  if (!v.is_number_integer()) throw music::SchemaError(name, "expected an integer");
  return v.get<int>();
}

std::string string_field(const Json& body, const char* name) {
  const Json& v = field(body, name);
  if (!v.is_string()) throw music::SchemaError(name, "expected a string");
  return v.get<std::string>();
}

Json probabilities_json(const models::DrumProbabilities& p) {
  Json rows = Json::array();
  for (int i = 0; i < music::kDrumInstruments; ++i) {
    Json row = Json::array();
    for (int t = 0; t < music::kDrumSteps; ++t) row.push_back(p(i, t));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json sheets_json(const std::vector<music::LeadSheet>& sheets) {
  Json out = Json::array();
  for (const auto& s : sheets) out.push_back(music::to_json(s));
  return out;
}

models::InterpolationMode mode_field(const Json& body) {
  if (!body.contains("mode")) return models::InterpolationMode::slerp;
  const auto mode = models::interpolation_mode_from_string(string_field(body, "mode"));
  if (!mode) throw music::SchemaError("mode", "expected \"slerp\" or \"lerp\"");
  return *mode;
}

int steps_field(const Json& body) {
  const int steps = int_field(body, "steps");
  if (steps < models::kMinInterpolationSteps || steps > models::kMaxInterpolationSteps) {
    throw music::SchemaError("steps", "must be in [2, 17]");
  }
  return steps;
}

int agreement(const music::ChordSequence& a, const music::ChordSequence& b) {
  int same = 0;
  for (int s = 0; s < music::kHalfBars; ++s) same += a[s] == b[s];
  return same;
}

}  // namespace

std::vector<PracticeLevel> default_practice_levels() {
  return {{3, 101}, {17, 102}, {30, 103}, {44, 104}, {61, 105}, {90, 106}};
}

DemoService::DemoService(ModelBundle models, std::vector<music::LeadSheet> library,
                         std::vector<PracticeLevel> practice, std::uint64_t seed)
    : models_(std::move(models)), library_(std::move(library)), practice_(std::move(practice)), rng_(seed) {
  if (!models_.drum || !models_.harmonizer || models_.leadsheet.empty()) {
    throw std::invalid_argument("demo service needs drum, lead-sheet and harmonizer models");
  }
  if (!models_.leadsheet.contains(models_.default_leadsheet)) {
    models_.default_leadsheet = models_.leadsheet.begin()->first;
  }
  if (library_.empty()) throw std::invalid_argument("demo service needs a non-empty lead-sheet library");
  if (practice_.size() != kPracticeLevels) throw std::invalid_argument("practice mode has exactly 6 levels");
  for (auto& level : practice_) level.sheet_id %= static_cast<int>(library_.size());

  std::vector<int> scores;
  for (const auto& level : practice_) {
    const auto& sheet = library_[static_cast<std::size_t>(level.sheet_id)];
    scores.push_back(agreement(models_.harmonizer->harmonize(sheet.melody).chords, sheet.chords));
  }
  std::vector<std::size_t> order(practice_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<PracticeLevel> sorted;
  for (std::size_t i : order) sorted.push_back(practice_[i]);
  practice_ = std::move(sorted);
}

template <typename F>
HttpResult DemoService::guarded(F&& f) const {
  try {
    return f();
  } catch (const music::SchemaError& e) {
    return error_result(400, e.what(), e.field());
  } catch (const ApiError& e) {
    return error_result(e.status(), e.what(), e.field());
  } catch (const std::exception&) {
    return error_result(500, "internal error");
  }
}

HttpResult DemoService::drum_random(std::optional<std::uint64_t> seed) {
  return guarded([&] {
    std::uint64_t draw_seed = 0;
    if (seed) {
      draw_seed = *seed;
    } else {
      std::lock_guard lock(rng_mutex_);
      draw_seed = rng_();
    }
    nn::Rng rng(draw_seed);
    const auto sample = models::sample_prior(*models_.drum, rng);
    return json_result({{"latent", music::to_json(sample.latent)}, {"pattern", music::to_json(sample.decoding.pattern)}});
  });
}

HttpResult DemoService::drum_encode(std::string_view body) const {
  return guarded([&] {
    const auto pattern = music::drum_from_json(music::parse_json(body));
    return json_result(music::to_json(models_.drum->encode(pattern)));
  });
}

HttpResult DemoService::drum_decode(std::string_view body) const {
  return guarded([&] {
    const auto latent = music::latent_from_json(music::parse_json(body));
    const auto decoding = models_.drum->decode(latent);
    return json_result(
        {{"pattern", music::to_json(decoding.pattern)}, {"probabilities", probabilities_json(decoding.probabilities)}});
  });
}

HttpResult DemoService::drum_adjust(std::string_view body) const {
  return guarded([&] {
    const Json request = music::parse_json(body);
    const auto latent = music::latent_from_json(field(request, "latent"));
    const int index = int_field(request, "index");
    if (index < 0 || index >= music::kLatentDim) throw music::SchemaError("index", "must be in [0, 31]");
    const Json& value = field(request, "value");
    if (!value.is_number()) throw music::SchemaError("value", "expected a number");
    const auto adjusted = models::set_latent_dim(latent, index, value.get<double>());
    const auto decoding = models_.drum->decode(adjusted);
    return json_result({{"latent", music::to_json(adjusted)}, {"pattern", music::to_json(decoding.pattern)}});
  });
}

HttpResult DemoService::leadsheet_library() const {
  return guarded([&] {
    Json sheets = Json::array();
    for (std::size_t i = 0; i < library_.size(); ++i) {
      sheets.push_back({{"id", i}, {"sheet", music::to_json(library_[i])}});
    }
    return json_result(sheets);
  });
}

HttpResult DemoService::leadsheet_models() const {
  return guarded([&] {
    Json names = Json::array();
    for (const auto& [name, model] : models_.leadsheet) names.push_back(name);
    return json_result({{"models", std::move(names)}, {"default", models_.default_leadsheet}});
  });
}

const models::LeadSheetVae& DemoService::leadsheet_model(const Json& body, const char* name) const {
  if (!body.contains(name)) return *models_.leadsheet.at(models_.default_leadsheet);
  const auto checkpoint = string_field(body, name);
  const auto it = models_.leadsheet.find(checkpoint);
  if (it == models_.leadsheet.end()) throw ApiError(404, "unknown model '" + checkpoint + "'", name);
  return *it->second;
}

const music::LeadSheet& DemoService::library_sheet(const Json& body, const char* name) const {
  const int id = int_field(body, name);
  if (id < 0 || id >= static_cast<int>(library_.size())) {
    throw ApiError(404, "unknown lead sheet id " + std::to_string(id), name);
  }
  return library_[static_cast<std::size_t>(id)];
}

HttpResult DemoService::leadsheet_interpolate(std::string_view body) const {
  return guarded([&] {
    const Json request = music::parse_json(body);
    const int steps = steps_field(request);
    const auto mode = mode_field(request);
    const auto& a = library_sheet(request, "id_a");
    const auto& b = library_sheet(request, "id_b");
    const auto& model = leadsheet_model(request, "model");
    return json_result(sheets_json(models::interpolate(model, a, b, steps, mode)));
  });
}

HttpResult DemoService::leadsheet_interpolate_ab(std::string_view body) const {
  return guarded([&] {
    const Json request = music::parse_json(body);
    const int steps = steps_field(request);
    const auto mode = mode_field(request);
    const auto& a = library_sheet(request, "id_a");
    const auto& b = library_sheet(request, "id_b");
    field(request, "model_a");
    field(request, "model_b");
    const auto& first = leadsheet_model(request, "model_a");
    const auto& second = leadsheet_model(request, "model_b");
    const auto paired = models::ab_interpolate(first, second, a, b, steps, mode);
    return json_result({{"model_a", sheets_json(paired.first)}, {"model_b", sheets_json(paired.second)}});
  });
}

HttpResult DemoService::harmonize(std::string_view body) const {
  return guarded([&] {
    const auto melody = music::melody_from_json(music::parse_json(body));
    const auto result = models_.harmonizer->harmonize(melody);
    Json functions = Json::array();
    Json circle = Json::array();
    for (int s = 0; s < music::kHalfBars; ++s) {
      const auto& fn = result.functions[s];
      functions.push_back(fn ? Json(music::to_string(*fn)) : Json(nullptr));
      const auto& chord = result.chords[s];
      circle.push_back(chord.is_no_chord() ? Json(nullptr) : Json(music::circle_of_fifths_index(chord.root)));
    }
    return json_result({{"chords", music::to_json(result.chords)},
                        {"functions", std::move(functions)},
                        {"circle_indices", std::move(circle)}});
  });
}

std::string DemoService::token(nn::Rng& rng) const {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  std::uint64_t v = rng();
  for (int i = 0; i < 16; ++i, v >>= 4) out.push_back(kHex[v & 0xf]);
  return out;
}

DemoService::Round DemoService::make_round(Session& session, int sheet_id, std::uint64_t order_seed) const {
  Round round;
  round.id = token(session.rng);
  round.level = session.played + 1;
  round.sheet_id = sheet_id;
  const auto& sheet = library_[static_cast<std::size_t>(sheet_id)];
  round.melody = sheet.melody;
  round.model_clip = models_.harmonizer->harmonize(sheet.melody).chords;
  round.reference_clip = sheet.chords;
  nn::Rng order(order_seed);
  round.model_slot = static_cast<int>(order() & 1u);
  return round;
}

DemoService::Round DemoService::next_round(Session& session) const {
  if (session.mode == GameMode::practice) {
    const auto& level = practice_[static_cast<std::size_t>(session.played)];
    return make_round(session, level.sheet_id, level.seed);
  }
  std::uniform_int_distribution<int> pick(0, static_cast<int>(library_.size()) - 1);
  const int sheet_id = pick(session.rng);
  return make_round(session, sheet_id, session.rng());
}

Json DemoService::round_json(const Round& round) const {
  const auto& first = round.model_slot == 0 ? round.model_clip : round.reference_clip;
  const auto& second = round.model_slot == 0 ? round.reference_clip : round.model_clip;
  return {{"round_id", round.id},
          {"level", round.level},
          {"melody", music::to_json(round.melody)},
          {"clips", Json::array({music::to_json(first), music::to_json(second)})}};
}

void DemoService::expire_sessions() {
  const auto now = std::chrono::steady_clock::now();
  std::erase_if(sessions_, [&](const auto& entry) { return now - entry.second.last_seen > session_timeout_; });
}

std::size_t DemoService::session_count() const {
  std::lock_guard lock(sessions_mutex_);
  return sessions_.size();
}

HttpResult DemoService::turing_start(std::string_view body, std::optional<std::uint64_t> seed) {
  return guarded([&] {
    const Json request = music::parse_json(body);
    const auto mode_name = string_field(request, "mode");
    GameMode mode;
    if (mode_name == "practice") {
      mode = GameMode::practice;
    } else if (mode_name == "challenge") {
      mode = GameMode::challenge;
    } else {
      throw music::SchemaError("mode", "expected \"practice\" or \"challenge\"");
    }

    std::uint64_t session_seed = 0;
    if (seed) {
      session_seed = *seed;
    } else {
      std::lock_guard lock(rng_mutex_);
      session_seed = rng_();
    }
    Session session;
    session.mode = mode;
    session.rng.seed(session_seed);
    session.id = token(session.rng);
    session.current = next_round(session);
    session.last_seen = std::chrono::steady_clock::now();

    std::lock_guard lock(sessions_mutex_);
    expire_sessions();
    while (sessions_.contains(session.id)) session.id = token(session.rng);
    const Json response = {{"session_id", session.id}, {"round", round_json(session.current)}};
    sessions_.emplace(session.id, std::move(session));
    return json_result(response);
  });
}

HttpResult DemoService::turing_guess(std::string_view body) {
  return guarded([&] {
    const Json request = music::parse_json(body);
    const auto session_id = string_field(request, "session_id");
    const auto round_id = string_field(request, "round_id");
    const int slot = int_field(request, "slot");
    if (slot != 0 && slot != 1) throw music::SchemaError("slot", "must be 0 or 1");

    std::lock_guard lock(sessions_mutex_);
    expire_sessions();
    const auto it = sessions_.find(session_id);
    if (it == sessions_.end()) throw ApiError(404, "unknown session", "session_id");
    Session& session = it->second;
    session.last_seen = std::chrono::steady_clock::now();
    if (std::find(session.answered.begin(), session.answered.end(), round_id) != session.answered.end()) {
      throw ApiError(409, "round already guessed", "round_id");
    }
    if (session.finished) throw ApiError(409, "game finished", "session_id");
    if (round_id != session.current.id) throw ApiError(404, "unknown round", "round_id");

    const bool correct = slot == session.current.model_slot;
    session.answered.push_back(round_id);
    ++session.played;
    if (correct) {
      ++session.score;
    } else {
      ++session.wrong;
    }
    session.finished = session.mode == GameMode::practice ? session.played >= kPracticeLevels
                                                          : session.wrong >= kChallengeLives;
    Json response = {{"correct", correct}, {"score", session.score}, {"finished", session.finished}};
    if (!session.finished) {
      session.current = next_round(session);
      response["next_round"] = round_json(session.current);
    }
    return json_result(response);
  });
}

HttpResult DemoService::handle(std::string_view method, std::string_view path, std::string_view body,
                               std::optional<std::uint64_t> seed) {
  if (method == "GET") {
    if (path == "/api/drum/random") return drum_random(seed);
    if (path == "/api/leadsheet/library") return leadsheet_library();
    if (path == "/api/leadsheet/models") return leadsheet_models();
  } else if (method == "POST") {
    if (path == "/api/drum/encode") return drum_encode(body);
    if (path == "/api/drum/decode") return drum_decode(body);
    if (path == "/api/drum/adjust") return drum_adjust(body);
    if (path == "/api/leadsheet/interpolate") return leadsheet_interpolate(body);
    if (path == "/api/leadsheet/interpolate_ab") return leadsheet_interpolate_ab(body);
    if (path == "/api/harmonize") return harmonize(body);
    if (path == "/api/turing/start") return turing_start(body, seed);
    if (path == "/api/turing/guess") return turing_guess(body);
  }
  return error_result(404, "no such endpoint");
}

HttpResult serve_static(const std::filesystem::path& root, std::string_view request_path) {
  namespace fs = std::filesystem;
  const HttpResult not_found = error_result(404, "not found");
  std::string relative(request_path);
  if (relative.empty() || relative.front() != '/') return not_found;
  relative.erase(0, 1);
  if (relative.empty() || relative.back() == '/') relative += "index.html";

  const fs::path candidate = fs::path(relative).lexically_normal();
  if (candidate.is_absolute() || candidate.empty() || *candidate.begin() == "..") return not_found;
  for (const auto& part : candidate) {
    if (part == "..") return not_found;
  }

  std::error_code ec;
  const fs::path base = fs::weakly_canonical(root, ec);
  if (ec) return not_found;
  const fs::path full = fs::weakly_canonical(base / candidate, ec);
  if (ec || !fs::is_regular_file(full, ec)) return not_found;
  const auto [end, _] = std::mismatch(base.begin(), base.end(), full.begin(), full.end());
  if (end != base.end()) return not_found;

  std::ifstream in(full, std::ios::binary);
  if (!in) return not_found;
  std::ostringstream buffer;
  buffer << in.rdbuf();

  static const std::map<std::string, std::string> kTypes = {
      {".html", "text/html; charset=utf-8"}, {".js", "text/javascript"},   {".mjs", "text/javascript"},
      {".css", "text/css"},                  {".json", "application/json"}, {".svg", "image/svg+xml"},
      {".png", "image/png"},                 {".wav", "audio/wav"},         {".mp3", "audio/mpeg"},
      {".ico", "image/x-icon"},              {".map", "application/json"}, {".txt", "text/plain"}};
  const auto type = kTypes.find(full.extension().string());
  return {200, buffer.str(), type == kTypes.end() ? "application/octet-stream" : type->second};
}

}  // namespace musicdemo::server
