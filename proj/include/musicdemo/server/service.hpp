#pragma once

#include "musicdemo/models/drum_vae.hpp"
#include "musicdemo/models/harmonizer.hpp"
#include "musicdemo/models/leadsheet_vae.hpp"
#include "musicdemo/music/wire.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace musicdemo::server {

using music::Json;

struct HttpResult {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

/// Read-only models shared by every request.
struct ModelBundle {
  std::shared_ptr<const models::DrumVae> drum;
  /// Lead-sheet checkpoints by name; `default_leadsheet` names the one used
  /// when a request does not pick one.
  std::map<std::string, std::shared_ptr<const models::LeadSheetVae>> leadsheet;
  std::string default_leadsheet;
  std::shared_ptr<const models::Harmonizer> harmonizer;
};

/// A fixed Turing-game level: a library sheet and the seed that orders its
/// two clips.
struct PracticeLevel {
  int sheet_id = 0;
  std::uint64_t seed = 0;
};

inline constexpr int kPracticeLevels = 6;
inline constexpr int kChallengeLives = 3;

std::vector<PracticeLevel> default_practice_levels();

enum class GameMode { practice, challenge };

/// The demo API without the transport. Every entry point takes the raw
/// request body and returns status + JSON body. Drum, lead-sheet and
/// harmonizer calls are pure functions of the loaded models; the Turing game
/// keeps in-memory sessions that expire after 30 idle minutes.
class DemoService {
 public:
  DemoService(ModelBundle models, std::vector<music::LeadSheet> library,
              std::vector<PracticeLevel> practice = default_practice_levels(), std::uint64_t seed = 0x5eed);

  HttpResult drum_random(std::optional<std::uint64_t> seed);
  HttpResult drum_encode(std::string_view body) const;
  HttpResult drum_decode(std::string_view body) const;
  HttpResult drum_adjust(std::string_view body) const;
  HttpResult leadsheet_library() const;
  HttpResult leadsheet_models() const;
  HttpResult leadsheet_interpolate(std::string_view body) const;
  HttpResult leadsheet_interpolate_ab(std::string_view body) const;
  HttpResult harmonize(std::string_view body) const;
  HttpResult turing_start(std::string_view body, std::optional<std::uint64_t> seed);
  HttpResult turing_guess(std::string_view body);

  /// Dispatches an /api/... request; unknown routes give 404.
  HttpResult handle(std::string_view method, std::string_view path, std::string_view body,
                    std::optional<std::uint64_t> seed = std::nullopt);

  /// Practice levels after sorting easiest first (least model/reference
  /// agreement first).
  const std::vector<PracticeLevel>& practice_levels() const { return practice_; }

  std::size_t session_count() const;
  void set_session_timeout(std::chrono::seconds timeout) { session_timeout_ = timeout; }

 private:
  struct Round {
    std::string id;
    int level = 0;
    int sheet_id = 0;
    music::MelodyLine melody;
    music::ChordSequence model_clip;
    music::ChordSequence reference_clip;
    int model_slot = 0;
  };

  struct Session {
    std::string id;
    GameMode mode = GameMode::practice;
    int played = 0;
    int wrong = 0;
    int score = 0;
    bool finished = false;
    Round current;
    std::vector<std::string> answered;
    nn::Rng rng;
    std::chrono::steady_clock::time_point last_seen;
  };

  template <typename F>
  HttpResult guarded(F&& f) const;

  const models::LeadSheetVae& leadsheet_model(const Json& body, const char* field) const;
  const music::LeadSheet& library_sheet(const Json& body, const char* field) const;
  Round make_round(Session& session, int sheet_id, std::uint64_t order_seed) const;
  Round next_round(Session& session) const;
  Json round_json(const Round& round) const;
  void expire_sessions();
  std::string token(nn::Rng& rng) const;

  ModelBundle models_;
  std::vector<music::LeadSheet> library_;
  std::vector<PracticeLevel> practice_;

  mutable std::mutex rng_mutex_;
  nn::Rng rng_;

  mutable std::mutex sessions_mutex_;
  std::map<std::string, Session> sessions_;
  std::chrono::seconds session_timeout_{30 * 60};
};

/// Static file lookup under `root`. "/" maps to index.html; anything that
/// escapes the root or does not exist is a 404.
HttpResult serve_static(const std::filesystem::path& root, std::string_view request_path);

}  // namespace musicdemo::server
