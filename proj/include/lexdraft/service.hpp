#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

#include "lexdraft/decoding.hpp"
#include "lexdraft/elements.hpp"
#include "lexdraft/langmodel.hpp"

namespace httplib {
class Server;
}

namespace lexdraft {

struct ServiceConfig {
  static constexpr int kMaxContinueTokens = 100;
  static constexpr int kDefaultContinueTokens = 30;

  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path model_path;
  std::optional<std::filesystem::path> lexicon_path;
  std::optional<std::filesystem::path> log_path;
  bool log_full = false;
  size_t max_request_bytes = 64 * 1024;
  int max_tokens_cap = DecodingConfig::kDefaultMaxTokens;
  DecodingConfig defaults;
  std::optional<std::filesystem::path> static_dir;
  // Remote backend: when set, the model file is only used for its vocabulary
  // unless vocab_path is given.
  std::optional<std::string> remote_url;
  std::optional<std::filesystem::path> vocab_path;
  int remote_timeout_ms = 5000;

  void validate() const;
};

// "key = value" lines, '#' comments. Unknown keys throw kBadConfig.
std::map<std::string, std::string> parse_config_text(std::string_view text);
void apply_config(const std::map<std::string, std::string>& values, ServiceConfig& config);
// Applies the file named by $LEXDRAFT_CONFIG, if any.
void apply_env_config(ServiceConfig& config);

// Append-only JSON-lines metadata log; writes are serialised.
class SessionLog {
 public:
  explicit SessionLog(std::filesystem::path path) : path_(std::move(path)) {}
  void append(const nlohmann::json& entry);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mutex_;
};

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

nlohmann::json verdict_to_json(const FormatVerdict& verdict);
nlohmann::json spans_to_json(const std::vector<TaggedSpan>& spans);
nlohmann::json config_to_json(const DecodingConfig& config);

class DraftService {
 public:
  static constexpr std::string_view kDisclaimer =
      "Names, dates, places and amounts in this draft are model output and must be "
      "replaced with the facts of the case.";

  DraftService(std::shared_ptr<const LanguageModel> lm, Lexicon lexicon, ServiceConfig config,
               std::string model_hash);

  ApiResponse handle_generate(const nlohmann::json& request, std::string_view session_id = {});
  ApiResponse handle_continue(const nlohmann::json& request, std::string_view session_id = {});
  ApiResponse handle_validate(const nlohmann::json& request) const;
  ApiResponse handle_info() const;

  // Raw body entry point used by the HTTP layer: size check, JSON parse, route.
  ApiResponse dispatch(std::string_view route, std::string_view body,
                       std::string_view session_id = {});

  // Request overrides on top of the service defaults; throws kBadConfig.
  DecodingConfig merge_config(const nlohmann::json& request) const;

  const ServiceConfig& config() const { return config_; }
  const LanguageModel& model() const { return *lm_; }
  const Lexicon& lexicon() const { return lexicon_; }

 private:
  void log(std::string_view kind, size_t prompt_chars, const DecodingConfig& config,
           const GenerationResult& result, const FormatVerdict& verdict,
           std::string_view session_id, std::string_view prompt);

  std::shared_ptr<const LanguageModel> lm_;
  Lexicon lexicon_;
  ServiceConfig config_;
  std::string model_hash_;
  std::unique_ptr<SessionLog> log_;
};

ApiResponse api_error(int status, std::string_view code, std::string_view message);

// Loads the model (or remote adapter) and lexicon named by the config.
std::unique_ptr<DraftService> make_service(const ServiceConfig& config);

void bind_routes(httplib::Server& server, DraftService& service);

// Blocks until the server stops. Returns false if the port could not be bound.
bool run_server(DraftService& service);

}  // namespace lexdraft
