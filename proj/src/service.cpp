#include "lexdraft/service.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>

#include <httplib.h>

#include "lexdraft/error.hpp"
#include "lexdraft/model_io.hpp"
#include "lexdraft/remote_lm.hpp"
#include "lexdraft/utf8.hpp"

namespace lexdraft {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  size_t b = 0;
  size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

long long parse_int(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kBadConfig, "config: " + key + " expects an integer, got '" + value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kBadConfig, "config: " + key + " expects a number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw Error(ErrorCode::kBadConfig, "config: " + key + " expects true/false, got '" + value + "'");
}

std::string utc_timestamp() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

const json* find_field(const json& request, const char* key) {
  if (request.contains("config") && request["config"].is_object() &&
      request["config"].contains(key)) {
    return &request["config"][key];
  }
  if (request.contains(key)) return &request[key];
  return nullptr;
}

int json_int(const json& v, const char* key) {
  if (!v.is_number_integer()) {
    throw Error(ErrorCode::kBadConfig, std::string(key) + " must be an integer");
  }
  long long x = v.get<long long>();
  if (x < INT32_MIN || x > INT32_MAX) {
    throw Error(ErrorCode::kBadConfig, std::string(key) + " is out of range");
  }
  return static_cast<int>(x);
}

double json_double(const json& v, const char* key) {
  if (!v.is_number()) throw Error(ErrorCode::kBadConfig, std::string(key) + " must be a number");
  return v.get<double>();
}

std::string required_text(const json& request, const char* key) {
  if (!request.contains(key) || !request[key].is_string()) {
    throw Error(ErrorCode::kBadConfig, std::string("'") + key + "' must be a string");
  }
  std::string s = request[key].get<std::string>();
  if (trim(s).empty()) throw Error(ErrorCode::kBadConfig, std::string("'") + key + "' is empty");
  return s;
}

json tag_list(const std::vector<ElementTag>& tags) {
  json out = json::array();
  for (ElementTag t : tags) out.push_back(std::string(tag_name(t)));
  return out;
}

}  // namespace

void ServiceConfig::validate() const {
  if (port < 0 || port > 65535) throw Error(ErrorCode::kBadConfig, "port out of range");
  if (max_request_bytes == 0) throw Error(ErrorCode::kBadConfig, "max_request_bytes must be > 0");
  if (max_tokens_cap < 1) throw Error(ErrorCode::kBadConfig, "max_tokens_cap must be >= 1");
  if (remote_timeout_ms < 1) throw Error(ErrorCode::kBadConfig, "remote_timeout_ms must be >= 1");
  defaults.validate();
}

std::map<std::string, std::string> parse_config_text(std::string_view text) {
  std::map<std::string, std::string> out;
  size_t line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string line = trim(text.substr(pos, nl - pos));
    ++line_no;
    pos = nl + 1;
    if (line.empty() || line[0] == '#') continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kBadConfig,
                  "config line " + std::to_string(line_no) + ": expected key = value");
    }
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

void apply_config(const std::map<std::string, std::string>& values, ServiceConfig& config) {
  for (const auto& [key, value] : values) {
    if (key == "host") {
      config.host = value;
    } else if (key == "port") {
      config.port = static_cast<int>(parse_int(key, value));
    } else if (key == "model") {
      config.model_path = value;
    } else if (key == "lexicon") {
      config.lexicon_path = value;
    } else if (key == "log") {
      config.log_path = value;
    } else if (key == "log_full") {
      config.log_full = parse_bool(key, value);
    } else if (key == "max_request_bytes") {
      long long v = parse_int(key, value);
      if (v <= 0) throw Error(ErrorCode::kBadConfig, "max_request_bytes must be > 0");
      config.max_request_bytes = static_cast<size_t>(v);
    } else if (key == "max_tokens_cap") {
      config.max_tokens_cap = static_cast<int>(parse_int(key, value));
    } else if (key == "static_dir") {
      config.static_dir = value;
    } else if (key == "remote_url") {
      config.remote_url = value;
    } else if (key == "vocab") {
      config.vocab_path = value;
    } else if (key == "remote_timeout_ms") {
      config.remote_timeout_ms = static_cast<int>(parse_int(key, value));
    } else if (key == "strategy") {
      auto s = parse_strategy(value);
      if (!s) throw Error(ErrorCode::kBadConfig, "unknown strategy '" + value + "'");
      config.defaults.strategy = *s;
    } else if (key == "k") {
      config.defaults.k = static_cast<int>(parse_int(key, value));
    } else if (key == "p") {
      config.defaults.p = parse_double(key, value);
    } else if (key == "temperature") {
      config.defaults.temperature = parse_double(key, value);
    } else if (key == "beam_width") {
      config.defaults.beam_width = static_cast<int>(parse_int(key, value));
    } else if (key == "max_tokens") {
      config.defaults.max_tokens = static_cast<int>(parse_int(key, value));
    } else if (key == "seed") {
      config.defaults.seed = static_cast<std::uint64_t>(parse_int(key, value));
    } else {
      throw Error(ErrorCode::kBadConfig, "unknown config key '" + key + "'");
    }
  }
}

void apply_env_config(ServiceConfig& config) {
  const char* path = std::getenv("LEXDRAFT_CONFIG");
  if (path == nullptr || *path == '\0') return;
  apply_config(parse_config_text(read_file(path)), config);
}

void SessionLog::append(const json& entry) {
  std::string line = entry.dump() + "\n";
  std::lock_guard<std::mutex> lock(mutex_);
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorCode::kIo, "cannot open session log " + path_.string());
  out << line;
}

json verdict_to_json(const FormatVerdict& verdict) {
  return json{{"strict_ok", verdict.strict_ok},
              {"relaxed_ok", verdict.relaxed_ok},
              {"first_occurrence_order", tag_list(verdict.first_occurrence_order)},
              {"missing", tag_list(verdict.missing)}};
}

json spans_to_json(const std::vector<TaggedSpan>& spans) {
  json out = json::array();
  for (const auto& s : spans) {
    out.push_back(json{{"start", s.start},
                       {"end", s.end},
                       {"tag", std::string(tag_name(s.tag))},
                       {"pattern", s.pattern}});
  }
  return out;
}

json config_to_json(const DecodingConfig& config) {
  return json{{"strategy", std::string(strategy_name(config.strategy))},
              {"k", config.k},
              {"p", config.p},
              {"temperature", config.temperature},
              {"beam_width", config.beam_width},
              {"max_tokens", config.max_tokens},
              {"seed", config.seed}};
}

ApiResponse api_error(int status, std::string_view code, std::string_view message) {
  return ApiResponse{status, json{{"error", std::string(code)}, {"message", std::string(message)}}};
}

DraftService::DraftService(std::shared_ptr<const LanguageModel> lm, Lexicon lexicon,
                           ServiceConfig config, std::string model_hash)
    : lm_(std::move(lm)),
      lexicon_(std::move(lexicon)),
      config_(std::move(config)),
      model_hash_(std::move(model_hash)) {
  if (!lm_) throw Error(ErrorCode::kBadConfig, "service needs a language model");
  if (!lexicon_.complete()) {
    throw Error(ErrorCode::kIncompleteLexicon, "lexicon must cover all six element tags");
  }
  config_.validate();
  if (config_.log_path) log_ = std::make_unique<SessionLog>(*config_.log_path);
}

DecodingConfig DraftService::merge_config(const json& request) const {
  if (request.contains("config") && !request["config"].is_object()) {
    throw Error(ErrorCode::kBadConfig, "'config' must be an object");
  }
  DecodingConfig c = config_.defaults;
  if (const json* v = find_field(request, "strategy")) {
    if (!v->is_string()) throw Error(ErrorCode::kBadConfig, "strategy must be a string");
    auto s = parse_strategy(v->get<std::string>());
    if (!s) throw Error(ErrorCode::kBadConfig, "unknown strategy '" + v->get<std::string>() + "'");
    c.strategy = *s;
  }
  if (const json* v = find_field(request, "k")) c.k = json_int(*v, "k");
  if (const json* v = find_field(request, "p")) c.p = json_double(*v, "p");
  if (const json* v = find_field(request, "temperature")) {
    c.temperature = json_double(*v, "temperature");
  }
  if (const json* v = find_field(request, "beam_width")) c.beam_width = json_int(*v, "beam_width");
  if (const json* v = find_field(request, "max_tokens")) c.max_tokens = json_int(*v, "max_tokens");
  if (const json* v = find_field(request, "seed")) {
    if (!v->is_number_integer()) throw Error(ErrorCode::kBadConfig, "seed must be an integer");
    c.seed = v->is_number_unsigned() ? v->get<std::uint64_t>()
                                     : static_cast<std::uint64_t>(v->get<std::int64_t>());
  }
  c.validate();
  c.max_tokens = std::min(c.max_tokens, config_.max_tokens_cap);
  return c;
}

void DraftService::log(std::string_view kind, size_t prompt_chars, const DecodingConfig& config,
                       const GenerationResult& result, const FormatVerdict& verdict,
                       std::string_view session_id, std::string_view prompt) {
  if (!log_) return;
  json entry{{"timestamp", utc_timestamp()},
             {"session_id", std::string(session_id)},
             {"kind", std::string(kind)},
             {"prompt_chars", prompt_chars},
             {"config", config_to_json(config)},
             {"token_count", result.token_count},
             {"finish_reason", std::string(finish_reason_name(result.finish_reason))},
             {"strict_ok", verdict.strict_ok},
             {"relaxed_ok", verdict.relaxed_ok}};
  if (config_.log_full) {
    entry["prompt"] = std::string(prompt);
    entry["text"] = result.text;
  }
  try {
    log_->append(entry);
  } catch (const Error& e) {
    std::cerr << "lexdraft: " << e.what() << "\n";
  }
}

ApiResponse DraftService::handle_generate(const json& request, std::string_view session_id) {
  try {
    if (!request.is_object()) return api_error(400, "BadRequest", "body must be a JSON object");
    std::string prompt = required_text(request, "prompt");
    DecodingConfig config = merge_config(request);
    GenerationResult result;
    try {
      result = generate(*lm_, prompt, config);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kEncodingError) return api_error(400, "BadConfig", e.what());
      return api_error(500, "GenerationFailed", e.what());
    }
    std::string full = prompt + result.text;
    auto spans = tag_text(std::string_view(full), lexicon_);
    FormatVerdict verdict = verdict_from_spans(spans);
    log("generate", utf8::decode(prompt).size(), config, result, verdict, session_id, prompt);
    return ApiResponse{200, json{{"text", result.text},
                                 {"full_text", full},
                                 {"token_count", result.token_count},
                                 {"finish_reason", std::string(finish_reason_name(result.finish_reason))},
                                 {"verdict", verdict_to_json(verdict)},
                                 {"spans", spans_to_json(spans)},
                                 {"config", config_to_json(config)},
                                 {"disclaimer", std::string(kDisclaimer)}}};
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidEncoding) return api_error(400, "BadRequest", e.what());
    return api_error(400, "BadConfig", e.what());
  }
}

ApiResponse DraftService::handle_continue(const json& request, std::string_view session_id) {
  try {
    if (!request.is_object()) return api_error(400, "BadRequest", "body must be a JSON object");
    std::string draft = required_text(request, "draft_so_far");
    int n = ServiceConfig::kDefaultContinueTokens;
    if (request.contains("continue_tokens")) {
      n = json_int(request["continue_tokens"], "continue_tokens");
    }
    if (n < 1 || n > ServiceConfig::kMaxContinueTokens) {
      return api_error(400, "BadConfig",
                       "continue_tokens must be in [1, " +
                           std::to_string(ServiceConfig::kMaxContinueTokens) + "]");
    }
    json overrides = request;
    if (overrides.contains("config") && overrides["config"].is_object()) {
      overrides["config"].erase("max_tokens");
    }
    overrides.erase("max_tokens");
    DecodingConfig config = merge_config(overrides);
    config.max_tokens = n;
    GenerationResult result;
    try {
      result = generate(*lm_, draft, config);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kEncodingError) return api_error(400, "BadConfig", e.what());
      return api_error(500, "GenerationFailed", e.what());
    }
    std::string full = draft + result.text;
    auto spans = tag_text(std::string_view(full), lexicon_);
    FormatVerdict verdict = verdict_from_spans(spans);
    log("continue", utf8::decode(draft).size(), config, result, verdict, session_id, draft);
    return ApiResponse{200, json{{"continuation", result.text},
                                 {"full_text", full},
                                 {"token_count", result.token_count},
                                 {"finish_reason", std::string(finish_reason_name(result.finish_reason))},
                                 {"verdict", verdict_to_json(verdict)},
                                 {"spans", spans_to_json(spans)},
                                 {"config", config_to_json(config)},
                                 {"disclaimer", std::string(kDisclaimer)}}};
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidEncoding) return api_error(400, "BadRequest", e.what());
    return api_error(400, "BadConfig", e.what());
  }
}

ApiResponse DraftService::handle_validate(const json& request) const {
  try {
    if (!request.is_object()) return api_error(400, "BadRequest", "body must be a JSON object");
    std::string text = required_text(request, "text");
    auto spans = tag_text(std::string_view(text), lexicon_);
    return ApiResponse{200, json{{"verdict", verdict_to_json(verdict_from_spans(spans))},
                                 {"spans", spans_to_json(spans)},
                                 {"annotated", annotate(text, spans)}}};
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidEncoding) return api_error(400, "BadRequest", e.what());
    return api_error(400, "BadConfig", e.what());
  }
}

ApiResponse DraftService::handle_info() const {
  json per_tag = json::object();
  for (ElementTag t : kCanonicalOrder) per_tag[std::string(tag_name(t))] = lexicon_.count(t);
  return ApiResponse{200, json{{"backend", std::string(lm_->kind())},
                               {"vocab_size", lm_->vocabulary().size()},
                               {"vocab_hash", lm_->vocabulary().hash_hex()},
                               {"model_hash", model_hash_},
                               {"default_config", config_to_json(config_.defaults)},
                               {"max_tokens_cap", config_.max_tokens_cap},
                               {"max_continue_tokens", ServiceConfig::kMaxContinueTokens},
                               {"lexicon", json{{"entries", lexicon_.entries().size()},
                                                {"per_tag", per_tag}}},
                               {"disclaimer", std::string(kDisclaimer)}}};
}

ApiResponse DraftService::dispatch(std::string_view route, std::string_view body,
                                   std::string_view session_id) {
  if (route == "/api/info") return handle_info();
  if (body.size() > config_.max_request_bytes) {
    return api_error(413, "TooLarge",
                     "request body exceeds " + std::to_string(config_.max_request_bytes) + " bytes");
  }
  if (!utf8::is_valid(body)) return api_error(400, "BadRequest", "request body is not UTF-8");
  json request = json::parse(body, nullptr, false);
  if (request.is_discarded()) return api_error(400, "BadRequest", "malformed JSON body");
  if (route == "/api/generate") return handle_generate(request, session_id);
  if (route == "/api/continue") return handle_continue(request, session_id);
  if (route == "/api/validate") return handle_validate(request);
  return api_error(404, "NotFound", "unknown route");
}

std::unique_ptr<DraftService> make_service(const ServiceConfig& config) {
  config.validate();
  std::shared_ptr<const LanguageModel> lm;
  std::string hash;
  if (config.remote_url) {
    Vocabulary vocab;
    if (config.vocab_path) {
      vocab = load_vocabulary(*config.vocab_path);
    } else if (!config.model_path.empty()) {
      vocab = load_model(config.model_path)->vocabulary();
    } else {
      throw Error(ErrorCode::kBadConfig, "remote backend needs a vocabulary or model file");
    }
    RemoteLmEndpoint ep{*config.remote_url, std::chrono::milliseconds(config.remote_timeout_ms), {}};
    lm = std::make_shared<RemoteLm>(ep, std::move(vocab));
    hash = "remote:" + *config.remote_url;
  } else {
    if (config.model_path.empty()) throw Error(ErrorCode::kBadConfig, "no model file configured");
    lm = load_model(config.model_path);
    hash = model_file_hash(config.model_path);
  }
  Lexicon lexicon = config.lexicon_path ? load_lexicon(*config.lexicon_path) : default_lexicon();
  return std::make_unique<DraftService>(std::move(lm), std::move(lexicon), config, std::move(hash));
}

void bind_routes(httplib::Server& server, DraftService& service) {
  auto send = [](httplib::Response& res, const ApiResponse& api) {
    res.status = api.status;
    res.set_content(api.body.dump(), "application/json; charset=utf-8");
  };
  auto post = [&service, send](const char* route) {
    return [&service, send, route](const httplib::Request& req, httplib::Response& res) {
      std::string session = req.get_header_value("X-Session-Id");
      send(res, service.dispatch(route, req.body, session));
    };
  };
  server.Post("/api/generate", post("/api/generate"));
  server.Post("/api/continue", post("/api/continue"));
  server.Post("/api/validate", post("/api/validate"));
  server.Get("/api/info", [&service, send](const httplib::Request&, httplib::Response& res) {
    send(res, service.handle_info());
  });
  // Oversized bodies are read (up to a hard ceiling) so the handler can answer
  // with a structured 413 instead of a dropped connection.
  server.set_payload_max_length(std::max<size_t>(service.config().max_request_bytes * 4, 1 << 20));
  if (service.config().static_dir) {
    server.set_mount_point("/", service.config().static_dir->string());
  }
}

bool run_server(DraftService& service) {
  httplib::Server server;
  bind_routes(server, service);
  const auto& c = service.config();
  if (!server.bind_to_port(c.host, c.port)) return false;
  std::cerr << "lexdraft: serving on http://" << c.host << ":" << c.port << "\n";
  return server.listen_after_bind();
}

}  // namespace lexdraft
