#include "lexdraft/remote_lm.hpp"

#include <cmath>
#include <regex>

#include <httplib.h>
#include <json.hpp>

#include "lexdraft/error.hpp"

namespace lexdraft {

using json = nlohmann::json;

RemoteLm::RemoteLm(RemoteLmEndpoint endpoint, Vocabulary vocab)
    : endpoint_(std::move(endpoint)), vocab_(std::move(vocab)) {
  static const std::regex kUrl(R"(^http://([A-Za-z0-9.\-]+|\[[0-9A-Fa-f:]+\])(:([0-9]{1,5}))?(/[^\s?#]*)?$)");
  std::smatch m;
  if (!std::regex_match(endpoint_.base_url, m, kUrl)) {
    throw Error(ErrorCode::kBadConfig, "remote LM URL must look like http://host[:port][/path], got '" +
                                           endpoint_.base_url + "'");
  }
  host_ = m[1].str();
  if (host_.front() == '[') host_ = host_.substr(1, host_.size() - 2);
  if (m[3].matched) {
    port_ = std::stoi(m[3].str());
    if (port_ < 1 || port_ > 65535) throw Error(ErrorCode::kBadConfig, "remote LM port out of range");
  }
  path_prefix_ = m[4].str();
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

NextTokenDistribution RemoteLm::next(std::span<const TokenId> context) const {
  return distribution(vocab_.decode(context));
}

NextTokenDistribution RemoteLm::distribution(const std::string& context) const {
  httplib::Client client(host_, port_);
  const auto timeout = endpoint_.timeout;
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));

  const json request = {{"context", context}, {"vocab_hash", vocab_.hash_hex()}};
  httplib::Headers headers;
  if (!endpoint_.model_name.empty()) headers.emplace("X-Lexdraft-Model", endpoint_.model_name);
  const auto res =
      client.Post(path_prefix_ + "/v1/next", headers, request.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::kUnreachable, "remote LM at " + endpoint_.base_url +
                                             " unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status == 409) {
    throw Error(ErrorCode::kVocabMismatch, "remote LM rejected vocabulary " + vocab_.hash_hex());
  }
  if (res->status != 200) {
    throw Error(ErrorCode::kBadResponse,
                "remote LM answered HTTP " + std::to_string(res->status));
  }
  return parse_remote_response(res->body, vocab_);
}

NextTokenDistribution parse_remote_response(const std::string& body, const Vocabulary& vocab) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kBadResponse, std::string("remote LM body is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("probs") || !j["probs"].is_array()) {
    throw Error(ErrorCode::kBadResponse, "remote LM body lacks a 'probs' array");
  }
  if (j.contains("vocab_hash") && j["vocab_hash"] != vocab.hash_hex()) {
    throw Error(ErrorCode::kVocabMismatch, "remote LM vocabulary hash differs");
  }
  const auto& arr = j["probs"];
  if (arr.size() != vocab.size()) {
    throw Error(ErrorCode::kVocabMismatch,
                "remote LM returned " + std::to_string(arr.size()) + " probabilities for a " +
                    std::to_string(vocab.size()) + "-token vocabulary");
  }
  NextTokenDistribution dist;
  dist.probs.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number()) throw Error(ErrorCode::kBadResponse, "non-numeric probability");
    const double p = v.get<double>();
    if (!std::isfinite(p) || p < 0.0) {
      throw Error(ErrorCode::kBadResponse, "probability out of range");
    }
    dist.probs.push_back(p);
  }
  const double sum = dist.sum();
  if (std::abs(sum - 1.0) > RemoteLm::kMaxDrift) {
    throw Error(ErrorCode::kBadResponse,
                "remote LM distribution sums to " + std::to_string(sum));
  }
  for (double& p : dist.probs) p /= sum;
  return dist;
}

NextTokenDistribution remote_distribution(const RemoteLm& lm, const std::string& context) {
  return lm.distribution(context);
}

}  // namespace lexdraft
