#pragma once

#include <chrono>
#include <string>

#include "lexdraft/langmodel.hpp"

namespace lexdraft {

struct RemoteLmEndpoint {
  std::string base_url;  // http://host[:port][/prefix]
  std::chrono::milliseconds timeout{5000};
  std::string model_name;
};

// Adapter for an externally served model speaking
//   POST <base>/v1/next  {"context": str, "vocab_hash": str} -> {"probs": [...]}
class RemoteLm final : public LanguageModel {
 public:
  static constexpr double kMaxDrift = 1e-6;

  // Throws kBadConfig when the URL is not http://host[:port][/path].
  RemoteLm(RemoteLmEndpoint endpoint, Vocabulary vocab);

  std::string_view kind() const override { return "remote"; }
  const Vocabulary& vocabulary() const override { return vocab_; }
  NextTokenDistribution next(std::span<const TokenId> context) const override;

  // Throws kUnreachable, kBadResponse or kVocabMismatch.
  NextTokenDistribution distribution(const std::string& context) const;

  const std::string& host() const { return host_; }
  int port() const { return port_; }

 private:
  RemoteLmEndpoint endpoint_;
  Vocabulary vocab_;
  std::string host_;
  int port_ = 80;
  std::string path_prefix_;
};

NextTokenDistribution remote_distribution(const RemoteLm& lm, const std::string& context);

// Validates a {"probs": [...]} body against the vocabulary; shared with tests
// and stub servers.
NextTokenDistribution parse_remote_response(const std::string& body, const Vocabulary& vocab);

}  // namespace lexdraft
