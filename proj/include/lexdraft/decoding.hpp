#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lexdraft/langmodel.hpp"
#include "lexdraft/random.hpp"

namespace lexdraft {

enum class Strategy { kGreedy, kBeam, kSample };

std::string_view strategy_name(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view name);

struct DecodingConfig {
  static constexpr int kDefaultMaxTokens = 500;

  Strategy strategy = Strategy::kSample;
  int k = 0;             // 0 disables top-k
  double p = 1.0;        // 1 disables top-p
  double temperature = 1.0;
  int beam_width = 1;
  int max_tokens = kDefaultMaxTokens;
  std::uint64_t seed = 0;
  // When false, prompts with characters outside the vocabulary are rejected.
  bool allow_unknown = true;

  // Throws Error(kBadConfig) when a field is out of range.
  void validate() const;
};

enum class FinishReason { kEos, kMaxTokens };
std::string_view finish_reason_name(FinishReason r);

struct GenerationResult {
  std::string text;  // generated continuation only
  int token_count = 0;  // decoding steps taken, the EOS step included
  FinishReason finish_reason = FinishReason::kMaxTokens;
  std::vector<double> logprobs;  // ln P_model(chosen token) per step
  double score = 0.0;            // sum of logprobs

  bool operator==(const GenerationResult&) const = default;
};

// p_i^(1/T), renormalised; zero entries stay zero.
NextTokenDistribution apply_temperature(const NextTokenDistribution& dist, double temperature);

// Keeps the k most probable tokens (ties: lower id). k = 0 or k >= support is
// the identity.
NextTokenDistribution filter_topk(const NextTokenDistribution& dist, int k);

// Keeps the shortest most-probable-first prefix with mass >= p (ties: lower
// id). p = 1 is the identity.
NextTokenDistribution filter_topp(const NextTokenDistribution& dist, double p);

// Inverse-CDF over ascending ids with one u in [0, 1) drawn from `rng`.
TokenId sample_token(const NextTokenDistribution& dist, SplitMix64& rng);
TokenId sample_token_at(const NextTokenDistribution& dist, double u);

// Greedy or sampled decoding: temperature, then top-k, then top-p, then
// argmax (greedy) or sample_token. Beam configs are forwarded to beam_search.
GenerationResult generate(const LanguageModel& lm, std::string_view prompt,
                          const DecodingConfig& config);

// Same loop from an already encoded prompt.
GenerationResult generate_ids(const LanguageModel& lm, std::vector<TokenId> context,
                              const DecodingConfig& config);

// Unnormalised log-probability beam search; finished hypotheses are retired to
// a pool and the best finished one wins, else the best live one at max_tokens.
GenerationResult beam_search(const LanguageModel& lm, std::string_view prompt, int beam_width,
                             int max_tokens);
GenerationResult beam_search_ids(const LanguageModel& lm, const std::vector<TokenId>& context,
                                 int beam_width, int max_tokens);

}  // namespace lexdraft
