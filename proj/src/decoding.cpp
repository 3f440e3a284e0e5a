#include "lexdraft/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lexdraft/error.hpp"

namespace lexdraft {
namespace {

// Token ids with non-zero probability, most probable first, ties by lower id.
std::vector<TokenId> ranked_support(const NextTokenDistribution& dist) {
  std::vector<TokenId> ids;
  for (TokenId i = 0; i < dist.probs.size(); ++i) {
    if (dist.probs[i] > 0.0) ids.push_back(i);
  }
  std::stable_sort(ids.begin(), ids.end(),
                   [&](TokenId a, TokenId b) { return dist.probs[a] > dist.probs[b]; });
  return ids;
}

NextTokenDistribution keep_only(const NextTokenDistribution& dist,
                                std::span<const TokenId> keep) {
  double mass = 0.0;
  for (TokenId id : keep) mass += dist.probs[id];
  NextTokenDistribution out;
  out.probs.assign(dist.probs.size(), 0.0);
  for (TokenId id : keep) out.probs[id] = dist.probs[id] / mass;
  return out;
}

}  // namespace

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kGreedy: return "greedy";
    case Strategy::kBeam: return "beam";
    case Strategy::kSample: return "sample";
  }
  return "sample";
}

std::optional<Strategy> parse_strategy(std::string_view name) {
  if (name == "greedy") return Strategy::kGreedy;
  if (name == "beam") return Strategy::kBeam;
  if (name == "sample") return Strategy::kSample;
  return std::nullopt;
}

std::string_view finish_reason_name(FinishReason r) {
  return r == FinishReason::kEos ? "eos" : "max_tokens";
}

void DecodingConfig::validate() const {
  if (k < 0) throw Error(ErrorCode::kBadConfig, "k must be >= 0");
  if (!(p > 0.0 && p <= 1.0)) throw Error(ErrorCode::kBadConfig, "p must be in (0, 1]");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorCode::kBadConfig, "temperature must be > 0");
  }
  if (beam_width < 1) throw Error(ErrorCode::kBadConfig, "beam_width must be >= 1");
  if (max_tokens < 1) throw Error(ErrorCode::kBadConfig, "max_tokens must be >= 1");
}

NextTokenDistribution apply_temperature(const NextTokenDistribution& dist, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorCode::kBadConfig, "temperature must be > 0");
  }
  if (temperature == 1.0) return dist;
  double max_log = -INFINITY;
  for (double p : dist.probs) {
    if (p > 0.0) max_log = std::max(max_log, std::log(p) / temperature);
  }
  NextTokenDistribution out;
  out.probs.assign(dist.probs.size(), 0.0);
  double z = 0.0;
  for (size_t i = 0; i < dist.probs.size(); ++i) {
    if (dist.probs[i] > 0.0) {
      out.probs[i] = std::exp(std::log(dist.probs[i]) / temperature - max_log);
      z += out.probs[i];
    }
  }
  for (double& p : out.probs) p /= z;
  return out;
}

NextTokenDistribution filter_topk(const NextTokenDistribution& dist, int k) {
  if (k < 0) throw Error(ErrorCode::kBadConfig, "k must be >= 0");
  if (k == 0) return dist;
  const std::vector<TokenId> ranked = ranked_support(dist);
  if (static_cast<size_t>(k) >= ranked.size()) return dist;
  return keep_only(dist, std::span(ranked.data(), static_cast<size_t>(k)));
}

NextTokenDistribution filter_topp(const NextTokenDistribution& dist, double p) {
  if (!(p > 0.0 && p <= 1.0)) throw Error(ErrorCode::kBadConfig, "p must be in (0, 1]");
  if (p == 1.0) return dist;
  const std::vector<TokenId> ranked = ranked_support(dist);
  double cumulative = 0.0;
  size_t keep = 0;
  while (keep < ranked.size()) {
    cumulative += dist.probs[ranked[keep++]];
    if (cumulative >= p) break;
  }
  if (keep == ranked.size()) return dist;
  return keep_only(dist, std::span(ranked.data(), keep));
}

TokenId sample_token_at(const NextTokenDistribution& dist, double u) {
  double cumulative = 0.0;
  TokenId last_nonzero = 0;
  for (TokenId i = 0; i < dist.probs.size(); ++i) {
    if (dist.probs[i] <= 0.0) continue;
    cumulative += dist.probs[i];
    last_nonzero = i;
    if (u < cumulative) return i;
  }
  return last_nonzero;  // u landed in the rounding gap above the final sum
}

TokenId sample_token(const NextTokenDistribution& dist, SplitMix64& rng) {
  return sample_token_at(dist, rng.uniform());
}

GenerationResult generate_ids(const LanguageModel& lm, std::vector<TokenId> context,
                              const DecodingConfig& config) {
  config.validate();
  if (config.strategy == Strategy::kBeam) {
    return beam_search_ids(lm, context, config.beam_width, config.max_tokens);
  }
  SplitMix64 rng(config.seed);
  GenerationResult result;
  std::vector<TokenId> generated;
  for (int step = 0; step < config.max_tokens; ++step) {
    const NextTokenDistribution raw = lm.next(context);
    NextTokenDistribution dist = apply_temperature(raw, config.temperature);
    dist = filter_topk(dist, config.k);
    dist = filter_topp(dist, config.p);
    const TokenId token =
        config.strategy == Strategy::kGreedy ? dist.argmax() : sample_token(dist, rng);
    const double lp = std::log(raw.probs[token]);
    result.logprobs.push_back(lp);
    result.score += lp;
    ++result.token_count;
    if (token == Vocabulary::kEos) {
      result.finish_reason = FinishReason::kEos;
      break;
    }
    generated.push_back(token);
    context.push_back(token);
  }
  result.text = lm.vocabulary().decode(generated);
  return result;
}

GenerationResult generate(const LanguageModel& lm, std::string_view prompt,
                          const DecodingConfig& config) {
  config.validate();
  std::vector<TokenId> context = lm.vocabulary().encode(prompt);
  if (!config.allow_unknown &&
      std::find(context.begin(), context.end(), Vocabulary::kUnk) != context.end()) {
    throw Error(ErrorCode::kEncodingError, "prompt contains characters outside the vocabulary");
  }
  return generate_ids(lm, std::move(context), config);
}

GenerationResult beam_search_ids(const LanguageModel& lm, const std::vector<TokenId>& context,
                                 int beam_width, int max_tokens) {
  if (beam_width < 1) throw Error(ErrorCode::kBadConfig, "beam_width must be >= 1");
  if (max_tokens < 1) throw Error(ErrorCode::kBadConfig, "max_tokens must be >= 1");
  struct Hypothesis {
    std::vector<TokenId> tokens;
    std::vector<double> logprobs;
    double score = 0.0;
  };
  struct Candidate {
    double score;
    TokenId token;
    size_t parent;
    double logprob;
  };
  const auto width = static_cast<size_t>(beam_width);

  std::vector<Hypothesis> live(1);
  std::vector<Hypothesis> finished;
  std::vector<TokenId> buffer;
  std::vector<Candidate> candidates;
  for (int step = 0; step < max_tokens && !live.empty(); ++step) {
    candidates.clear();
    for (size_t parent = 0; parent < live.size(); ++parent) {
      buffer = context;
      buffer.insert(buffer.end(), live[parent].tokens.begin(), live[parent].tokens.end());
      const NextTokenDistribution dist = lm.next(buffer);
      for (TokenId id = 0; id < dist.probs.size(); ++id) {
        if (dist.probs[id] <= 0.0) continue;
        const double lp = std::log(dist.probs[id]);
        candidates.push_back({live[parent].score + lp, id, parent, lp});
      }
    }
    const size_t keep = std::min(width, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), [](const Candidate& a, const Candidate& b) {
                        if (a.score != b.score) return a.score > b.score;
                        if (a.token != b.token) return a.token < b.token;
                        return a.parent < b.parent;
                      });
    std::vector<Hypothesis> next_live;
    for (size_t i = 0; i < keep; ++i) {
      const Candidate& c = candidates[i];
      Hypothesis h = live[c.parent];
      h.tokens.push_back(c.token);
      h.logprobs.push_back(c.logprob);
      h.score = c.score;
      (c.token == Vocabulary::kEos ? finished : next_live).push_back(std::move(h));
    }
    live = std::move(next_live);
    // Scores only decrease, so no live hypothesis can overtake the best
    // finished one.
    if (!finished.empty() && !live.empty()) {
      const double best_finished =
          std::max_element(finished.begin(), finished.end(), [](const auto& a, const auto& b) {
            return a.score < b.score;
          })->score;
      if (best_finished >= live.front().score) break;
    }
  }

  const Hypothesis* best = nullptr;
  for (const auto& h : finished) {
    if (best == nullptr || h.score > best->score) best = &h;
  }
  if (best == nullptr) best = &live.front();

  GenerationResult result;
  result.logprobs = best->logprobs;
  result.score = best->score;
  result.token_count = static_cast<int>(best->tokens.size());
  std::vector<TokenId> body = best->tokens;
  if (!body.empty() && body.back() == Vocabulary::kEos) {
    result.finish_reason = FinishReason::kEos;
    body.pop_back();
  }
  result.text = lm.vocabulary().decode(body);
  return result;
}

GenerationResult beam_search(const LanguageModel& lm, std::string_view prompt, int beam_width,
                             int max_tokens) {
  return beam_search_ids(lm, lm.vocabulary().encode(prompt), beam_width, max_tokens);
}

}  // namespace lexdraft
