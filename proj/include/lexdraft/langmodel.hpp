#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lexdraft/corpus.hpp"

namespace lexdraft {

// Probability vector over the vocabulary, indexed by token id.
struct NextTokenDistribution {
  std::vector<double> probs;

  size_t size() const { return probs.size(); }
  double sum() const;
  // Non-negative entries summing to 1 within `tolerance`.
  bool is_valid(double tolerance = 1e-9) const;
  TokenId argmax() const;  // lowest id among ties
};

// Causal character model. Implementations are immutable once built and safe
// to query from several threads.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  virtual std::string_view kind() const = 0;
  virtual const Vocabulary& vocabulary() const = 0;

  // `context` is the full history without BOS padding; each backend pads
  // on the left with BOS up to its own window.
  virtual NextTokenDistribution next(std::span<const TokenId> context) const = 0;
};

// Mean negative log-likelihood in nats over every prediction position of
// every text, EOS included. Throws kEmptyCorpus for an empty list.
double evaluate_loss(const LanguageModel& lm, const std::vector<std::string>& texts);

double perplexity(double loss);

// Last `width` tokens of `context`, left-padded with BOS.
std::vector<TokenId> padded_window(std::span<const TokenId> context, size_t width);

}  // namespace lexdraft
