#include "lexdraft/langmodel.hpp"

#include <cmath>

#include "lexdraft/error.hpp"

namespace lexdraft {

double NextTokenDistribution::sum() const {
  double s = 0.0;
  for (double p : probs) s += p;
  return s;
}

bool NextTokenDistribution::is_valid(double tolerance) const {
  if (probs.empty()) return false;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) return false;
  }
  return std::abs(sum() - 1.0) <= tolerance;
}

TokenId NextTokenDistribution::argmax() const {
  TokenId best = 0;
  for (TokenId i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return best;
}

std::vector<TokenId> padded_window(std::span<const TokenId> context, size_t width) {
  std::vector<TokenId> window(width, Vocabulary::kBos);
  const size_t take = std::min(width, context.size());
  std::copy(context.end() - static_cast<std::ptrdiff_t>(take), context.end(),
            window.end() - static_cast<std::ptrdiff_t>(take));
  return window;
}

double evaluate_loss(const LanguageModel& lm, const std::vector<std::string>& texts) {
  if (texts.empty()) throw Error(ErrorCode::kEmptyCorpus, "no texts to evaluate");
  const Vocabulary& vocab = lm.vocabulary();
  double total = 0.0;
  size_t positions = 0;
  for (const auto& text : texts) {
    std::vector<TokenId> ids = vocab.encode(text);
    ids.push_back(Vocabulary::kEos);
    for (size_t i = 0; i < ids.size(); ++i) {
      const NextTokenDistribution dist = lm.next(std::span(ids.data(), i));
      total -= std::log(dist.probs[ids[i]]);
      ++positions;
    }
  }
  return total / static_cast<double>(positions);
}

double perplexity(double loss) { return std::exp(loss); }

}  // namespace lexdraft
