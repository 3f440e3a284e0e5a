#include "lexdraft/kneser_ney.hpp"

#include <algorithm>

#include "lexdraft/error.hpp"

namespace lexdraft {

KneserNeyModel::KneserNeyModel(Vocabulary vocab, int order, double discount,
                               std::vector<NgramCounts> counts)
    : vocab_(std::move(vocab)), order_(order), discount_(discount), counts_(std::move(counts)) {
  if (order_ < 1 || order_ > kMaxOrder) {
    throw Error(ErrorCode::kBadConfig, "Kneser-Ney order must be in 1..6");
  }
  if (!(discount_ > 0.0 && discount_ < 1.0)) {
    throw Error(ErrorCode::kBadConfig, "Kneser-Ney discount must be in (0, 1)");
  }
  if (counts_.size() != static_cast<size_t>(order_)) {
    throw Error(ErrorCode::kBadFormat, "count tables do not match the model order");
  }

  // The top level predicts from raw counts; level k < order from the number
  // of distinct tokens seen to the left of each k-gram.
  std::vector<NgramCounts> level_counts(static_cast<size_t>(order_));
  level_counts.back() = counts_.back();
  for (size_t k = 1; k < static_cast<size_t>(order_); ++k) {
    NgramCounts& cont = level_counts[k - 1];
    for (const auto& [gram, c] : counts_[k]) {
      if (c == 0) continue;
      ++cont[std::vector<TokenId>(gram.begin() + 1, gram.end())];
    }
  }

  levels_.resize(static_cast<size_t>(order_));
  for (size_t k = 0; k < levels_.size(); ++k) {
    for (const auto& [gram, c] : level_counts[k]) {
      ContextStats& stats = levels_[k][std::vector<TokenId>(gram.begin(), gram.end() - 1)];
      stats.total += c;
      stats.followers.emplace_back(gram.back(), c);
    }
    for (auto& [ctx, stats] : levels_[k]) {
      std::sort(stats.followers.begin(), stats.followers.end());
    }
  }
}

NextTokenDistribution KneserNeyModel::next(std::span<const TokenId> context) const {
  const size_t v = vocab_.size();
  NextTokenDistribution dist;
  dist.probs.assign(v, 1.0 / static_cast<double>(v));
  const std::vector<TokenId> window = padded_window(context, static_cast<size_t>(order_ - 1));
  std::vector<TokenId> key;
  for (size_t k = 0; k < levels_.size(); ++k) {
    key.assign(window.end() - static_cast<std::ptrdiff_t>(k), window.end());
    const auto it = levels_[k].find(key);
    if (it == levels_[k].end()) continue;  // unseen context: keep lower order
    const ContextStats& stats = it->second;
    const auto total = static_cast<double>(stats.total);
    const double lambda = discount_ * static_cast<double>(stats.followers.size()) / total;
    for (double& p : dist.probs) p *= lambda;
    for (const auto& [id, c] : stats.followers) {
      dist.probs[id] += std::max(static_cast<double>(c) - discount_, 0.0) / total;
    }
  }
  return dist;
}

std::uint64_t KneserNeyModel::count(std::span<const TokenId> ngram) const {
  if (ngram.empty() || ngram.size() > counts_.size()) return 0;
  const auto& table = counts_[ngram.size() - 1];
  const auto it = table.find(std::vector<TokenId>(ngram.begin(), ngram.end()));
  return it == table.end() ? 0 : it->second;
}

KneserNeyModel kn_train(const std::vector<std::string>& texts, const Vocabulary& vocab,
                        int order, double discount) {
  if (order < 1 || order > KneserNeyModel::kMaxOrder) {
    throw Error(ErrorCode::kBadConfig, "Kneser-Ney order must be in 1..6");
  }
  if (texts.empty()) throw Error(ErrorCode::kEmptyCorpus, "no training texts");
  const auto n = static_cast<size_t>(order);
  std::vector<NgramCounts> counts(n);
  std::vector<TokenId> ids;
  std::vector<TokenId> gram;
  for (const auto& text : texts) {
    ids.assign(n - 1, Vocabulary::kBos);
    const std::vector<TokenId> body = vocab.encode(text);
    ids.insert(ids.end(), body.begin(), body.end());
    ids.push_back(Vocabulary::kEos);
    for (size_t i = n - 1; i < ids.size(); ++i) {
      for (size_t k = 1; k <= n; ++k) {
        gram.assign(ids.begin() + static_cast<std::ptrdiff_t>(i + 1 - k),
                    ids.begin() + static_cast<std::ptrdiff_t>(i + 1));
        ++counts[k - 1][gram];
      }
    }
  }
  return KneserNeyModel(vocab, order, discount, std::move(counts));
}

NextTokenDistribution kn_distribution(const KneserNeyModel& model,
                                      std::span<const TokenId> context) {
  return model.next(context);
}

}  // namespace lexdraft
