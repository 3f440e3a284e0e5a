#pragma once

#include <cstdint>
#include <map>
#include <unordered_map>
#include <vector>

#include "lexdraft/langmodel.hpp"

namespace lexdraft {

struct NgramHash {
  size_t operator()(const std::vector<TokenId>& key) const {
    std::uint64_t h = 14695981039346656037ULL;
    for (TokenId id : key) {
      h ^= id;
      h *= 1099511628211ULL;
    }
    return static_cast<size_t>(h);
  }
};

using NgramCounts = std::unordered_map<std::vector<TokenId>, std::uint64_t, NgramHash>;

// Interpolated Kneser-Ney character model. The highest order uses raw counts,
// lower orders use continuation counts, and the recursion bottoms out in a
// uniform distribution over the vocabulary.
class KneserNeyModel final : public LanguageModel {
 public:
  static constexpr int kMaxOrder = 6;

  // counts[k-1] holds the raw k-gram counts, k = 1..order.
  KneserNeyModel(Vocabulary vocab, int order, double discount,
                 std::vector<NgramCounts> counts);

  std::string_view kind() const override { return "kneser-ney"; }
  const Vocabulary& vocabulary() const override { return vocab_; }
  NextTokenDistribution next(std::span<const TokenId> context) const override;

  int order() const { return order_; }
  double discount() const { return discount_; }
  std::uint64_t count(std::span<const TokenId> ngram) const;
  const std::vector<NgramCounts>& counts() const { return counts_; }

 private:
  struct ContextStats {
    std::uint64_t total = 0;
    std::vector<std::pair<TokenId, std::uint64_t>> followers;  // sorted by id
  };
  using Level = std::unordered_map<std::vector<TokenId>, ContextStats, NgramHash>;

  Vocabulary vocab_;
  int order_;
  double discount_;
  std::vector<NgramCounts> counts_;
  std::vector<Level> levels_;  // levels_[k-1]: contexts of length k-1
};

// Each text is wrapped as BOS^(order-1) text EOS; every k-gram ending on a
// real token or EOS is counted once.
KneserNeyModel kn_train(const std::vector<std::string>& texts, const Vocabulary& vocab,
                        int order = 5, double discount = 0.75);

NextTokenDistribution kn_distribution(const KneserNeyModel& model,
                                      std::span<const TokenId> context);

}  // namespace lexdraft
