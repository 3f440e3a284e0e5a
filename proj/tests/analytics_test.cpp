#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "lexdraft/analytics.hpp"
#include "lexdraft/error.hpp"
#include "lexdraft/random.hpp"
#include "lexdraft/utf8.hpp"
#include "support.hpp"

namespace lexdraft {
namespace {

const TermStats* find_term(const TfIdfReport& r, const std::string& term) {
  for (const auto& t : r.terms) {
    if (t.term == term) return &t;
  }
  return nullptr;
}

TEST(Tfidf, TermInEveryDocHasZeroWeight) {
  auto r = tfidf({"ab", "ac"}, {1}, 10);
  const auto* a = find_term(r, "a");
  ASSERT_NE(a, nullptr);
  EXPECT_EQ(a->df, 2u);
  EXPECT_EQ(a->max_tfidf, 0.0);
}

TEST(Tfidf, SingleOccurrenceWeightIsLnTwo) {
  auto r = tfidf({"ab", "ac"}, {1}, 10);
  const auto* b = find_term(r, "b");
  ASSERT_NE(b, nullptr);
  EXPECT_NEAR(b->max_tfidf, 0.693147, 1e-6);
  EXPECT_EQ(r.terms[0].term, "b");
  EXPECT_EQ(r.terms[1].term, "c");
}

TEST(Tfidf, SingleDocumentIsAllZero) {
  auto r = tfidf({"詐欺詐術"}, {1, 2}, 100);
  ASSERT_FALSE(r.terms.empty());
  for (const auto& t : r.terms) EXPECT_EQ(t.max_tfidf, 0.0);
}

TEST(Tfidf, MatchesDirectCountingOracle) {
  SplitMix64 rng(3);
  const std::u32string alphabet = U"詐欺被害人匯款交付";
  std::vector<std::string> docs;
  for (int d = 0; d < 12; ++d) {
    std::u32string s;
    size_t n = 1 + rng.below(15);
    for (size_t i = 0; i < n; ++i) s += alphabet[rng.below(alphabet.size())];
    docs.push_back(utf8::encode(s));
  }
  std::map<std::string, std::vector<int>> tf;
  for (size_t d = 0; d < docs.size(); ++d) {
    auto u = utf8::decode(docs[d]);
    for (size_t n = 1; n <= 2; ++n) {
      for (size_t i = 0; i + n <= u.size(); ++i) {
        auto& row = tf[utf8::encode(std::u32string_view(u).substr(i, n))];
        row.resize(docs.size());
        ++row[d];
      }
    }
  }
  auto r = tfidf(docs, {1, 2}, 100000);
  ASSERT_EQ(r.terms.size(), tf.size());
  for (const auto& [term, row] : tf) {
    int df = 0;
    long total = 0;
    double best = 0.0;
    for (int c : row) {
      df += c > 0;
      total += c;
    }
    for (int c : row) best = std::max(best, c * std::log(double(docs.size()) / df));
    const auto* t = find_term(r, term);
    ASSERT_NE(t, nullptr) << term;
    EXPECT_EQ(t->df, static_cast<size_t>(df));
    EXPECT_EQ(t->total_tf, static_cast<std::uint64_t>(total));
    EXPECT_NEAR(t->max_tfidf, best, 1e-12);
    EXPECT_GE(t->max_tfidf, 0.0);
    EXPECT_EQ(t->max_tfidf == 0.0, static_cast<size_t>(df) == docs.size());
  }
  for (size_t i = 1; i < r.terms.size(); ++i) {
    const auto& a = r.terms[i - 1];
    const auto& b = r.terms[i];
    ASSERT_TRUE(a.max_tfidf > b.max_tfidf || (a.max_tfidf == b.max_tfidf && a.term < b.term));
  }
}

TEST(Tfidf, TopNAndStableTsv) {
  std::vector<std::string> docs = {"被害人交付", "被害人匯款", "詐欺"};
  auto a = format_tfidf_tsv(tfidf(docs, {1, 2}, 3));
  auto b = format_tfidf_tsv(tfidf(docs, {1, 2}, 3));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.substr(0, a.find('\n')), "term\tdf\ttotal_tf\tmax_tfidf");
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 4);
  EXPECT_NE(a.find("\t1.098612\n"), std::string::npos);
}

TEST(Tfidf, WhitespaceGramsSkipped) {
  auto r = tfidf({"a b", "c"}, {1, 2}, 100);
  for (const auto& t : r.terms) EXPECT_EQ(t.term.find(' '), std::string::npos);
}

TEST(Tfidf, Errors) {
  EXPECT_EQ(testing::error_code_of([] { tfidf({}, {1}, 5); }), ErrorCode::kEmptyCorpus);
  EXPECT_EQ(testing::error_code_of([] { tfidf({"a"}, {5}, 5); }), ErrorCode::kBadConfig);
  EXPECT_EQ(testing::error_code_of([] { tfidf({"a"}, {}, 5); }), ErrorCode::kBadConfig);
}

TEST(Summary, CountsCodePoints) {
  auto s = corpus_summary({"詐欺", "被害人交付"});
  EXPECT_EQ(s.n_docs, 2u);
  EXPECT_EQ(s.total_chars, 7u);
  EXPECT_EQ(s.unique_chars, 7u);
  EXPECT_EQ(s.min_chars, 2u);
  EXPECT_EQ(s.max_chars, 5u);
  EXPECT_DOUBLE_EQ(s.mean_chars, 3.5);
}

}  // namespace
}  // namespace lexdraft
