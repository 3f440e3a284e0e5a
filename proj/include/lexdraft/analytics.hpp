#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace lexdraft {

struct CorpusSummary {
  size_t n_docs = 0;
  std::uint64_t total_chars = 0;
  size_t unique_chars = 0;
  std::uint64_t min_chars = 0;
  double mean_chars = 0.0;
  std::uint64_t max_chars = 0;
};

// Counts are in Unicode code points. Throws kEmptyCorpus on an empty list.
CorpusSummary corpus_summary(const std::vector<std::string>& texts);

struct TermStats {
  std::string term;
  size_t df = 0;
  std::uint64_t total_tf = 0;
  double max_tfidf = 0.0;
};

struct TfIdfReport {
  size_t n_docs = 0;
  std::vector<TermStats> terms;
};

// Character n-gram TF-IDF: weight(t, d) = tf(t, d) * ln(N / df(t)), raw tf.
// N-grams containing whitespace are skipped. Terms are ranked by their maximum
// weight over documents, ties broken by byte order of the term.
TfIdfReport tfidf(const std::vector<std::string>& texts, const std::set<int>& gram_sizes,
                  size_t top_n);

// "term\tdf\ttotal_tf\tmax_tfidf" header plus one row per term.
std::string format_tfidf_tsv(const TfIdfReport& report);

}  // namespace lexdraft
