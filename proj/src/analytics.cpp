#include "lexdraft/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include "lexdraft/error.hpp"
#include "lexdraft/utf8.hpp"

namespace lexdraft {

CorpusSummary corpus_summary(const std::vector<std::string>& texts) {
  if (texts.empty()) throw Error(ErrorCode::kEmptyCorpus, "no documents");
  CorpusSummary summary;
  summary.n_docs = texts.size();
  summary.min_chars = UINT64_MAX;
  std::unordered_set<char32_t> unique;
  for (const auto& text : texts) {
    const std::u32string chars = utf8::decode(text);
    const std::uint64_t n = chars.size();
    summary.total_chars += n;
    summary.min_chars = std::min(summary.min_chars, n);
    summary.max_chars = std::max(summary.max_chars, n);
    unique.insert(chars.begin(), chars.end());
  }
  summary.unique_chars = unique.size();
  summary.mean_chars =
      static_cast<double>(summary.total_chars) / static_cast<double>(summary.n_docs);
  return summary;
}

TfIdfReport tfidf(const std::vector<std::string>& texts, const std::set<int>& gram_sizes,
                  size_t top_n) {
  if (texts.empty()) throw Error(ErrorCode::kEmptyCorpus, "no documents");
  if (top_n == 0) throw Error(ErrorCode::kBadConfig, "top_n must be at least 1");
  if (gram_sizes.empty()) throw Error(ErrorCode::kBadConfig, "no n-gram sizes given");
  for (int n : gram_sizes) {
    if (n < 1 || n > 4) throw Error(ErrorCode::kBadConfig, "n-gram sizes must be in 1..4");
  }

  struct Accum {
    size_t df = 0;
    std::uint64_t total_tf = 0;
    std::uint64_t max_tf_in_doc = 0;
  };
  // Weight tf * idf is monotone in tf within one term, so the maximum over
  // documents is reached at the document with the largest tf.
  std::unordered_map<std::u32string, Accum> terms;
  for (const auto& text : texts) {
    const std::u32string chars = utf8::decode(text);
    std::unordered_map<std::u32string, std::uint64_t> counts;
    for (int n : gram_sizes) {
      const auto len = static_cast<size_t>(n);
      if (chars.size() < len) continue;
      for (size_t i = 0; i + len <= chars.size(); ++i) {
        std::u32string_view gram = std::u32string_view(chars).substr(i, len);
        if (std::any_of(gram.begin(), gram.end(), utf8::is_space)) continue;
        ++counts[std::u32string(gram)];
      }
    }
    for (const auto& [gram, tf] : counts) {
      Accum& a = terms[gram];
      ++a.df;
      a.total_tf += tf;
      a.max_tf_in_doc = std::max(a.max_tf_in_doc, tf);
    }
  }

  TfIdfReport report;
  report.n_docs = texts.size();
  const auto n_docs = static_cast<double>(texts.size());
  report.terms.reserve(terms.size());
  for (const auto& [gram, a] : terms) {
    const double idf = a.df == texts.size() ? 0.0 : std::log(n_docs / static_cast<double>(a.df));
    report.terms.push_back(
        {utf8::encode(gram), a.df, a.total_tf, static_cast<double>(a.max_tf_in_doc) * idf});
  }
  std::sort(report.terms.begin(), report.terms.end(), [](const auto& a, const auto& b) {
    if (a.max_tfidf != b.max_tfidf) return a.max_tfidf > b.max_tfidf;
    return a.term < b.term;
  });
  if (report.terms.size() > top_n) report.terms.resize(top_n);
  return report;
}

std::string format_tfidf_tsv(const TfIdfReport& report) {
  std::string out = "term\tdf\ttotal_tf\tmax_tfidf\n";
  char buf[64];
  for (const auto& t : report.terms) {
    std::snprintf(buf, sizeof buf, "\t%zu\t%llu\t%.6f\n", t.df,
                  static_cast<unsigned long long>(t.total_tf), t.max_tfidf);
    out += t.term;
    out += buf;
  }
  return out;
}

}  // namespace lexdraft
