#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lexdraft/elements.hpp"

namespace lexdraft {

using TokenId = std::uint32_t;

// One court judgment.
struct VerdictRecord {
  std::string id;
  std::optional<std::chrono::year_month_day> date;
  std::string cause = "fraud";
  std::string raw_text;
  // Empty when no criminal-facts section was found.
  std::string facts;

  bool operator==(const VerdictRecord&) const = default;
};

struct CorpusSplit {
  std::vector<VerdictRecord> train;
  std::vector<VerdictRecord> validation;
  std::vector<VerdictRecord> test;
  std::uint64_t seed = 0;
};

struct ExtractionMarkers {
  std::vector<std::string> headings = {"犯罪事實", "犯罪事實及理由"};
  std::vector<std::string> terminators = {"理　由", "理由", "證據"};
};

struct NormalizeOptions {
  // ECMAScript regexes matched against whole UTF-8 lines (byte-wise, so write
  // multi-byte characters as alternatives, not inside [...]). Matching lines
  // are dropped.
  std::vector<std::string> page_patterns = {
      R"(^\s*第\s*[0-9]+\s*頁\s*((，|,)?\s*共\s*[0-9]+\s*頁)?\s*$)",
      R"(^\s*-\s*[0-9]+\s*-\s*$)",
  };
};

std::string normalize(std::string_view text, const NormalizeOptions& options = {});

// Facts section between the first heading and the next line-level terminator.
// Always a substring of `raw`; "" when no heading is present.
std::string extract_criminal_facts(std::string_view raw,
                                   const ExtractionMarkers& markers = {});

VerdictRecord parse_verdict_file(std::string_view bytes, std::string id,
                                 const ExtractionMarkers& markers = {},
                                 const NormalizeOptions& options = {});

// Last "中華民國 Y 年 M 月 D 日" in the text, converted from the ROC calendar.
std::optional<std::chrono::year_month_day> find_verdict_date(std::string_view text);

std::string format_date(const std::optional<std::chrono::year_month_day>& date);
std::optional<std::chrono::year_month_day> parse_iso_date(std::string_view text);

CorpusSplit split_corpus(std::vector<VerdictRecord> records, std::uint64_t seed);

// Sizes (train, validation, test) produced by split_corpus for n records.
std::tuple<size_t, size_t, size_t> split_sizes(size_t n);

// Sort key used by split_corpus.
std::uint64_t split_key(std::string_view id, std::uint64_t seed);

// Character vocabulary with BOS/EOS/UNK at indices 0/1/2.
class Vocabulary {
 public:
  static constexpr TokenId kBos = 0;
  static constexpr TokenId kEos = 1;
  static constexpr TokenId kUnk = 2;
  static constexpr size_t kNumSpecials = 3;
  static constexpr std::string_view kUnkGlyph = "〈UNK〉";

  Vocabulary() = default;

  // Characters are given in index order starting at kNumSpecials.
  Vocabulary(std::vector<char32_t> chars, std::vector<std::uint64_t> counts);

  size_t size() const { return kNumSpecials + chars_.size(); }

  bool is_special(TokenId id) const { return id < kNumSpecials; }
  std::optional<TokenId> find(char32_t c) const;
  char32_t char_at(TokenId id) const;
  std::uint64_t count(TokenId id) const;
  std::uint64_t count(char32_t c) const;

  // Printable form: the character itself, or <BOS>/<EOS>/<UNK>.
  std::string token_string(TokenId id) const;

  std::vector<TokenId> encode(std::string_view text) const;
  std::vector<TokenId> encode(std::u32string_view text) const;
  // BOS and EOS decode to nothing, UNK to kUnkGlyph. Throws kInvalidId.
  std::string decode(std::span<const TokenId> ids) const;

  // FNV-1a over the ordered token list; counts are not included.
  std::uint64_t hash() const;
  std::string hash_hex() const;

  bool operator==(const Vocabulary& other) const {
    return chars_ == other.chars_ && counts_ == other.counts_;
  }

 private:
  std::vector<char32_t> chars_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<char32_t, TokenId> index_;
};

Vocabulary build_vocabulary(const std::vector<std::string>& texts);

// "LEXVOC1" text format.
std::string serialize_vocabulary(const Vocabulary& vocab);
Vocabulary parse_vocabulary(std::string_view text);
void save_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path);
Vocabulary load_vocabulary(const std::filesystem::path& path);

// Training text of a record: the facts section.
std::vector<std::string> corpus_texts(const std::vector<VerdictRecord>& records);

// JSONL corpus files: one object per line with id, date, cause, raw_text, facts.
std::string record_to_json_line(const VerdictRecord& record);
VerdictRecord record_from_json_line(std::string_view line);
std::vector<VerdictRecord> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::vector<VerdictRecord>& records,
                 const std::filesystem::path& path);

// A directory of .txt verdicts (sorted by file name) or a .jsonl file.
std::vector<VerdictRecord> load_corpus(const std::filesystem::path& path,
                                       const ExtractionMarkers& markers = {});

struct SyntheticSpec {
  size_t n_docs = 1;
  Lexicon lexicon;
  std::uint64_t seed = 0;
};

struct GoldDocument {
  std::string id;
  std::vector<TaggedSpan> spans;
};

struct SyntheticCorpus {
  std::vector<VerdictRecord> records;
  std::vector<GoldDocument> gold;
};

// Template documents: one phrase per element in canonical order, separated by
// connective fillers. Gold spans are the planted phrases.
SyntheticCorpus synthesize_corpus(const SyntheticSpec& spec);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace lexdraft
