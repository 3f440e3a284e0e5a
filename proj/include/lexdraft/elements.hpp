#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lexdraft {

// The six constituent elements of the fraud offence, declared in canonical
// order: subject, subjective element, act, victim, causation, result.
enum class ElementTag { kSoc, kSle, kAct, kVic, kCau, kRoh };

inline constexpr size_t kNumElementTags = 6;

inline constexpr std::array<ElementTag, kNumElementTags> kCanonicalOrder = {
    ElementTag::kSoc, ElementTag::kSle, ElementTag::kAct,
    ElementTag::kVic, ElementTag::kCau, ElementTag::kRoh};

std::string_view tag_name(ElementTag tag);  // "LEO_SOC" ...
std::optional<ElementTag> parse_tag(std::string_view name);
inline size_t tag_rank(ElementTag tag) { return static_cast<size_t>(tag); }

// Pattern syntax (one entry per lexicon line):
//   literal text        matched verbatim
//   …  (or ……)          gap of 0..20 characters, newline excluded
//   {name}              2..4 CJK ideographs, excluding common connectives
//                       (以, 於, 而, 竟 ...) so a name stops before them
//   (a|b|c)             one of the literal alternatives
//   ^ at the start      only at the start of a sentence
//   (?=...) at the end  required right context, not part of the span
class Pattern {
 public:
  static constexpr size_t kMaxGap = 20;

  struct Piece {
    enum class Kind { kLiteral, kAlternatives, kGap, kCjkRun };
    Kind kind = Kind::kLiteral;
    std::vector<std::u32string> options;  // literal (1) or alternatives
    size_t min = 0;
    size_t max = 0;
  };

  // Throws Error(kBadFormat) on empty or malformed patterns.
  static Pattern parse(std::string_view source);

  const std::string& source() const { return source_; }
  bool is_literal() const;
  bool sentence_initial() const { return sentence_initial_; }
  const std::vector<Piece>& body() const { return body_; }
  bool has_lookahead() const { return !lookahead_.empty(); }

  // Length of the longest match starting at `pos`, 0 if none. Matches never
  // have zero length.
  size_t longest_match(std::u32string_view text, size_t pos) const;

 private:
  std::string source_;
  bool sentence_initial_ = false;
  std::vector<Piece> body_;
  std::vector<Piece> lookahead_;
};

struct LexiconEntry {
  ElementTag tag;
  Pattern pattern;
  std::string note;
};

class Lexicon {
 public:
  Lexicon() = default;
  explicit Lexicon(std::vector<LexiconEntry> entries);

  void add(ElementTag tag, std::string_view pattern, std::string note = {});

  const std::vector<LexiconEntry>& entries() const { return entries_; }
  std::vector<const LexiconEntry*> entries_for(ElementTag tag) const;
  size_t count(ElementTag tag) const;
  bool empty() const { return entries_.empty(); }
  bool complete() const;  // every tag has at least one entry

 private:
  std::vector<LexiconEntry> entries_;
};

Lexicon default_lexicon();

// "TAG<TAB>pattern[<TAB>note]" lines; '#' starts a comment line.
Lexicon parse_lexicon(std::string_view text);
std::string serialize_lexicon(const Lexicon& lexicon);
Lexicon load_lexicon(const std::filesystem::path& path);

// Offsets are in Unicode code points, half-open.
struct TaggedSpan {
  size_t start = 0;
  size_t end = 0;
  ElementTag tag = ElementTag::kSoc;
  std::string pattern;

  bool operator==(const TaggedSpan&) const = default;
};

std::vector<TaggedSpan> tag_text(std::u32string_view text, const Lexicon& lexicon);
std::vector<TaggedSpan> tag_text(std::string_view text, const Lexicon& lexicon);

std::vector<ElementTag> first_occurrence_sequence(const std::vector<TaggedSpan>& spans);

struct FormatVerdict {
  bool strict_ok = false;
  bool relaxed_ok = false;
  std::vector<ElementTag> first_occurrence_order;
  std::vector<ElementTag> missing;  // canonical order

  bool operator==(const FormatVerdict&) const = default;
};

FormatVerdict verdict_from_spans(const std::vector<TaggedSpan>& spans);
FormatVerdict validate_format(std::string_view text, const Lexicon& lexicon);

// Replaces every span with "<TAG>". Throws kSpanOutOfRange on bad spans.
std::string annotate(std::string_view text, const std::vector<TaggedSpan>& spans);

// Inverse rendering: a marked string such as "一、<LEO_SOC>能<LEO_SLE>" split
// into its plain text and one zero-width position per marker.
struct MarkedText {
  std::string plain;
  std::vector<std::pair<size_t, ElementTag>> markers;  // code-point offset, tag
};
MarkedText parse_markers(std::string_view marked);

// Replaces the i-th marker of annotate()'s output with span_texts[i].
std::string restore_annotated(std::string_view annotated,
                              const std::vector<std::string>& span_texts);

struct BatchReport {
  size_t n_docs = 0;
  size_t strict_pass = 0;
  size_t relaxed_pass = 0;
  double strict_rate = 0.0;
  double relaxed_rate = 0.0;
  std::array<size_t, kNumElementTags> tag_docs{};  // docs containing each tag
  std::array<double, kNumElementTags> tag_coverage{};
};

BatchReport batch_report(const std::vector<std::string>& texts, const Lexicon& lexicon);

}  // namespace lexdraft
