#include "lexdraft/elements.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

#include "lexdraft/corpus.hpp"
#include "lexdraft/error.hpp"
#include "lexdraft/utf8.hpp"

namespace lexdraft {
namespace {

constexpr std::array<std::string_view, kNumElementTags> kTagNames = {
    "LEO_SOC", "LEO_SLE", "LEO_ACT", "LEO_VIC", "LEO_CAU", "LEO_ROH"};

constexpr std::u32string_view kNameStopChars =
    U"以於向並而竟詎之與及在因等後即遂致使將把被為係";

constexpr std::u32string_view kSentenceBreaks = U"\n。；：！？、「（;:!?";

bool is_name_char(char32_t c) {
  return utf8::is_cjk(c) && kNameStopChars.find(c) == std::u32string_view::npos;
}

bool at_sentence_start(std::u32string_view text, size_t pos) {
  return pos == 0 || kSentenceBreaks.find(text[pos - 1]) != std::u32string_view::npos;
}

using Piece = Pattern::Piece;

[[noreturn]] void bad_pattern(std::string_view source, std::string_view why) {
  throw Error(ErrorCode::kBadFormat,
              "bad lexicon pattern '" + std::string(source) + "': " + std::string(why));
}

std::vector<Piece> parse_pieces(std::u32string_view s, std::string_view source) {
  std::vector<Piece> pieces;
  std::u32string literal;
  auto flush = [&] {
    if (!literal.empty()) {
      pieces.push_back({Piece::Kind::kLiteral, {literal}, 0, 0});
      literal.clear();
    }
  };
  size_t i = 0;
  while (i < s.size()) {
    const char32_t c = s[i];
    if (c == U'…') {
      flush();
      while (i < s.size() && s[i] == U'…') ++i;
      pieces.push_back({Piece::Kind::kGap, {}, 0, Pattern::kMaxGap});
      continue;
    }
    if (s.substr(i, 6) == U"{name}") {
      flush();
      pieces.push_back({Piece::Kind::kCjkRun, {}, 2, 4});
      i += 6;
      continue;
    }
    if (c == U'{' || c == U'}') bad_pattern(source, "only {name} slots are supported");
    if (c == U'(') {
      flush();
      const size_t close = s.find(U')', i);
      if (close == std::u32string_view::npos) bad_pattern(source, "unclosed '('");
      Piece alt{Piece::Kind::kAlternatives, {}, 0, 0};
      std::u32string_view inner = s.substr(i + 1, close - i - 1);
      size_t start = 0;
      while (true) {
        const size_t bar = inner.find(U'|', start);
        std::u32string option(inner.substr(start, bar == std::u32string_view::npos
                                                      ? std::u32string_view::npos
                                                      : bar - start));
        if (option.empty()) bad_pattern(source, "empty alternative");
        alt.options.push_back(std::move(option));
        if (bar == std::u32string_view::npos) break;
        start = bar + 1;
      }
      pieces.push_back(std::move(alt));
      i = close + 1;
      continue;
    }
    literal.push_back(c);
    ++i;
  }
  flush();
  return pieces;
}

size_t min_length(const std::vector<Piece>& pieces) {
  size_t total = 0;
  for (const auto& p : pieces) {
    switch (p.kind) {
      case Piece::Kind::kLiteral: total += p.options[0].size(); break;
      case Piece::Kind::kAlternatives: {
        size_t m = SIZE_MAX;
        for (const auto& o : p.options) m = std::min(m, o.size());
        total += m;
        break;
      }
      case Piece::Kind::kGap:
      case Piece::Kind::kCjkRun: total += p.min; break;
    }
  }
  return total;
}

// Calls on_end(end) for every end position at which pieces[idx..] match
// starting from pos. Returning true from on_end stops the search.
bool match_from(const std::vector<Piece>& pieces, size_t idx, std::u32string_view text,
                size_t pos, const std::function<bool(size_t)>& on_end) {
  if (idx == pieces.size()) return on_end(pos);
  const Piece& p = pieces[idx];
  switch (p.kind) {
    case Piece::Kind::kLiteral:
    case Piece::Kind::kAlternatives:
      for (const auto& option : p.options) {
        if (text.substr(pos, option.size()) == option &&
            match_from(pieces, idx + 1, text, pos + option.size(), on_end)) {
          return true;
        }
      }
      return false;
    case Piece::Kind::kGap:
    case Piece::Kind::kCjkRun: {
      const bool gap = p.kind == Piece::Kind::kGap;
      size_t len = 0;
      while (true) {
        if (len >= p.min && match_from(pieces, idx + 1, text, pos + len, on_end)) {
          return true;
        }
        if (len == p.max || pos + len >= text.size()) return false;
        const char32_t c = text[pos + len];
        if (gap ? c == U'\n' : !is_name_char(c)) return false;
        ++len;
      }
    }
  }
  return false;
}

}  // namespace

std::string_view tag_name(ElementTag tag) { return kTagNames[tag_rank(tag)]; }

std::optional<ElementTag> parse_tag(std::string_view name) {
  for (size_t i = 0; i < kNumElementTags; ++i) {
    if (kTagNames[i] == name) return static_cast<ElementTag>(i);
  }
  return std::nullopt;
}

Pattern Pattern::parse(std::string_view source) {
  Pattern pattern;
  pattern.source_ = std::string(source);
  std::u32string s;
  try {
    s = utf8::decode(source);
  } catch (const Error&) {
    bad_pattern(source, "not UTF-8");
  }
  std::u32string_view view = s;
  if (!view.empty() && view.front() == U'^') {
    pattern.sentence_initial_ = true;
    view.remove_prefix(1);
  }
  if (!view.empty() && view.back() == U')') {
    const size_t at = view.rfind(U"(?=");
    if (at != std::u32string_view::npos) {
      std::u32string_view inner = view.substr(at + 3, view.size() - at - 4);
      // "(?=(a|b))" nests one alternative group.
      int depth = 0;
      bool balanced = true;
      for (char32_t c : inner) {
        if (c == U'(') ++depth;
        if (c == U')' && --depth < 0) balanced = false;
      }
      if (balanced && depth == 0) {
        pattern.lookahead_ = parse_pieces(inner, source);
        if (pattern.lookahead_.empty()) bad_pattern(source, "empty lookahead");
        view = view.substr(0, at);
      }
    }
  }
  if (view.empty()) bad_pattern(source, "empty pattern");
  pattern.body_ = parse_pieces(view, source);
  if (min_length(pattern.body_) == 0) bad_pattern(source, "pattern can match nothing");
  return pattern;
}

bool Pattern::is_literal() const {
  return !sentence_initial_ && lookahead_.empty() && body_.size() == 1 &&
         body_[0].kind == Piece::Kind::kLiteral;
}

size_t Pattern::longest_match(std::u32string_view text, size_t pos) const {
  if (pos >= text.size()) return 0;
  if (sentence_initial_ && !at_sentence_start(text, pos)) return 0;
  size_t best = 0;
  match_from(body_, 0, text, pos, [&](size_t end) {
    if (end > pos + best) {
      const bool context_ok =
          lookahead_.empty() ||
          match_from(lookahead_, 0, text, end, [](size_t) { return true; });
      if (context_ok) best = end - pos;
    }
    return false;
  });
  return best;
}

Lexicon::Lexicon(std::vector<LexiconEntry> entries) : entries_(std::move(entries)) {}

void Lexicon::add(ElementTag tag, std::string_view pattern, std::string note) {
  entries_.push_back({tag, Pattern::parse(pattern), std::move(note)});
}

std::vector<const LexiconEntry*> Lexicon::entries_for(ElementTag tag) const {
  std::vector<const LexiconEntry*> out;
  for (const auto& e : entries_) {
    if (e.tag == tag) out.push_back(&e);
  }
  return out;
}

size_t Lexicon::count(ElementTag tag) const {
  return static_cast<size_t>(std::count_if(
      entries_.begin(), entries_.end(), [&](const auto& e) { return e.tag == tag; }));
}

bool Lexicon::complete() const {
  return std::all_of(kCanonicalOrder.begin(), kCanonicalOrder.end(),
                     [&](ElementTag t) { return count(t) > 0; });
}

Lexicon default_lexicon() {
  static constexpr std::string_view kDefault =
      "# Built-in fraud lexicon. Columns: tag, pattern, note.\n"
      "LEO_SOC\t^{name}(?=(能|明知|與))\tsentence-initial named subject\n"
      "LEO_SOC\t詐騙集團成員\tcrime-ring member\n"
      "LEO_SOC\t不詳年籍之人\tunidentified person\n"
      "LEO_SOC\t該不詳年籍人士\tunidentified person (anaphoric)\n"
      "LEO_SLE\t意圖為自己或第三人不法之所有\tstatutory intent clause\n"
      "LEO_SLE\t意圖為自己不法之所有\tintent clause as written in judgments\n"
      "LEO_SLE\t意圖為自己不法所有\tintent clause, short form\n"
      "LEO_SLE\t明知\tknowledge\n"
      "LEO_SLE\t預見\tforeseeability\n"
      "LEO_SLE\t基於幫助他人從事不法行為之犯意\taiding intent\n"
      "LEO_SLE\t基於…之犯意\tgeneric criminal intent\n"
      "LEO_SLE\t不違其本意\tindirect intent\n"
      "LEO_ACT\t詐術\tstatutory act\n"
      "LEO_ACT\t詐騙手法\tfraud scheme\n"
      "LEO_ACT\t假冒…謊稱\timpersonation\n"
      "LEO_ACT\t撥打電話向\tphone contact\n"
      "LEO_ACT\t交付予他人\thanding an account to others\n"
      "LEO_ACT\t提供與\tproviding to another\n"
      "LEO_VIC\t被害人{name}\tnamed victim\n"
      "LEO_VIC\t本人或第三人\tstatutory object\n"
      "LEO_CAU\t陷於錯誤\tmistaken belief\n"
      "LEO_CAU\t誤以為真\tmistaken as true\n"
      "LEO_CAU\t誤信為真\tmistaken to be true\n"
      "LEO_CAU\t使人\tstatutory causal link\n"
      "LEO_ROH\t交付\tdelivery\n"
      "LEO_ROH\t匯出款項\tremittance\n"
      "LEO_ROH\t將…之物交付\tstatutory delivery of property\n";
  return parse_lexicon(kDefault);
}

Lexicon parse_lexicon(std::string_view text) {
  Lexicon lexicon;
  size_t line_no = 0;
  size_t start = 0;
  while (start <= text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    ++line_no;
    start = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') {
      if (end == text.size()) break;
      continue;
    }
    const size_t tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw Error(ErrorCode::kBadFormat,
                  "lexicon line " + std::to_string(line_no) + ": expected TAG<TAB>pattern");
    }
    const auto tag = parse_tag(line.substr(0, tab));
    if (!tag) {
      throw Error(ErrorCode::kBadFormat, "lexicon line " + std::to_string(line_no) +
                                             ": unknown tag '" +
                                             std::string(line.substr(0, tab)) + "'");
    }
    std::string_view rest = line.substr(tab + 1);
    std::string note;
    if (const size_t tab2 = rest.find('\t'); tab2 != std::string_view::npos) {
      note = std::string(rest.substr(tab2 + 1));
      rest = rest.substr(0, tab2);
    }
    lexicon.add(*tag, rest, std::move(note));
    if (end == text.size()) break;
  }
  return lexicon;
}

std::string serialize_lexicon(const Lexicon& lexicon) {
  std::string out = "# tag\tpattern\tnote\n";
  for (const auto& e : lexicon.entries()) {
    out += tag_name(e.tag);
    out += '\t';
    out += e.pattern.source();
    if (!e.note.empty()) {
      out += '\t';
      out += e.note;
    }
    out += '\n';
  }
  return out;
}

Lexicon load_lexicon(const std::filesystem::path& path) {
  return parse_lexicon(read_file(path));
}

std::vector<TaggedSpan> tag_text(std::u32string_view text, const Lexicon& lexicon) {
  std::vector<TaggedSpan> spans;
  size_t pos = 0;
  while (pos < text.size()) {
    const LexiconEntry* best = nullptr;
    size_t best_len = 0;
    for (const auto& entry : lexicon.entries()) {
      const size_t len = entry.pattern.longest_match(text, pos);
      if (len == 0) continue;
      bool better = best == nullptr || len > best_len;
      if (!better && len == best_len) {
        if (tag_rank(entry.tag) != tag_rank(best->tag)) {
          better = tag_rank(entry.tag) < tag_rank(best->tag);
        } else {
          better = entry.pattern.source() < best->pattern.source();
        }
      }
      if (better) {
        best = &entry;
        best_len = len;
      }
    }
    if (best == nullptr) {
      ++pos;
      continue;
    }
    spans.push_back({pos, pos + best_len, best->tag, best->pattern.source()});
    pos += best_len;
  }
  return spans;
}

std::vector<TaggedSpan> tag_text(std::string_view text, const Lexicon& lexicon) {
  return tag_text(std::u32string_view(utf8::decode(text)), lexicon);
}

std::vector<ElementTag> first_occurrence_sequence(const std::vector<TaggedSpan>& spans) {
  std::vector<ElementTag> order;
  std::array<bool, kNumElementTags> seen{};
  for (const auto& span : spans) {
    if (!seen[tag_rank(span.tag)]) {
      seen[tag_rank(span.tag)] = true;
      order.push_back(span.tag);
    }
  }
  return order;
}

FormatVerdict verdict_from_spans(const std::vector<TaggedSpan>& spans) {
  FormatVerdict verdict;
  verdict.first_occurrence_order = first_occurrence_sequence(spans);
  for (ElementTag tag : kCanonicalOrder) {
    if (std::find(verdict.first_occurrence_order.begin(),
                  verdict.first_occurrence_order.end(),
                  tag) == verdict.first_occurrence_order.end()) {
      verdict.missing.push_back(tag);
    }
  }
  verdict.relaxed_ok = verdict.missing.empty();
  verdict.strict_ok =
      verdict.relaxed_ok &&
      std::equal(verdict.first_occurrence_order.begin(),
                 verdict.first_occurrence_order.end(), kCanonicalOrder.begin());
  return verdict;
}

FormatVerdict validate_format(std::string_view text, const Lexicon& lexicon) {
  return verdict_from_spans(tag_text(text, lexicon));
}

std::string annotate(std::string_view text, const std::vector<TaggedSpan>& spans) {
  const std::u32string chars = utf8::decode(text);
  std::string out;
  size_t pos = 0;
  for (const auto& span : spans) {
    if (span.start < pos || span.start >= span.end || span.end > chars.size()) {
      throw Error(ErrorCode::kSpanOutOfRange,
                  "span [" + std::to_string(span.start) + ", " + std::to_string(span.end) +
                      ") invalid for text of length " + std::to_string(chars.size()));
    }
    out += utf8::encode(std::u32string_view(chars).substr(pos, span.start - pos));
    out += '<';
    out += tag_name(span.tag);
    out += '>';
    pos = span.end;
  }
  out += utf8::encode(std::u32string_view(chars).substr(pos));
  return out;
}

MarkedText parse_markers(std::string_view marked) {
  MarkedText result;
  std::u32string plain;
  const std::u32string chars = utf8::decode(marked);
  size_t i = 0;
  while (i < chars.size()) {
    if (chars[i] == U'<') {
      const size_t close = chars.find(U'>', i);
      if (close != std::u32string::npos) {
        const auto tag = parse_tag(utf8::encode(std::u32string_view(chars).substr(
            i + 1, close - i - 1)));
        if (tag) {
          result.markers.emplace_back(plain.size(), *tag);
          i = close + 1;
          continue;
        }
      }
    }
    plain.push_back(chars[i]);
    ++i;
  }
  result.plain = utf8::encode(plain);
  return result;
}

std::string restore_annotated(std::string_view annotated,
                              const std::vector<std::string>& span_texts) {
  std::string out;
  size_t next = 0;
  size_t pos = 0;
  while (pos < annotated.size()) {
    bool replaced = false;
    if (annotated[pos] == '<' && next < span_texts.size()) {
      const size_t close = annotated.find('>', pos);
      if (close != std::string_view::npos &&
          parse_tag(annotated.substr(pos + 1, close - pos - 1))) {
        out += span_texts[next++];
        pos = close + 1;
        replaced = true;
      }
    }
    if (!replaced) out += annotated[pos++];
  }
  return out;
}

BatchReport batch_report(const std::vector<std::string>& texts, const Lexicon& lexicon) {
  BatchReport report;
  report.n_docs = texts.size();
  for (const auto& text : texts) {
    const FormatVerdict v = validate_format(text, lexicon);
    report.strict_pass += v.strict_ok ? 1 : 0;
    report.relaxed_pass += v.relaxed_ok ? 1 : 0;
    for (ElementTag tag : v.first_occurrence_order) ++report.tag_docs[tag_rank(tag)];
  }
  if (report.n_docs > 0) {
    const auto n = static_cast<double>(report.n_docs);
    report.strict_rate = static_cast<double>(report.strict_pass) / n;
    report.relaxed_rate = static_cast<double>(report.relaxed_pass) / n;
    for (size_t t = 0; t < kNumElementTags; ++t) {
      report.tag_coverage[t] = static_cast<double>(report.tag_docs[t]) / n;
    }
  }
  return report;
}

}  // namespace lexdraft
