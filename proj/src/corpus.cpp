#include "lexdraft/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "lexdraft/error.hpp"
#include "lexdraft/random.hpp"
#include "lexdraft/utf8.hpp"

namespace lexdraft {
namespace {

using json = nlohmann::json;

bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_ascii_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_ascii_space(s.back())) s.remove_suffix(1);
  return s;
}

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

// Value of a run of ASCII digits or Chinese numerals (一百零三, 二十一 ...).
std::optional<int> parse_number(std::u32string_view s) {
  if (s.empty()) return std::nullopt;
  if (std::all_of(s.begin(), s.end(), [](char32_t c) { return c >= U'0' && c <= U'9'; })) {
    if (s.size() > 6) return std::nullopt;
    int v = 0;
    for (char32_t c : s) v = v * 10 + static_cast<int>(c - U'0');
    return v;
  }
  static constexpr std::u32string_view kDigits = U"〇一二三四五六七八九";
  int total = 0;
  int current = 0;
  bool have_digit = false;
  for (char32_t c : s) {
    if (c == U'零') c = U'〇';
    const size_t d = kDigits.find(c);
    if (d != std::u32string_view::npos) {
      current = current * 10 + static_cast<int>(d);
      have_digit = true;
    } else if (c == U'十' || c == U'百') {
      total += (have_digit ? current : 1) * (c == U'十' ? 10 : 100);
      current = 0;
      have_digit = false;
    } else {
      return std::nullopt;
    }
  }
  return total + current;
}

bool is_number_char(char32_t c) {
  return (c >= U'0' && c <= U'9') ||
         std::u32string_view(U"〇零一二三四五六七八九十百").find(c) != std::u32string_view::npos;
}

std::string escape_token(char32_t c) {
  switch (c) {
    case U'\\': return "\\\\";
    case U'\n': return "\\n";
    case U'\t': return "\\t";
    case U'\r': return "\\r";
    default: return utf8::encode(c);
  }
}

std::optional<char32_t> unescape_token(std::string_view s) {
  if (s == "\\\\") return U'\\';
  if (s == "\\n") return U'\n';
  if (s == "\\t") return U'\t';
  if (s == "\\r") return U'\r';
  const std::u32string chars = utf8::decode(s);
  if (chars.size() != 1) return std::nullopt;
  return chars[0];
}

}  // namespace

std::string normalize(std::string_view text, const NormalizeOptions& options) {
  const std::u32string chars = utf8::decode(text);
  std::u32string unified;
  unified.reserve(chars.size());
  for (size_t i = 0; i < chars.size(); ++i) {
    char32_t c = chars[i];
    if (c == U'\r') {
      if (i + 1 < chars.size() && chars[i + 1] == U'\n') ++i;
      c = U'\n';
    } else if (c == 0x3000 || c == U'\t') {
      c = U' ';
    }
    if (c == U' ' && !unified.empty() && unified.back() == U' ') continue;
    unified.push_back(c);
  }

  std::vector<std::regex> page_res;
  page_res.reserve(options.page_patterns.size());
  for (const auto& p : options.page_patterns) page_res.emplace_back(p);

  const std::string joined = utf8::encode(unified);
  std::string out;
  out.reserve(joined.size());
  size_t start = 0;
  while (start <= joined.size()) {
    size_t end = joined.find('\n', start);
    const bool last = end == std::string::npos;
    if (last) end = joined.size();
    const std::string line = joined.substr(start, end - start);
    const bool drop = !trim(line).empty() &&
                      std::any_of(page_res.begin(), page_res.end(), [&](const auto& re) {
                        return std::regex_match(line, re);
                      });
    if (!drop) {
      out += line;
      if (!last) out += '\n';
    }
    if (last) break;
    start = end + 1;
  }
  return out;
}

namespace {

// Each marker as written and in normalized form, so both raw and normalized
// documents match.
std::vector<std::string> marker_forms(const std::vector<std::string>& markers) {
  std::vector<std::string> out;
  for (const auto& m : markers) {
    for (std::string form : {m, normalize(m)}) {
      if (!form.empty() && std::find(out.begin(), out.end(), form) == out.end()) {
        out.push_back(std::move(form));
      }
    }
  }
  return out;
}

}  // namespace

std::string extract_criminal_facts(std::string_view raw, const ExtractionMarkers& markers) {
  size_t heading_at = std::string_view::npos;
  size_t heading_len = 0;
  for (const auto& marker : marker_forms(markers.headings)) {
    const size_t at = raw.find(marker);
    if (at == std::string_view::npos) continue;
    if (at < heading_at || (at == heading_at && marker.size() > heading_len)) {
      heading_at = at;
      heading_len = marker.size();
    }
  }
  if (heading_at == std::string_view::npos) return "";

  const std::vector<std::string> terminators = marker_forms(markers.terminators);

  const size_t begin = heading_at + heading_len;
  size_t end = raw.size();
  size_t line = raw.find('\n', begin);
  while (line != std::string_view::npos) {
    const size_t line_start = line + 1;
    std::string_view rest = raw.substr(line_start);
    size_t skip = 0;
    while (skip < rest.size() && (rest[skip] == ' ' || rest[skip] == '\t')) ++skip;
    rest.remove_prefix(skip);
    if (std::any_of(terminators.begin(), terminators.end(),
                    [&](const std::string& t) { return starts_with(rest, t); })) {
      end = line_start;
      break;
    }
    line = raw.find('\n', line_start);
  }
  return std::string(trim(raw.substr(begin, end - begin)));
}

std::optional<std::chrono::year_month_day> find_verdict_date(std::string_view text) {
  const std::u32string chars = utf8::decode(text);
  static constexpr std::u32string_view kEra = U"中華民國";
  std::optional<std::chrono::year_month_day> found;
  size_t at = chars.find(kEra);
  while (at != std::u32string::npos) {
    size_t i = at + kEra.size();
    int parts[3] = {0, 0, 0};
    bool ok = true;
    static constexpr char32_t kUnits[3] = {U'年', U'月', U'日'};
    for (int k = 0; k < 3 && ok; ++k) {
      while (i < chars.size() && chars[i] == U' ') ++i;
      const size_t num_start = i;
      while (i < chars.size() && is_number_char(chars[i])) ++i;
      const auto value =
          parse_number(std::u32string_view(chars).substr(num_start, i - num_start));
      while (i < chars.size() && chars[i] == U' ') ++i;
      if (!value || i >= chars.size() || chars[i] != kUnits[k]) {
        ok = false;
        break;
      }
      parts[k] = *value;
      ++i;
    }
    if (ok) {
      const std::chrono::year_month_day ymd{
          std::chrono::year{parts[0] + 1911},
          std::chrono::month{static_cast<unsigned>(parts[1])},
          std::chrono::day{static_cast<unsigned>(parts[2])}};
      if (ymd.ok()) found = ymd;
    }
    at = chars.find(kEra, at + 1);
  }
  return found;
}

std::string format_date(const std::optional<std::chrono::year_month_day>& date) {
  if (!date) return "";
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date->year()),
                static_cast<unsigned>(date->month()), static_cast<unsigned>(date->day()));
  return buf;
}

std::optional<std::chrono::year_month_day> parse_iso_date(std::string_view text) {
  if (text.empty()) return std::nullopt;
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  char tail = 0;
  const std::string s(text);
  if (std::sscanf(s.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3 || s.size() != 10) {
    throw Error(ErrorCode::kBadFormat, "bad ISO-8601 date '" + s + "'");
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                        std::chrono::day{d}};
  if (!ymd.ok()) throw Error(ErrorCode::kBadFormat, "invalid date '" + s + "'");
  return ymd;
}

VerdictRecord parse_verdict_file(std::string_view bytes, std::string id,
                                 const ExtractionMarkers& markers,
                                 const NormalizeOptions& options) {
  if (starts_with(bytes, "\xEF\xBB\xBF")) bytes.remove_prefix(3);
  if (!utf8::is_valid(bytes)) {
    throw Error(ErrorCode::kInvalidEncoding, "verdict '" + id + "' is not valid UTF-8");
  }
  VerdictRecord record;
  record.id = std::move(id);
  record.raw_text = normalize(bytes, options);
  if (trim(record.raw_text).empty()) {
    throw Error(ErrorCode::kEmptyDocument, "verdict '" + record.id + "' is empty");
  }
  record.facts = extract_criminal_facts(record.raw_text, markers);
  record.date = find_verdict_date(record.raw_text);
  return record;
}

std::tuple<size_t, size_t, size_t> split_sizes(size_t n) {
  const size_t train = n * 8 / 10;
  const size_t validation = n / 10;
  return {train, validation, n - train - validation};
}

std::uint64_t split_key(std::string_view id, std::uint64_t seed) {
  return SplitMix64::mix(seed ^ fnv1a64(id));
}

CorpusSplit split_corpus(std::vector<VerdictRecord> records, std::uint64_t seed) {
  std::unordered_set<std::string_view> ids;
  for (const auto& r : records) {
    if (!ids.insert(r.id).second) {
      throw Error(ErrorCode::kDuplicateId, "duplicate record id '" + r.id + "'");
    }
  }
  std::vector<std::pair<std::uint64_t, size_t>> order;
  order.reserve(records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    order.emplace_back(split_key(records[i].id, seed), i);
  }
  std::sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return records[a.second].id < records[b.second].id;
  });

  const auto [n_train, n_val, n_test] = split_sizes(records.size());
  CorpusSplit split;
  split.seed = seed;
  split.train.reserve(n_train);
  split.validation.reserve(n_val);
  split.test.reserve(n_test);
  for (size_t rank = 0; rank < order.size(); ++rank) {
    VerdictRecord& r = records[order[rank].second];
    if (rank < n_train) {
      split.train.push_back(std::move(r));
    } else if (rank < n_train + n_val) {
      split.validation.push_back(std::move(r));
    } else {
      split.test.push_back(std::move(r));
    }
  }
  return split;
}

Vocabulary::Vocabulary(std::vector<char32_t> chars, std::vector<std::uint64_t> counts)
    : chars_(std::move(chars)), counts_(std::move(counts)) {
  if (counts_.size() != chars_.size()) {
    throw Error(ErrorCode::kBadFormat, "vocabulary counts do not match characters");
  }
  for (size_t i = 0; i < chars_.size(); ++i) {
    if (!index_.emplace(chars_[i], static_cast<TokenId>(kNumSpecials + i)).second) {
      throw Error(ErrorCode::kBadFormat, "duplicate vocabulary character");
    }
  }
}

std::optional<TokenId> Vocabulary::find(char32_t c) const {
  const auto it = index_.find(c);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

char32_t Vocabulary::char_at(TokenId id) const {
  if (id < kNumSpecials || id >= size()) {
    throw Error(ErrorCode::kInvalidId, "token id " + std::to_string(id) + " has no character");
  }
  return chars_[id - kNumSpecials];
}

std::uint64_t Vocabulary::count(TokenId id) const {
  if (id >= size()) throw Error(ErrorCode::kInvalidId, "token id out of range");
  return id < kNumSpecials ? 0 : counts_[id - kNumSpecials];
}

std::uint64_t Vocabulary::count(char32_t c) const {
  const auto id = find(c);
  return id ? counts_[*id - kNumSpecials] : 0;
}

std::string Vocabulary::token_string(TokenId id) const {
  switch (id) {
    case kBos: return "<BOS>";
    case kEos: return "<EOS>";
    case kUnk: return "<UNK>";
    default: return utf8::encode(char_at(id));
  }
}

std::vector<TokenId> Vocabulary::encode(std::u32string_view text) const {
  std::vector<TokenId> ids;
  ids.reserve(text.size());
  for (char32_t c : text) {
    const auto id = find(c);
    ids.push_back(id ? *id : kUnk);
  }
  return ids;
}

std::vector<TokenId> Vocabulary::encode(std::string_view text) const {
  return encode(std::u32string_view(utf8::decode(text)));
}

std::string Vocabulary::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (id >= size()) {
      throw Error(ErrorCode::kInvalidId, "token id " + std::to_string(id) + " out of range");
    }
    if (id == kUnk) {
      out += kUnkGlyph;
    } else if (id >= kNumSpecials) {
      out += utf8::encode(chars_[id - kNumSpecials]);
    }
  }
  return out;
}

std::uint64_t Vocabulary::hash() const {
  return fnv1a64(utf8::encode(std::u32string_view(chars_.data(), chars_.size())));
}

std::string Vocabulary::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
  return buf;
}

Vocabulary build_vocabulary(const std::vector<std::string>& texts) {
  std::vector<char32_t> chars;
  std::vector<std::uint64_t> counts;
  std::unordered_map<char32_t, size_t> seen;
  for (const auto& text : texts) {
    for (char32_t c : utf8::decode(text)) {
      const auto [it, inserted] = seen.emplace(c, chars.size());
      if (inserted) {
        chars.push_back(c);
        counts.push_back(0);
      }
      ++counts[it->second];
    }
  }
  if (chars.empty()) throw Error(ErrorCode::kEmptyCorpus, "corpus has no characters");
  return Vocabulary(std::move(chars), std::move(counts));
}

std::string serialize_vocabulary(const Vocabulary& vocab) {
  std::string out = "LEXVOC1\n";
  for (TokenId id = 0; id < vocab.size(); ++id) {
    out += std::to_string(id);
    out += '\t';
    out += vocab.is_special(id) ? vocab.token_string(id) : escape_token(vocab.char_at(id));
    out += '\t';
    out += std::to_string(vocab.count(id));
    out += '\n';
  }
  return out;
}

Vocabulary parse_vocabulary(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != "LEXVOC1") {
    throw Error(ErrorCode::kBadFormat, "vocabulary file must start with LEXVOC1");
  }
  std::vector<char32_t> chars;
  std::vector<std::uint64_t> counts;
  TokenId expected = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const size_t t1 = line.find('\t');
    const size_t t2 = line.rfind('\t');
    if (t1 == std::string::npos || t2 == t1) {
      throw Error(ErrorCode::kBadFormat, "bad vocabulary line '" + line + "'");
    }
    const std::string index = line.substr(0, t1);
    const std::string token = line.substr(t1 + 1, t2 - t1 - 1);
    const std::string count = line.substr(t2 + 1);
    if (index != std::to_string(expected)) {
      throw Error(ErrorCode::kBadFormat, "vocabulary index out of order at '" + line + "'");
    }
    if (expected < Vocabulary::kNumSpecials) {
      static constexpr std::string_view kSpecials[] = {"<BOS>", "<EOS>", "<UNK>"};
      if (token != kSpecials[expected]) {
        throw Error(ErrorCode::kBadFormat, "expected special token " +
                                               std::string(kSpecials[expected]));
      }
    } else {
      const auto c = unescape_token(token);
      if (!c) throw Error(ErrorCode::kBadFormat, "bad vocabulary token '" + token + "'");
      chars.push_back(*c);
      try {
        counts.push_back(std::stoull(count));
      } catch (const std::exception&) {
        throw Error(ErrorCode::kBadFormat, "bad vocabulary count '" + count + "'");
      }
    }
    ++expected;
  }
  if (expected < Vocabulary::kNumSpecials) {
    throw Error(ErrorCode::kBadFormat, "vocabulary is missing special tokens");
  }
  return Vocabulary(std::move(chars), std::move(counts));
}

void save_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path) {
  write_file(path, serialize_vocabulary(vocab));
}

Vocabulary load_vocabulary(const std::filesystem::path& path) {
  return parse_vocabulary(read_file(path));
}

std::vector<std::string> corpus_texts(const std::vector<VerdictRecord>& records) {
  std::vector<std::string> texts;
  texts.reserve(records.size());
  for (const auto& r : records) {
    if (!r.facts.empty()) texts.push_back(r.facts);
  }
  return texts;
}

std::string record_to_json_line(const VerdictRecord& record) {
  const json j = {{"id", record.id},
                  {"date", format_date(record.date)},
                  {"cause", record.cause},
                  {"raw_text", record.raw_text},
                  {"facts", record.facts}};
  return j.dump();
}

VerdictRecord record_from_json_line(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kBadFormat, std::string("bad JSONL record: ") + e.what());
  }
  auto field = [&](const char* name, bool required) -> std::string {
    if (!j.contains(name)) {
      if (required) throw Error(ErrorCode::kBadFormat, std::string("record lacks '") + name + "'");
      return "";
    }
    if (!j[name].is_string()) {
      throw Error(ErrorCode::kBadFormat, std::string("record field '") + name + "' is not a string");
    }
    return j[name].get<std::string>();
  };
  VerdictRecord r;
  r.id = field("id", true);
  if (r.id.empty()) throw Error(ErrorCode::kBadFormat, "record id is empty");
  r.date = parse_iso_date(field("date", false));
  r.cause = field("cause", false);
  if (r.cause.empty()) r.cause = "fraud";
  r.raw_text = field("raw_text", true);
  if (r.raw_text.empty()) {
    throw Error(ErrorCode::kEmptyDocument, "record '" + r.id + "' has empty raw_text");
  }
  r.facts = field("facts", false);
  return r;
}

std::vector<VerdictRecord> read_jsonl(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::vector<VerdictRecord> records;
  size_t start = 0;
  while (start < text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + start, end - start);
    if (!trim(line).empty()) records.push_back(record_from_json_line(line));
    start = end + 1;
  }
  return records;
}

void write_jsonl(const std::vector<VerdictRecord>& records, const std::filesystem::path& path) {
  std::string out;
  for (const auto& r : records) {
    out += record_to_json_line(r);
    out += '\n';
  }
  write_file(path, out);
}

std::vector<VerdictRecord> load_corpus(const std::filesystem::path& path,
                                       const ExtractionMarkers& markers) {
  namespace fs = std::filesystem;
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".txt") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    std::vector<VerdictRecord> records;
    records.reserve(files.size());
    for (const auto& f : files) {
      records.push_back(parse_verdict_file(read_file(f), f.stem().string(), markers));
    }
    return records;
  }
  if (path.extension() == ".txt") {
    return {parse_verdict_file(read_file(path), path.stem().string(), markers)};
  }
  return read_jsonl(path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

}  // namespace lexdraft
