#include <algorithm>
#include <array>
#include <string>

#include "lexdraft/corpus.hpp"
#include "lexdraft/error.hpp"
#include "lexdraft/random.hpp"
#include "lexdraft/utf8.hpp"

namespace lexdraft {
namespace {

constexpr std::u32string_view kSurnames = U"王李張陳林黃吳劉蔡楊許鄭謝郭洪曾邱廖賴周";
constexpr std::u32string_view kGivenChars = U"志明雅婷家豪淑芬建宏俊傑美玲文華國強秀英麗娟宗翰";
constexpr std::array<std::u32string_view, 3> kGapFillers = {U"好友", U"親友", U"專員"};
constexpr std::array<std::u32string_view, 4> kConnectives = {U"，竟", U"，詎", U"，而", U"，於"};

// Entries whose match does not depend on surrounding text.
bool plantable(const LexiconEntry& entry) {
  return !entry.pattern.sentence_initial() && !entry.pattern.has_lookahead();
}

template <typename Seq>
const auto& pick(const Seq& seq, SplitMix64& rng) {
  return seq[rng.below(seq.size())];
}

std::u32string instantiate(const Pattern& pattern, SplitMix64& rng) {
  std::u32string out;
  for (const auto& piece : pattern.body()) {
    switch (piece.kind) {
      case Pattern::Piece::Kind::kLiteral:
        out += piece.options[0];
        break;
      case Pattern::Piece::Kind::kAlternatives:
        out += pick(piece.options, rng);
        break;
      case Pattern::Piece::Kind::kGap:
        out += pick(kGapFillers, rng);
        break;
      case Pattern::Piece::Kind::kCjkRun: {
        out.push_back(pick(kSurnames, rng));
        const size_t given = 1 + rng.below(2);
        for (size_t i = 0; i < given; ++i) out.push_back(pick(kGivenChars, rng));
        break;
      }
    }
  }
  return out;
}

std::u32string date_filler(SplitMix64& rng) {
  const int year = 100 + static_cast<int>(rng.below(11));
  const int month = 1 + static_cast<int>(rng.below(12));
  const int day = 1 + static_cast<int>(rng.below(28));
  const std::string s = "，於民國" + std::to_string(year) + "年" + std::to_string(month) +
                        "月" + std::to_string(day) + "日，";
  return utf8::decode(s);
}

}  // namespace

SyntheticCorpus synthesize_corpus(const SyntheticSpec& spec) {
  if (spec.n_docs == 0) throw Error(ErrorCode::kBadConfig, "n_docs must be at least 1");
  std::array<std::vector<const LexiconEntry*>, kNumElementTags> phrases;
  for (const auto& entry : spec.lexicon.entries()) {
    if (plantable(entry)) phrases[tag_rank(entry.tag)].push_back(&entry);
  }
  for (ElementTag tag : kCanonicalOrder) {
    if (phrases[tag_rank(tag)].empty()) {
      throw Error(ErrorCode::kIncompleteLexicon,
                  "lexicon has no plantable phrase for " + std::string(tag_name(tag)));
    }
  }

  SplitMix64 rng(spec.seed);
  SyntheticCorpus corpus;
  corpus.records.reserve(spec.n_docs);
  corpus.gold.reserve(spec.n_docs);
  for (size_t doc = 0; doc < spec.n_docs; ++doc) {
    char id[32];
    std::snprintf(id, sizeof id, "synth-%06zu", doc + 1);
    std::u32string text = U"一、";
    GoldDocument gold{id, {}};
    for (size_t t = 0; t < kNumElementTags; ++t) {
      if (t > 0) {
        text += rng.below(5) == 0 ? date_filler(rng) : std::u32string(pick(kConnectives, rng));
      }
      const LexiconEntry* entry = pick(phrases[t], rng);
      const std::u32string phrase = instantiate(entry->pattern, rng);
      gold.spans.push_back(
          {text.size(), text.size() + phrase.size(), entry->tag, entry->pattern.source()});
      text += phrase;
    }
    text += U"。";

    VerdictRecord record;
    record.id = id;
    record.date = std::chrono::year_month_day{
        std::chrono::year{2011 + static_cast<int>(rng.below(11))},
        std::chrono::month{1 + static_cast<unsigned>(rng.below(12))},
        std::chrono::day{1 + static_cast<unsigned>(rng.below(28))}};
    record.raw_text = utf8::encode(text);
    record.facts = record.raw_text;
    corpus.records.push_back(std::move(record));
    corpus.gold.push_back(std::move(gold));
  }
  return corpus;
}

}  // namespace lexdraft
