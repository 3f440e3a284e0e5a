#pragma once

#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "lexdraft/corpus.hpp"
#include "lexdraft/elements.hpp"
#include "lexdraft/error.hpp"
#include "lexdraft/utf8.hpp"
#include "lexdraft/langmodel.hpp"

namespace lexdraft::testing {

// Criminal-facts section of the sample judgment used throughout the tests.
inline const std::string kReferenceFacts =
    "一、林翊羽能預見，任意將所有之金融機構帳戶資料交付予他人，足供他人用為詐欺等犯罪後收受匯款，"
    "以遂其掩飾或隱匿犯罪所得財物目的之工具，詎以前開結果之發生亦不違其本意，竟基於幫助他人從事"
    "不法行為之犯意，於民國100年4月21日前之不詳時間，在不詳地點，將其向苗栗市農會所申請之帳號"
    "0000000000000000號帳戶之存摺、提款卡（包括密碼），以不詳之代價，提供與不詳年籍之人使用。"
    "而該不詳年籍人士與詐騙集團成員，基於意圖為自己不法之所有，於同年月21日中午12時19分許，撥打"
    "電話向被害人張培超以假冒好友謊稱急需錢等詐騙手法，使張培超誤以為真，而依指示操作後匯出款項"
    "新臺幣10萬元至林翊羽上開帳戶內而受騙。\n"
    "二、案經張培超訴由苗栗縣警察局苗栗分局報告偵辦。";

// The same section with element spans replaced by markers.
inline const std::string kReferenceMarked =
    "一、<LEO_SOC>能<LEO_SLE><LEO_ACT>，詎<LEO_SLE>，竟<LEO_SLE>，於民國 100年4月21日前之不詳時間，"
    "在不詳地點，<LEO_ACT><LEO_SOC><LEO_ACT>。 而<LEO_SOC>與<LEO_SOC>，基於<LEO_SLE>，於同年月21日"
    "中午12時19分許， <LEO_ACT><LEO_VIC><LEO_ACT>，<LEO_CAU><LEO_VIC><LEO_CAU>，而 "
    "<LEO_ROH><LEO_SOC><LEO_ROH>而受騙。";

// Marked output of a generated draft.
inline const std::string kGeneratedMarked =
    " <LEO_SOC><LEO_SLE><LEO_ACT> · <LEO_SLE> · 於民國 103 年 8 月初某日， "
    "<LEO_ACT><LEO_SOC><LEO_ACT>。嗣該<LEO_SOC>取得上開帳戶資料後，即 <LEO_SLE> · 於 103 年 8 月 "
    "18 日 19 時 50 分許，撥打電話給<LEO_VIC> · <LEO_ACT> 云 云 · <LEO_CAU><LEO_VIC><LEO_CAU> · "
    "<LEO_ROH><LEO_SOC><LEO_ROH>。嗣<LEO_VIC>察覺受騙 · 報警處理 · 始查悉上 情。 ";

// One lexicon phrase per tag, used to turn marked text back into prose.
inline std::string representative_phrase(ElementTag tag) {
  switch (tag) {
    case ElementTag::kSoc: return "詐騙集團成員";
    case ElementTag::kSle: return "意圖為自己不法所有";
    case ElementTag::kAct: return "詐術";
    case ElementTag::kVic: return "被害人張培超";
    case ElementTag::kCau: return "誤以為真";
    case ElementTag::kRoh: return "交付";
  }
  return {};
}

inline std::string realize_markers(const std::string& marked) {
  std::vector<std::string> fills;
  for (const auto& [pos, tag] : parse_markers(marked).markers) {
    fills.push_back(representative_phrase(tag));
  }
  return restore_annotated(marked, fills);
}

// Text with every span of `drop` cut out.
inline std::string without_tag(const std::string& text, ElementTag drop, const Lexicon& lexicon) {
  auto u = utf8::decode(text);
  std::u32string out;
  size_t pos = 0;
  for (const auto& s : tag_text(std::u32string_view(u), lexicon)) {
    if (s.tag != drop) continue;
    out += u.substr(pos, s.start - pos);
    pos = s.end;
  }
  out += u.substr(pos);
  return utf8::encode(out);
}

// Language model defined by a callback over the unpadded context.
class FunctionLm final : public LanguageModel {
 public:
  using Fn = std::function<std::vector<double>(std::span<const TokenId>)>;

  FunctionLm(Vocabulary vocab, Fn fn) : vocab_(std::move(vocab)), fn_(std::move(fn)) {}

  std::string_view kind() const override { return "function"; }
  const Vocabulary& vocabulary() const override { return vocab_; }
  NextTokenDistribution next(std::span<const TokenId> context) const override {
    return NextTokenDistribution{fn_(context)};
  }

 private:
  Vocabulary vocab_;
  Fn fn_;
};

// Vocabulary over the given characters, all counts 1.
inline Vocabulary char_vocab(std::u32string chars) {
  std::vector<char32_t> cs(chars.begin(), chars.end());
  return Vocabulary(cs, std::vector<std::uint64_t>(cs.size(), 1));
}

inline std::vector<double> normalized(std::vector<double> w) {
  double s = 0.0;
  for (double x : w) s += x;
  for (double& x : w) x /= s;
  return w;
}

// Code of the lexdraft::Error thrown by f, or nullopt if it returns normally.
template <class F>
std::optional<ErrorCode> error_code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() /
            ("lexdraft-test-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace lexdraft::testing
