#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "lexdraft/error.hpp"
#include "lexdraft/kneser_ney.hpp"
#include "lexdraft/model_io.hpp"
#include "lexdraft/neural_lm.hpp"
#include "oracles.hpp"

namespace lexdraft {
namespace {

using testing::error_code_of;

std::vector<std::string> synthetic_texts(size_t n, std::uint64_t seed) {
  return corpus_texts(synthesize_corpus(SyntheticSpec{n, default_lexicon(), seed}).records);
}

std::vector<TokenId> ids(const Vocabulary& v, std::string_view s) { return v.encode(s); }

TEST(Perplexity, ExpOfLoss) {
  EXPECT_NEAR(perplexity(2.141219), 8.51, 0.01);
  EXPECT_NEAR(perplexity(3.577524), 35.78, 0.01);
  EXPECT_EQ(perplexity(0.0), 1.0);
}

TEST(PaddedWindow, LeftPadsWithBos) {
  std::vector<TokenId> ctx = {5, 6};
  EXPECT_EQ(padded_window(ctx, 4), (std::vector<TokenId>{0, 0, 5, 6}));
  EXPECT_EQ(padded_window(ctx, 1), (std::vector<TokenId>{6}));
  EXPECT_TRUE(padded_window(ctx, 0).empty());
}

TEST(EvaluateLoss, UniformAndCertainModels) {
  auto v = testing::char_vocab(U"a");  // |V| = 4
  testing::FunctionLm uniform(v, [](auto) { return std::vector<double>(4, 0.25); });
  EXPECT_NEAR(evaluate_loss(uniform, {"aa", "a"}), std::log(4.0), 1e-12);
  testing::FunctionLm certain(v, [](std::span<const TokenId> ctx) {
    std::vector<double> p(4, 0.0);
    p[ctx.size() < 2 ? 3 : Vocabulary::kEos] = 1.0;
    return p;
  });
  EXPECT_EQ(evaluate_loss(certain, {"aa"}), 0.0);
  EXPECT_EQ(error_code_of([&] { evaluate_loss(uniform, {}); }), ErrorCode::kEmptyCorpus);
}

TEST(KneserNey, CountsAbab) {
  auto v = build_vocabulary({"abab"});
  auto m = kn_train({"abab"}, v, 2, 0.75);
  EXPECT_EQ(m.count(ids(v, "ab")), 2u);
  EXPECT_EQ(m.count(ids(v, "ba")), 1u);
  EXPECT_EQ(m.count(ids(v, "a")), 2u);
  std::vector<TokenId> bos_a = {Vocabulary::kBos, ids(v, "a")[0]};
  EXPECT_EQ(m.count(bos_a), 1u);
}

TEST(KneserNey, PrefersObservedContinuation) {
  auto v = build_vocabulary({"abab"});
  auto m = kn_train({"abab"}, v, 2, 0.75);
  auto a = ids(v, "a");
  auto d = m.next(a);
  EXPECT_GT(d.probs[ids(v, "b")[0]], d.probs[a[0]]);
}

TEST(KneserNey, MatchesRecursiveOracle) {
  auto texts = synthetic_texts(15, 3);
  texts.push_back("abab");
  auto v = build_vocabulary(texts);
  for (int order : {1, 2, 3}) {
    auto m = kn_train(texts, v, order, 0.6);
    testing::KnOracle oracle(texts, v, order, 0.6);
    SplitMix64 rng(order);
    for (int trial = 0; trial < 6; ++trial) {
      const auto& t = texts[rng.below(texts.size())];
      auto enc = v.encode(t);
      size_t cut = rng.below(enc.size() + 1);
      std::vector<TokenId> ctx(enc.begin(), enc.begin() + cut);
      auto dist = m.next(ctx);
      auto window = padded_window(ctx, order - 1);
      for (TokenId w = 0; w < v.size(); ++w) {
        ASSERT_NEAR(dist.probs[w], oracle.prob(window, w), 1e-12) << "order " << order;
      }
    }
  }
}

TEST(KneserNey, UnseenContextBacksOff) {
  auto v = build_vocabulary({"abcabd"});
  auto m = kn_train({"abcabd"}, v, 3, 0.75);
  auto seen_lower = m.next(ids(v, "b"));
  auto unseen = m.next(ids(v, "db"));  // "db" never occurs as a context
  ASSERT_EQ(unseen.probs.size(), seen_lower.probs.size());
  for (size_t i = 0; i < unseen.size(); ++i) EXPECT_DOUBLE_EQ(unseen.probs[i], seen_lower.probs[i]);
}

TEST(KneserNey, OrderOneIgnoresContext) {
  auto v = build_vocabulary({"abcab"});
  auto m = kn_train({"abcab"}, v, 1, 0.5);
  EXPECT_EQ(m.next(ids(v, "a")).probs, m.next(ids(v, "cab")).probs);
}

TEST(KneserNey, EosAfterLoneTextIsPositive) {
  auto v = build_vocabulary({"詐欺"});
  auto m = kn_train({"詐欺"}, v, 3, 0.75);
  EXPECT_GT(m.next(ids(v, "詐欺")).probs[Vocabulary::kEos], 0.0);
}

TEST(KneserNey, HeldOutLossIsHigher) {
  auto train = synthetic_texts(80, 1);
  auto held = synthetic_texts(30, 2);
  std::vector<std::string> all = train;
  all.insert(all.end(), held.begin(), held.end());
  auto v = build_vocabulary(all);
  auto m = kn_train(train, v, 5, 0.75);
  EXPECT_LE(evaluate_loss(m, train), evaluate_loss(m, held));
}

TEST(KneserNey, LossMatchesNaiveSummation) {
  auto texts = synthetic_texts(10, 4);
  auto v = build_vocabulary(texts);
  auto m = kn_train(texts, v);
  EXPECT_NEAR(evaluate_loss(m, texts), testing::naive_loss(m, texts), 1e-9);
}

TEST(KneserNey, RejectsBadConfig) {
  auto v = build_vocabulary({"ab"});
  EXPECT_EQ(error_code_of([&] { kn_train({"ab"}, v, 0, 0.5); }), ErrorCode::kBadConfig);
  EXPECT_EQ(error_code_of([&] { kn_train({"ab"}, v, 7, 0.5); }), ErrorCode::kBadConfig);
  EXPECT_EQ(error_code_of([&] { kn_train({"ab"}, v, 2, 1.0); }), ErrorCode::kBadConfig);
  EXPECT_EQ(error_code_of([&] { kn_train({}, v, 2, 0.5); }), ErrorCode::kEmptyCorpus);
}

TEST(Neural, SameSeedSameParameters) {
  auto v = build_vocabulary({"詐欺被害人"});
  EXPECT_EQ(nn_init(v, 4, 3, 5, 9).params(), nn_init(v, 4, 3, 5, 9).params());
  EXPECT_NE(nn_init(v, 4, 3, 5, 9).params(), nn_init(v, 4, 3, 5, 10).params());
  auto model = nn_init(v, 4, 3, 5, 9);
  for (auto g : model.params().groups()) {
    for (double x : g) {
      EXPECT_GT(x, -0.1);
      EXPECT_LT(x, 0.1);
    }
  }
}

TEST(Neural, ZeroParametersGiveUniform) {
  auto texts = synthetic_texts(5, 1);
  auto v = build_vocabulary(texts);
  auto m = nn_zero(v, NeuralDims{4, 3, 5});
  auto d = m.next(ids(v, "一、"));
  for (double p : d.probs) EXPECT_NEAR(p, 1.0 / v.size(), 1e-15);
  EXPECT_NEAR(evaluate_loss(m, texts), std::log(static_cast<double>(v.size())), 1e-12);
}

TEST(Neural, EmbeddingLocality) {
  auto v = build_vocabulary({"abcdef"});
  auto m = nn_init(v, 3, 4, 6, 2);
  std::vector<TokenId> ctx = ids(v, "ab");
  auto before = m.next(ctx);
  TokenId absent = ids(v, "f")[0];
  auto& embed = m.mutable_params().embed;
  for (size_t j = 0; j < 4; ++j) embed[absent * 4 + j] += 0.5;
  EXPECT_EQ(m.next(ctx).probs, before.probs);
}

TEST(Neural, ForwardIsNormalized) {
  auto texts = synthetic_texts(5, 7);
  auto v = build_vocabulary(texts);
  auto m = nn_init(v, 8, 6, 10, 1);
  auto enc = v.encode(texts[0]);
  for (size_t cut = 0; cut <= enc.size(); cut += 7) {
    auto d = nn_forward(m, std::span<const TokenId>(enc.data(), cut));
    EXPECT_TRUE(d.is_valid(1e-9));
  }
}

TEST(Neural, GradientMatchesFiniteDifferences) {
  auto texts = synthetic_texts(3, 11);
  auto v = build_vocabulary(texts);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto m = nn_init(v, 3, 4, 5, seed);
    auto ex = make_examples(m, texts);
    std::vector<size_t> idx;
    for (size_t i = 0; i < ex.size(); i += 9) idx.push_back(i);
    auto check = testing::finite_difference_check(m, ex, idx);
    EXPECT_LT(check.max_relative_error, 1e-4) << "seed " << seed;
    EXPECT_EQ(check.coordinates, m.params().size());
  }
}

TEST(Neural, ExtendedPrecisionLossAgreesWithLibrary) {
  auto texts = synthetic_texts(3, 12);
  auto v = build_vocabulary(texts);
  auto m = nn_init(v, 3, 4, 5, 6);
  auto ex = make_examples(m, texts);
  std::vector<size_t> idx(ex.size());
  std::iota(idx.begin(), idx.end(), 0);
  testing::ExtendedLoss oracle(m, ex, idx);
  EXPECT_NEAR(static_cast<double>(oracle()), nn_loss_and_gradient(m, ex, idx, nullptr), 1e-12);
  EXPECT_NEAR(static_cast<double>(oracle()), evaluate_loss(m, texts), 1e-12);
}

TEST(Neural, ZeroLearningRateKeepsParameters) {
  auto texts = synthetic_texts(10, 5);
  auto v = build_vocabulary(texts);
  auto m = nn_init(v, 4, 4, 8, 3);
  auto r = nn_train_epoch(m, texts, TrainConfig{1, 16, 0.0, 1});
  EXPECT_EQ(r.model.params(), m.params());
}

TEST(Neural, OneEpochReducesLoss) {
  auto texts = synthetic_texts(20, 5);
  auto v = build_vocabulary(texts);
  auto m = nn_init(v, 4, 8, 16, 3);
  double before = evaluate_loss(m, texts);
  auto r = nn_train_epoch(m, texts, TrainConfig{1, 16, 0.1, 1});
  EXPECT_LT(evaluate_loss(r.model, texts), before);
}

TEST(Neural, DivergenceIsReported) {
  auto texts = synthetic_texts(10, 5);
  auto v = build_vocabulary(texts);
  auto m = nn_init(v, 4, 8, 16, 3);
  EXPECT_EQ(error_code_of([&] { nn_train_epoch(m, texts, TrainConfig{1, 4, 1e300, 1}); }),
            ErrorCode::kNonFiniteLoss);
}

TEST(TrainLoop, DeterministicReportShape) {
  auto train = synthetic_texts(20, 1);
  auto val = synthetic_texts(5, 2);
  std::vector<std::string> all = train;
  all.insert(all.end(), val.begin(), val.end());
  auto v = build_vocabulary(all);
  TrainConfig c{3, 16, 0.1, 4};
  auto a = train_loop(nn_init(v, 4, 4, 8, 1), train, val, c);
  auto b = train_loop(nn_init(v, 4, 4, 8, 1), train, val, c);
  EXPECT_EQ(a.report, b.report);
  ASSERT_EQ(a.report.rows.size(), 3u);
  for (const auto& row : a.report.rows) {
    EXPECT_NEAR(row.validation_perplexity, std::exp(row.validation_loss),
                0.005 * std::exp(row.validation_loss));
  }
  EXPECT_NEAR(evaluate_loss(a.final_model, val), a.report.rows.back().validation_loss, 1e-12);
  EXPECT_NEAR(evaluate_loss(a.best_model, val),
              a.report.rows[a.report.best_epoch - 1].validation_loss, 1e-12);
  auto one = train_loop(nn_init(v, 4, 4, 8, 1), train, val, TrainConfig{1, 16, 0.1, 4});
  EXPECT_EQ(one.report.rows.size(), 1u);
  auto tsv = format_train_report_tsv(a.report);
  EXPECT_EQ(tsv.substr(0, tsv.find('\t')), "epoch");
  EXPECT_EQ(error_code_of([&] { train_loop(nn_init(v, 4, 4, 8, 1), train, val, TrainConfig{0, 16, 0.1, 4}); }),
            ErrorCode::kBadConfig);
}

TEST(ModelIo, KneserNeyRoundTrip) {
  auto texts = synthetic_texts(10, 1);
  auto v = build_vocabulary(texts);
  auto m = kn_train(texts, v, 4, 0.7);
  auto bytes = serialize_model(m);
  EXPECT_EQ(bytes.rfind("LEXLM1\n", 0), 0u);
  auto back = parse_model(bytes);
  EXPECT_EQ(back->kind(), "kneser-ney");
  EXPECT_EQ(back->vocabulary(), v);
  auto ctx = v.encode(texts[0].substr(0, 9));
  EXPECT_EQ(back->next(ctx).probs, m.next(ctx).probs);
  EXPECT_EQ(serialize_model(*back), bytes);
  auto manifest = read_manifest(bytes);
  EXPECT_EQ(manifest.vocab_size, v.size());
  EXPECT_EQ(manifest.fields.at("order"), "4");
}

TEST(ModelIo, NeuralRoundTripAndFileHash) {
  auto texts = synthetic_texts(4, 1);
  auto v = build_vocabulary(texts);
  auto m = nn_init(v, 4, 3, 5, 8);
  testing::TempDir dir;
  save_model(m, dir / "m.lm");
  auto back = load_model(dir / "m.lm");
  ASSERT_EQ(back->kind(), "neural");
  EXPECT_EQ(dynamic_cast<const NeuralLm&>(*back).params(), m.params());
  EXPECT_EQ(model_file_hash(dir / "m.lm"), model_file_hash(dir / "m.lm"));
  EXPECT_EQ(model_file_hash(dir / "m.lm").size(), 16u);
}

TEST(ModelIo, CorruptFilesRejected) {
  auto v = build_vocabulary({"ab"});
  auto bytes = serialize_model(kn_train({"ab"}, v, 2, 0.5));
  EXPECT_EQ(error_code_of([&] { parse_model("LEXLM9\n"); }), ErrorCode::kBadFormat);
  EXPECT_EQ(error_code_of([&] { parse_model(bytes.substr(0, bytes.size() - 3)); }),
            ErrorCode::kBadFormat);
}

TEST(Normalization, EveryLocalBackendSumsToOne) {
  auto texts = synthetic_texts(30, 9);
  auto v = build_vocabulary(texts);
  auto kn = kn_train(texts, v);
  auto nn = nn_init(v, 8, 8, 16, 2);
  SplitMix64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<TokenId> ctx(rng.below(20));
    for (auto& id : ctx) id = static_cast<TokenId>(3 + rng.below(v.size() - 3));
    for (const LanguageModel* lm : {static_cast<const LanguageModel*>(&kn),
                                    static_cast<const LanguageModel*>(&nn)}) {
      auto d = lm->next(ctx);
      ASSERT_EQ(d.size(), v.size());
      ASSERT_TRUE(d.is_valid(1e-9)) << lm->kind() << " sum " << d.sum();
    }
  }
}

}  // namespace
}  // namespace lexdraft
