#include <gtest/gtest.h>

#include <sstream>

#include "lexdraft/cli.hpp"
#include "lexdraft/corpus.hpp"
#include "lexdraft/model_io.hpp"
#include "support.hpp"

namespace lexdraft {
namespace {

using testing::TempDir;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "lexdraft");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, 1);
  auto unknown = run({"frobnicate"});
  EXPECT_EQ(unknown.code, 1);
  EXPECT_FALSE(unknown.err.empty());
  EXPECT_EQ(run({"generate", "--model"}).code, 1);
  EXPECT_EQ(run({"train", "--backend", "gpt", "--train", "x", "--out", "y"}).code, 1);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, ValidateReferenceJudgment) {
  TempDir dir;
  write_file(dir / "f.txt", testing::kReferenceFacts);
  auto r = run({"validate", "--file", (dir / "f.txt").string()});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "STRICT_OK");
  auto hello = run({"validate", "--text", "你好"});
  EXPECT_EQ(hello.code, 0);
  EXPECT_EQ(hello.out.substr(0, hello.out.find('\n')), "FORMAT_FAIL");
  auto annotated = run({"validate", "--text", "詐騙集團成員施用詐術", "--annotate"});
  EXPECT_NE(annotated.out.find("<LEO_SOC>施用<LEO_ACT>"), std::string::npos);
}

TEST(Cli, MissingInputIsDataError) {
  auto r = run({"validate", "--file", "/nonexistent/file.txt"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(run({"stats", "--corpus", "/nonexistent/c.jsonl"}).code, 2);
}

TEST(Cli, LexiconDumpRoundTrips) {
  TempDir dir;
  auto dump = run({"validate", "--dump-lexicon"});
  ASSERT_EQ(dump.code, 0);
  write_file(dir / "lex.tsv", dump.out);
  write_file(dir / "f.txt", testing::kReferenceFacts);
  auto r = run({"validate", "--file", (dir / "f.txt").string(), "--lexicon", (dir / "lex.tsv").string()});
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "STRICT_OK");
}

TEST(Cli, PipelineSmokeRun) {
  TempDir dir;
  auto synth = run({"synth", "--n-docs", "60", "--seed", "4", "--out", (dir / "s.jsonl").string(), "--gold",
                    (dir / "gold.tsv").string()});
  ASSERT_EQ(synth.code, 0) << synth.err;
  auto ingest = run({"ingest", "--input", (dir / "s.jsonl").string(), "--out-dir", (dir / "d").string()});
  ASSERT_EQ(ingest.code, 0) << ingest.err;
  EXPECT_NE(ingest.out.find("train\t48"), std::string::npos);
  for (const char* f : {"all.jsonl", "train.jsonl", "validation.jsonl", "test.jsonl", "vocab.txt"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "d" / f)) << f;
  }
  auto stats = run({"stats", "--corpus", (dir / "d" / "train.jsonl").string(), "--top", "5"});
  ASSERT_EQ(stats.code, 0);
  EXPECT_EQ(stats.out.substr(0, stats.out.find('\n')), "term\tdf\ttotal_tf\tmax_tfidf");
  EXPECT_NE(stats.err.find("docs\t48"), std::string::npos);

  auto train = run({"train", "--backend", "neural", "--train", (dir / "d" / "train.jsonl").string(), "--val",
                    (dir / "d" / "validation.jsonl").string(), "--out", (dir / "nn.lm").string(), "--epochs",
                    "2", "--hidden", "16", "--embed", "8", "--context", "4", "--vocab",
                    (dir / "d" / "vocab.txt").string()});
  ASSERT_EQ(train.code, 0) << train.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "nn.lm"));
  EXPECT_TRUE(std::filesystem::exists(dir / "nn.lm.best"));
  auto report = read_file(dir.path() / "nn.lm.report.tsv");
  EXPECT_EQ(std::count(report.begin(), report.end(), '\n'), 3);

  auto kn = run({"train", "--backend", "kn", "--train", (dir / "d" / "train.jsonl").string(), "--out",
                 (dir / "kn.lm").string()});
  ASSERT_EQ(kn.code, 0) << kn.err;
  auto eval = run({"eval", "--model", (dir / "kn.lm").string(), "--corpus", (dir / "d" / "test.jsonl").string()});
  ASSERT_EQ(eval.code, 0) << eval.err;
  EXPECT_EQ(eval.out.rfind("loss\t", 0), 0u);

  auto gen = run({"generate", "--model", (dir / "kn.lm").string(), "--prompt", "一、", "--seed", "3",
                  "--max-tokens", "40"});
  ASSERT_EQ(gen.code, 0) << gen.err;
  EXPECT_NE(gen.err.find("finish_reason"), std::string::npos);
  auto bad = run({"generate", "--model", (dir / "kn.lm").string(), "--prompt", "一、", "--p", "1.5"});
  EXPECT_EQ(bad.code, 1);
  auto batch = run({"validate", "--corpus", (dir / "s.jsonl").string()});
  EXPECT_NE(batch.out.find("strict_pass\t60\t1.000000"), std::string::npos);
}

}  // namespace
}  // namespace lexdraft
