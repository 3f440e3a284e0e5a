#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "lexdraft/kneser_ney.hpp"
#include "lexdraft/model_io.hpp"
#include "lexdraft/service.hpp"
#include "lexdraft/utf8.hpp"
#include "support.hpp"

namespace lexdraft {
namespace {

using nlohmann::json;
using testing::TempDir;

const std::string kPrompt = "闕很大明知金融帳戶之存摺、提款卡及密碼係供自己使用之重要理財工具，";

std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

// "一" -> "二" -> ... -> "十" -> EOS.
std::shared_ptr<LanguageModel> counting_lm() {
  const std::u32string digits = U"一二三四五六七八九十";
  return std::make_shared<testing::FunctionLm>(
      testing::char_vocab(digits), [n = digits.size()](std::span<const TokenId> ctx) {
        std::vector<double> p(n + 3, 0.0);
        TokenId last = ctx.empty() ? 0 : ctx.back();
        if (last == n + 2) {
          p[Vocabulary::kEos] = 1.0;
        } else {
          p[last < 3 ? 3 : last + 1] = 1.0;
        }
        return p;
      });
}

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    auto corpus = synthesize_corpus(SyntheticSpec{60, default_lexicon(), 3});
    auto texts = corpus_texts(corpus.records);
    texts.push_back(kPrompt);
    texts.push_back(testing::kReferenceFacts);
    auto vocab = build_vocabulary(texts);
    save_model(kn_train(texts, vocab), model_path());
    config_.model_path = model_path();
    config_.log_path = dir_ / "session.jsonl";
    config_.defaults.max_tokens = 80;
  }

  std::filesystem::path model_path() const { return dir_ / "kn.lm"; }

  TempDir dir_;
  ServiceConfig config_;
};

TEST_F(ServiceTest, GenerateReturnsDraftAndConsistentVerdict) {
  auto service = make_service(config_);
  auto r = service->handle_generate(json{{"prompt", kPrompt}, {"config", {{"strategy", "sample"}, {"seed", 5}}}});
  ASSERT_EQ(r.status, 200) << r.body.dump();
  for (const char* key : {"text", "token_count", "finish_reason", "verdict", "spans", "disclaimer"}) {
    EXPECT_TRUE(r.body.contains(key)) << key;
  }
  const std::string full = r.body["full_text"];
  EXPECT_EQ(full, kPrompt + r.body["text"].get<std::string>());
  auto offline = validate_format(full, service->lexicon());
  EXPECT_EQ(r.body["verdict"], verdict_to_json(offline));
  EXPECT_EQ(r.body["spans"], spans_to_json(tag_text(std::string_view(full), service->lexicon())));
  EXPECT_LE(r.body["token_count"].get<int>(), 80);
}

TEST_F(ServiceTest, FixedSeedGivesIdenticalBody) {
  auto service = make_service(config_);
  json req{{"prompt", kPrompt}, {"seed", 11}, {"k", 20}, {"temperature", 0.9}};
  auto a = service->handle_generate(req);
  auto b = service->handle_generate(req);
  ASSERT_EQ(a.status, 200);
  EXPECT_EQ(a.body.dump(), b.body.dump());
}

TEST_F(ServiceTest, RequestErrors) {
  auto service = make_service(config_);
  auto empty = service->handle_generate(json{{"prompt", ""}});
  EXPECT_EQ(empty.status, 400);
  EXPECT_EQ(empty.body["error"], "BadConfig");
  EXPECT_EQ(service->handle_generate(json{{"prompt", "甲"}, {"config", {{"p", 2.0}}}}).status, 400);
  EXPECT_EQ(service->handle_generate(json{{"prompt", "甲"}, {"strategy", "nucleus"}}).status, 400);
  EXPECT_EQ(service->handle_generate(json{{"prompt", "甲"}, {"k", "ten"}}).status, 400);
  auto malformed = service->dispatch("/api/generate", "{oops");
  EXPECT_EQ(malformed.status, 400);
  EXPECT_EQ(malformed.body["error"], "BadRequest");
  std::string huge = json{{"prompt", std::string(config_.max_request_bytes, 'a')}}.dump();
  auto big = service->dispatch("/api/generate", huge);
  EXPECT_EQ(big.status, 413);
  EXPECT_EQ(big.body["error"], "TooLarge");
  EXPECT_EQ(service->dispatch("/api/nothing", "{}").status, 404);
}

TEST_F(ServiceTest, MaxTokensIsCapped) {
  auto service = make_service(config_);
  auto merged = service->merge_config(json{{"max_tokens", 5000}});
  EXPECT_EQ(merged.max_tokens, DecodingConfig::kDefaultMaxTokens);
  EXPECT_EQ(service->merge_config(json::object()).max_tokens, 80);
}

TEST_F(ServiceTest, ValidateEndpoint) {
  auto service = make_service(config_);
  auto fig = service->handle_validate(json{{"text", testing::kReferenceFacts}});
  ASSERT_EQ(fig.status, 200);
  EXPECT_TRUE(fig.body["verdict"]["strict_ok"].get<bool>());
  EXPECT_EQ(fig.body["annotated"].get<std::string>().rfind("一、<LEO_SOC>能<LEO_SLE>", 0), 0u);
  auto hello = service->handle_validate(json{{"text", "你好"}});
  EXPECT_FALSE(hello.body["verdict"]["relaxed_ok"].get<bool>());
  EXPECT_EQ(hello.body["verdict"]["missing"].size(), 6u);
  EXPECT_EQ(service->handle_validate(json{{"text", "你好"}}).body.dump(), hello.body.dump());
  EXPECT_EQ(service->handle_validate(json{{"text", ""}}).status, 400);
}

TEST_F(ServiceTest, InfoReflectsModelFile) {
  auto service = make_service(config_);
  auto info = service->handle_info();
  EXPECT_EQ(info.body["backend"], "kneser-ney");
  auto manifest = read_manifest(read_file(model_path()));
  EXPECT_EQ(info.body["vocab_size"].get<size_t>(), manifest.vocab_size);
  EXPECT_EQ(info.body["lexicon"]["per_tag"].size(), 6u);
  auto again = make_service(config_);
  EXPECT_EQ(again->handle_info().body["model_hash"], info.body["model_hash"]);
}

TEST_F(ServiceTest, ContinuationCapAndRange) {
  auto service = make_service(config_);
  auto one = service->handle_continue(json{{"draft_so_far", kPrompt}, {"continue_tokens", 1}});
  ASSERT_EQ(one.status, 200);
  EXPECT_LE(one.body["token_count"].get<int>(), 1);
  EXPECT_LE(utf8::decode(one.body["continuation"].get<std::string>()).size(), 1u);
  EXPECT_EQ(service->handle_continue(json{{"draft_so_far", kPrompt}, {"continue_tokens", 101}}).status, 400);
  EXPECT_EQ(service->handle_continue(json{{"draft_so_far", kPrompt}, {"continue_tokens", 0}}).status, 400);
  EXPECT_EQ(service->handle_continue(json{{"draft_so_far", " "}}).status, 400);
  auto dflt = service->handle_continue(json{{"draft_so_far", kPrompt}});
  EXPECT_LE(dflt.body["token_count"].get<int>(), ServiceConfig::kDefaultContinueTokens);
}

TEST(ServiceChain, SequentialContinuesMatchOneGenerate) {
  ServiceConfig config;
  config.defaults.strategy = Strategy::kGreedy;
  DraftService service(counting_lm(), default_lexicon(), config, "test");
  auto first = service.handle_continue(json{{"draft_so_far", "一"}, {"continue_tokens", 3}, {"seed", 1}});
  ASSERT_EQ(first.status, 200) << first.body.dump();
  std::string draft = "一" + first.body["continuation"].get<std::string>();
  auto second = service.handle_continue(json{{"draft_so_far", draft}, {"continue_tokens", 3}, {"seed", 2}});
  std::string both = first.body["continuation"].get<std::string>() +
                     second.body["continuation"].get<std::string>();
  auto whole = service.handle_generate(json{{"prompt", "一"}, {"max_tokens", 6}});
  EXPECT_EQ(both, whole.body["text"].get<std::string>());
  EXPECT_EQ(both, "二三四五六七");

  auto done = service.handle_continue(json{{"draft_so_far", "一二三四五六七八九十"}, {"continue_tokens", 5}});
  EXPECT_EQ(done.body["finish_reason"], "eos");
  EXPECT_EQ(done.body["continuation"], "");
}

TEST_F(ServiceTest, SessionLogIsMetadataOnlyByDefault) {
  auto service = make_service(config_);
  service->handle_generate(json{{"prompt", kPrompt}, {"seed", 1}}, "session-a");
  service->handle_continue(json{{"draft_so_far", kPrompt}, {"continue_tokens", 2}}, "session-a");
  auto lines = read_lines(*config_.log_path);
  ASSERT_EQ(lines.size(), 2u);
  for (const auto& line : lines) {
    auto entry = json::parse(line);
    for (const char* key : {"timestamp", "session_id", "kind", "prompt_chars", "config", "token_count",
                            "strict_ok", "relaxed_ok"}) {
      EXPECT_TRUE(entry.contains(key)) << key;
    }
    EXPECT_FALSE(entry.contains("prompt"));
    EXPECT_FALSE(entry.contains("text"));
    EXPECT_EQ(line.find("闕很大"), std::string::npos);
  }
  EXPECT_EQ(json::parse(lines[0])["kind"], "generate");
  EXPECT_EQ(json::parse(lines[1])["kind"], "continue");

  config_.log_full = true;
  auto full = make_service(config_);
  full->handle_generate(json{{"prompt", kPrompt}, {"seed", 1}});
  auto after = read_lines(*config_.log_path);
  ASSERT_EQ(after.size(), 3u);
  EXPECT_EQ(after[0], lines[0]);
  EXPECT_EQ(json::parse(after[2])["prompt"], kPrompt);
}

TEST_F(ServiceTest, ConcurrentRequestsShareNoRandomState) {
  auto service = make_service(config_);
  json req{{"prompt", kPrompt}, {"seed", 9}};
  const std::string expected = service->handle_generate(req).body.dump();
  std::vector<std::string> bodies(6);
  std::vector<std::thread> threads;
  for (size_t i = 0; i < bodies.size(); ++i) {
    threads.emplace_back([&, i] { bodies[i] = service->handle_generate(req).body.dump(); });
  }
  for (auto& t : threads) t.join();
  for (const auto& b : bodies) EXPECT_EQ(b, expected);
  auto lines = read_lines(*config_.log_path);
  EXPECT_EQ(lines.size(), 7u);
  for (const auto& l : lines) EXPECT_NO_THROW(json::parse(l));
}

TEST_F(ServiceTest, HttpRoutes) {
  auto static_dir = dir_ / "www";
  std::filesystem::create_directories(static_dir);
  write_file(static_dir / "index.html", "<html>workbench</html>");
  config_.static_dir = static_dir;
  config_.max_request_bytes = 4096;
  auto service = make_service(config_);
  httplib::Server server;
  bind_routes(server, *service);
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto info = client.Get("/api/info");
  ASSERT_TRUE(info);
  EXPECT_EQ(info->status, 200);
  EXPECT_EQ(json::parse(info->body)["backend"], "kneser-ney");

  auto val = client.Post("/api/validate", json{{"text", testing::kReferenceFacts}}.dump(), "application/json");
  ASSERT_TRUE(val);
  EXPECT_TRUE(json::parse(val->body)["verdict"]["strict_ok"].get<bool>());

  auto gen = client.Post("/api/generate", json{{"prompt", kPrompt}, {"seed", 2}}.dump(), "application/json");
  ASSERT_TRUE(gen);
  EXPECT_EQ(gen->status, 200);
  EXPECT_EQ(gen->body, service->handle_generate(json{{"prompt", kPrompt}, {"seed", 2}}).body.dump());

  auto bad = client.Post("/api/generate", "[1,2", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  EXPECT_EQ(json::parse(bad->body)["error"], "BadRequest");

  auto big = client.Post("/api/validate", json{{"text", std::string(5000, 'x')}}.dump(), "application/json");
  ASSERT_TRUE(big);
  EXPECT_EQ(big->status, 413);

  auto page = client.Get("/index.html");
  ASSERT_TRUE(page);
  EXPECT_EQ(page->body, "<html>workbench</html>");

  server.stop();
  thread.join();
}

TEST(ServiceConfigFile, ParseAndApply) {
  auto values = parse_config_text("# defaults\nport = 9001\nstrategy = greedy\n\nlog_full = true\nk=5\n");
  ServiceConfig c;
  apply_config(values, c);
  EXPECT_EQ(c.port, 9001);
  EXPECT_EQ(c.defaults.strategy, Strategy::kGreedy);
  EXPECT_EQ(c.defaults.k, 5);
  EXPECT_TRUE(c.log_full);
  EXPECT_EQ(testing::error_code_of([&] { apply_config({{"colour", "red"}}, c); }), ErrorCode::kBadConfig);
  EXPECT_EQ(testing::error_code_of([&] { apply_config({{"port", "80x"}}, c); }), ErrorCode::kBadConfig);
  EXPECT_EQ(testing::error_code_of([] { parse_config_text("just words"); }), ErrorCode::kBadConfig);
}

TEST(ServiceConfigFile, EnvironmentVariable) {
  TempDir dir;
  write_file(dir / "lexdraft.conf", "host = 0.0.0.0\nmax_tokens = 12\n");
  setenv("LEXDRAFT_CONFIG", (dir / "lexdraft.conf").c_str(), 1);
  ServiceConfig c;
  apply_env_config(c);
  unsetenv("LEXDRAFT_CONFIG");
  EXPECT_EQ(c.host, "0.0.0.0");
  EXPECT_EQ(c.defaults.max_tokens, 12);
}

TEST(ServiceStartup, MissingModelFails) {
  ServiceConfig c;
  c.model_path = "/nonexistent/model.lm";
  EXPECT_THROW(make_service(c), Error);
  ServiceConfig none;
  EXPECT_EQ(testing::error_code_of([&] { make_service(none); }), ErrorCode::kBadConfig);
}

}  // namespace
}  // namespace lexdraft
