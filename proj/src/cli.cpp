#include "lexdraft/cli.hpp"

#include <cstdio>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "lexdraft/analytics.hpp"
#include "lexdraft/corpus.hpp"
#include "lexdraft/decoding.hpp"
#include "lexdraft/error.hpp"
#include "lexdraft/kneser_ney.hpp"
#include "lexdraft/model_io.hpp"
#include "lexdraft/neural_lm.hpp"
#include "lexdraft/remote_lm.hpp"
#include "lexdraft/service.hpp"

namespace lexdraft {

namespace {

namespace fs = std::filesystem;

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string join_tags(const std::vector<ElementTag>& tags) {
  std::string out;
  for (ElementTag t : tags) {
    if (!out.empty()) out += ",";
    out += tag_name(t);
  }
  return out.empty() ? "-" : out;
}

std::string verdict_word(const FormatVerdict& v) {
  if (v.strict_ok) return "STRICT_OK";
  if (v.relaxed_ok) return "RELAXED_OK";
  return "FORMAT_FAIL";
}

struct DecodingFlags {
  std::string strategy = "sample";
  int k = 0;
  double p = 1.0;
  double temperature = 1.0;
  int beam_width = 1;
  int max_tokens = DecodingConfig::kDefaultMaxTokens;
  std::uint64_t seed = 0;

  void add_to(CLI::App* app) {
    app->add_option("--strategy", strategy, "greedy, beam or sample")
        ->check(CLI::IsMember({"greedy", "beam", "sample"}));
    app->add_option("--k", k, "top-k cutoff (0 disables)");
    app->add_option("--p", p, "nucleus mass (1 disables)");
    app->add_option("--temperature", temperature);
    app->add_option("--beam-width", beam_width);
    app->add_option("--max-tokens", max_tokens);
    app->add_option("--seed", seed);
  }

  // Copies only the flags that were given on the command line.
  void apply(const CLI::App* app, DecodingConfig& c) const {
    if (app->count("--strategy")) c.strategy = *parse_strategy(strategy);
    if (app->count("--k")) c.k = k;
    if (app->count("--p")) c.p = p;
    if (app->count("--temperature")) c.temperature = temperature;
    if (app->count("--beam-width")) c.beam_width = beam_width;
    if (app->count("--max-tokens")) c.max_tokens = max_tokens;
    if (app->count("--seed")) c.seed = seed;
  }
};

std::set<int> parse_gram_list(const std::string& text) {
  std::set<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t used = 0;
      int n = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.insert(n);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kBadConfig, "--grams expects a list like 1,2,3");
    }
  }
  return out;
}

std::vector<std::string> training_texts(const fs::path& path) {
  auto texts = corpus_texts(load_corpus(path));
  if (texts.empty()) {
    throw Error(ErrorCode::kEmptyCorpus, path.string() + " has no criminal-facts text");
  }
  return texts;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Drafting pipeline for fraud criminal-facts sections", "lexdraft"};
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Parse verdicts and write train/validation/test splits");
  fs::path ingest_input;
  fs::path ingest_out;
  std::uint64_t ingest_seed = 0;
  ingest->add_option("--input", ingest_input, "directory of .txt verdicts, a .txt file or a .jsonl corpus")
      ->required();
  ingest->add_option("--out-dir", ingest_out)->required();
  ingest->add_option("--seed", ingest_seed);

  // stats
  auto* stats = app.add_subcommand("stats", "Corpus summary and TF-IDF terms");
  fs::path stats_corpus;
  std::string stats_grams = "1,2";
  size_t stats_top = 50;
  stats->add_option("--corpus", stats_corpus)->required();
  stats->add_option("--grams", stats_grams, "comma-separated n-gram sizes in 1..4");
  stats->add_option("--top", stats_top);

  // train
  auto* train = app.add_subcommand("train", "Train a language model");
  std::string backend = "kn";
  fs::path train_path;
  fs::path val_path;
  fs::path model_out;
  fs::path report_path;
  fs::path vocab_path;
  int order = 5;
  double discount = 0.75;
  NeuralDims dims;
  TrainConfig tc;
  train->add_option("--backend", backend)->check(CLI::IsMember({"kn", "neural"}));
  train->add_option("--train", train_path)->required();
  train->add_option("--val", val_path);
  train->add_option("--out", model_out)->required();
  train->add_option("--report", report_path, "TrainReport TSV (default <out>.report.tsv)");
  train->add_option("--vocab", vocab_path, "fixed vocabulary file");
  train->add_option("--order", order);
  train->add_option("--discount", discount);
  train->add_option("--context", dims.context_len);
  train->add_option("--embed", dims.embed_dim);
  train->add_option("--hidden", dims.hidden_dim);
  train->add_option("--epochs", tc.epochs);
  train->add_option("--batch", tc.batch_size);
  train->add_option("--lr", tc.learning_rate);
  train->add_option("--seed", tc.seed);

  // eval
  auto* eval = app.add_subcommand("eval", "Cross-entropy and perplexity of a model on a corpus");
  fs::path eval_model;
  fs::path eval_corpus;
  eval->add_option("--model", eval_model)->required();
  eval->add_option("--corpus", eval_corpus)->required();

  // generate
  auto* gen = app.add_subcommand("generate", "Generate a draft from a prompt");
  fs::path gen_model;
  std::string gen_prompt;
  fs::path gen_prompt_file;
  std::string gen_remote;
  fs::path gen_vocab;
  DecodingFlags gen_flags;
  gen->add_option("--model", gen_model);
  gen->add_option("--prompt", gen_prompt);
  gen->add_option("--prompt-file", gen_prompt_file);
  gen->add_option("--remote", gen_remote, "http://host:port of a remote next-token service");
  gen->add_option("--vocab", gen_vocab, "vocabulary for --remote");
  gen_flags.add_to(gen);

  // validate
  auto* val = app.add_subcommand("validate", "Tag legal elements and check the format");
  fs::path val_file;
  std::string val_text;
  fs::path val_corpus;
  fs::path val_lexicon;
  bool val_annotate = false;
  bool val_spans = false;
  bool val_dump = false;
  val->add_option("--file", val_file);
  val->add_option("--text", val_text);
  val->add_option("--corpus", val_corpus, "batch report over a corpus");
  val->add_option("--lexicon", val_lexicon);
  val->add_flag("--annotate", val_annotate, "print the text with <LEO_*> markers");
  val->add_flag("--spans", val_spans, "print one span per line");
  val->add_flag("--dump-lexicon", val_dump, "print the active lexicon and exit");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the drafting HTTP service");
  ServiceConfig sc;
  std::string serve_host;
  int serve_port = 0;
  fs::path serve_model;
  fs::path serve_lexicon;
  fs::path serve_log;
  fs::path serve_static;
  std::string serve_remote;
  fs::path serve_vocab;
  size_t serve_max_bytes = 0;
  bool serve_log_full = false;
  DecodingFlags serve_flags;
  serve->add_option("--host", serve_host);
  serve->add_option("--port", serve_port);
  serve->add_option("--model", serve_model);
  serve->add_option("--lexicon", serve_lexicon);
  serve->add_option("--log", serve_log, "session log (JSON lines)");
  serve->add_flag("--log-full", serve_log_full, "also log prompts and drafts");
  serve->add_option("--static", serve_static, "directory served at /");
  serve->add_option("--remote", serve_remote);
  serve->add_option("--vocab", serve_vocab);
  serve->add_option("--max-request-bytes", serve_max_bytes);
  serve_flags.add_to(serve);

  // synth
  auto* synth = app.add_subcommand("synth", "Write a synthetic corpus with planted elements");
  SyntheticSpec spec;
  fs::path synth_out;
  fs::path synth_gold;
  fs::path synth_lexicon;
  synth->add_option("--n-docs", spec.n_docs)->required();
  synth->add_option("--seed", spec.seed);
  synth->add_option("--out", synth_out)->required();
  synth->add_option("--gold", synth_gold, "TSV of planted spans");
  synth->add_option("--lexicon", synth_lexicon);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "lexdraft: " << e.what() << "\n";
    const CLI::App* failing = &app;
    for (const auto* sub : app.get_subcommands()) failing = sub;
    err << failing->help();
    return 1;
  }

  try {
    if (ingest->parsed()) {
      auto records = load_corpus(ingest_input);
      size_t empty = 0;
      for (const auto& r : records) empty += r.facts.empty() ? 1 : 0;
      auto split = split_corpus(records, ingest_seed);
      fs::create_directories(ingest_out);
      write_jsonl(records, ingest_out / "all.jsonl");
      write_jsonl(split.train, ingest_out / "train.jsonl");
      write_jsonl(split.validation, ingest_out / "validation.jsonl");
      write_jsonl(split.test, ingest_out / "test.jsonl");
      auto texts = corpus_texts(split.train);
      if (!texts.empty()) save_vocabulary(build_vocabulary(texts), ingest_out / "vocab.txt");
      out << "records\t" << records.size() << "\n"
          << "train\t" << split.train.size() << "\n"
          << "validation\t" << split.validation.size() << "\n"
          << "test\t" << split.test.size() << "\n"
          << "no_facts\t" << empty << "\n";
      return 0;
    }

    if (stats->parsed()) {
      auto texts = training_texts(stats_corpus);
      auto summary = corpus_summary(texts);
      err << "docs\t" << summary.n_docs << "\n"
          << "total_chars\t" << summary.total_chars << "\n"
          << "unique_chars\t" << summary.unique_chars << "\n"
          << "min_chars\t" << summary.min_chars << "\n"
          << "mean_chars\t" << fixed6(summary.mean_chars) << "\n"
          << "max_chars\t" << summary.max_chars << "\n";
      out << format_tfidf_tsv(tfidf(texts, parse_gram_list(stats_grams), stats_top));
      return 0;
    }

    if (train->parsed()) {
      auto texts = training_texts(train_path);
      Vocabulary vocab = vocab_path.empty() ? build_vocabulary(texts) : load_vocabulary(vocab_path);
      if (report_path.empty()) report_path = model_out.string() + ".report.tsv";
      if (backend == "kn") {
        auto model = kn_train(texts, vocab, order, discount);
        save_model(model, model_out);
        std::string report = "split\tloss\tperplexity\n";
        double tl = evaluate_loss(model, texts);
        report += "train\t" + fixed6(tl) + "\t" + fixed6(perplexity(tl)) + "\n";
        if (!val_path.empty()) {
          double vl = evaluate_loss(model, training_texts(val_path));
          report += "validation\t" + fixed6(vl) + "\t" + fixed6(perplexity(vl)) + "\n";
        }
        write_file(report_path, report);
        out << report;
        return 0;
      }
      if (val_path.empty()) throw Error(ErrorCode::kBadConfig, "neural training needs --val");
      auto val_texts = training_texts(val_path);
      auto init = nn_init(vocab, dims.context_len, dims.embed_dim, dims.hidden_dim, tc.seed);
      auto outcome = train_loop(std::move(init), texts, val_texts, tc);
      save_model(outcome.final_model, model_out);
      save_model(outcome.best_model, model_out.string() + ".best");
      std::string report = format_train_report_tsv(outcome.report);
      write_file(report_path, report);
      out << report;
      return 0;
    }

    if (eval->parsed()) {
      auto model = load_model(eval_model);
      double loss = evaluate_loss(*model, training_texts(eval_corpus));
      out << "loss\t" << fixed6(loss) << "\n"
          << "perplexity\t" << fixed6(perplexity(loss)) << "\n";
      return 0;
    }

    if (gen->parsed()) {
      std::string prompt = gen_prompt;
      if (!gen_prompt_file.empty()) prompt = read_file(gen_prompt_file);
      if (prompt.empty()) throw Error(ErrorCode::kBadConfig, "--prompt or --prompt-file is required");
      std::unique_ptr<LanguageModel> lm;
      if (!gen_remote.empty()) {
        Vocabulary vocab;
        if (!gen_vocab.empty()) {
          vocab = load_vocabulary(gen_vocab);
        } else if (!gen_model.empty()) {
          vocab = load_model(gen_model)->vocabulary();
        } else {
          throw Error(ErrorCode::kBadConfig, "--remote needs --vocab or --model");
        }
        lm = std::make_unique<RemoteLm>(RemoteLmEndpoint{gen_remote}, std::move(vocab));
      } else {
        if (gen_model.empty()) throw Error(ErrorCode::kBadConfig, "--model is required");
        lm = load_model(gen_model);
      }
      DecodingConfig config;
      gen_flags.apply(gen, config);
      auto result = generate(*lm, prompt, config);
      out << result.text << "\n";
      err << "tokens\t" << result.token_count << "\n"
          << "finish_reason\t" << finish_reason_name(result.finish_reason) << "\n"
          << "score\t" << fixed6(result.score) << "\n";
      return 0;
    }

    if (val->parsed()) {
      Lexicon lexicon = val_lexicon.empty() ? default_lexicon() : load_lexicon(val_lexicon);
      if (val_dump) {
        out << serialize_lexicon(lexicon);
        return 0;
      }
      if (!val_corpus.empty()) {
        auto report = batch_report(training_texts(val_corpus), lexicon);
        out << "docs\t" << report.n_docs << "\n"
            << "strict_pass\t" << report.strict_pass << "\t" << fixed6(report.strict_rate) << "\n"
            << "relaxed_pass\t" << report.relaxed_pass << "\t" << fixed6(report.relaxed_rate)
            << "\n";
        for (ElementTag t : kCanonicalOrder) {
          out << tag_name(t) << "\t" << report.tag_docs[tag_rank(t)] << "\t"
              << fixed6(report.tag_coverage[tag_rank(t)]) << "\n";
        }
        return 0;
      }
      std::string text = val_text;
      if (!val_file.empty()) text = read_file(val_file);
      if (text.empty()) throw Error(ErrorCode::kBadConfig, "--file, --text or --corpus is required");
      auto spans = tag_text(std::string_view(text), lexicon);
      auto verdict = verdict_from_spans(spans);
      out << verdict_word(verdict) << "\n"
          << "order\t" << join_tags(verdict.first_occurrence_order) << "\n"
          << "missing\t" << join_tags(verdict.missing) << "\n";
      if (val_spans) {
        for (const auto& s : spans) {
          out << s.start << "\t" << s.end << "\t" << tag_name(s.tag) << "\t" << s.pattern << "\n";
        }
      }
      if (val_annotate) out << annotate(text, spans) << "\n";
      return 0;
    }

    if (serve->parsed()) {
      apply_env_config(sc);
      if (serve->count("--host")) sc.host = serve_host;
      if (serve->count("--port")) sc.port = serve_port;
      if (serve->count("--model")) sc.model_path = serve_model;
      if (serve->count("--lexicon")) sc.lexicon_path = serve_lexicon;
      if (serve->count("--log")) sc.log_path = serve_log;
      if (serve_log_full) sc.log_full = true;
      if (serve->count("--static")) sc.static_dir = serve_static;
      if (serve->count("--remote")) sc.remote_url = serve_remote;
      if (serve->count("--vocab")) sc.vocab_path = serve_vocab;
      if (serve->count("--max-request-bytes")) sc.max_request_bytes = serve_max_bytes;
      serve_flags.apply(serve, sc.defaults);
      auto service = make_service(sc);
      if (!run_server(*service)) {
        err << "lexdraft: cannot bind " << sc.host << ":" << sc.port << "\n";
        return 2;
      }
      return 0;
    }

    if (synth->parsed()) {
      spec.lexicon = synth_lexicon.empty() ? default_lexicon() : load_lexicon(synth_lexicon);
      auto corpus = synthesize_corpus(spec);
      write_jsonl(corpus.records, synth_out);
      if (!synth_gold.empty()) {
        std::string tsv = "id\tstart\tend\ttag\tpattern\n";
        for (const auto& g : corpus.gold) {
          for (const auto& s : g.spans) {
            tsv += g.id + "\t" + std::to_string(s.start) + "\t" + std::to_string(s.end) + "\t" +
                   std::string(tag_name(s.tag)) + "\t" + s.pattern + "\n";
          }
        }
        write_file(synth_gold, tsv);
      }
      out << "docs\t" << corpus.records.size() << "\n";
      return 0;
    }
  } catch (const Error& e) {
    err << "lexdraft: " << error_code_name(e.code()) << ": " << e.what() << "\n";
    return e.code() == ErrorCode::kBadConfig ? 1 : 2;
  } catch (const std::exception& e) {
    err << "lexdraft: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace lexdraft
