#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "snet/checkpoint.hpp"
#include "snet/cli.hpp"
#include "snet/errors.hpp"

using namespace snet;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("snet_cli_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Shared tiny corpus + one quickly trained extraction checkpoint.
RunConfig base_config(const TempDir& dir) {
  RunConfig cfg;
  cfg.seed = 5;
  cfg.hidden = 6;
  cfg.embed_dim = 6;
  cfg.use_char = false;
  cfg.vocab_size = 200;
  cfg.epochs = 3;
  cfg.batch = 4;
  cfg.corpus_examples = 12;
  cfg.corpus_vocab = 25;
  cfg.passage_len = 6;
  cfg.k_passages = 2;
  cfg.answer_len = 2;
  cfg.data = dir.file("corpus.jsonl");
  return cfg;
}

}  // namespace

TEST_CASE("corpus generation, training, inference, and eval chain") {
  TempDir dir;
  RunConfig gen = base_config(dir);
  gen.out = gen.data;
  cmd_gen_corpus(gen);
  CHECK(fs::exists(gen.data));

  RunConfig train = base_config(dir);
  train.out = dir.file("extract.ckpt");
  auto history = cmd_train_extract(train);
  CHECK(history.size() == 3);
  CHECK(fs::exists(train.out));

  LoadedExtraction loaded = load_extraction(train.out);
  CHECK(loaded.system.mode == ExtractionAblation::kJoint);
  CHECK(loaded.system.model.config.hidden == 6);

  RunConfig synth = base_config(dir);
  synth.epochs = 2;
  synth.ckpts = {train.out};
  synth.out = dir.file("synth.ckpt");
  cmd_train_synth(synth);
  CHECK(fs::exists(synth.out));
  LoadedSynthesis syn = load_synthesis(synth.out);
  CHECK(syn.model.config.hidden == 6);

  RunConfig run = base_config(dir);
  run.ckpts = {train.out, synth.out};
  run.out = dir.file("answers.jsonl");
  cmd_run(run);
  auto records = load_run_output(run.out);
  auto dataset = load_dataset(run.data);
  REQUIRE(records.size() == dataset.size());
  for (size_t i = 0; i < records.size(); ++i) {
    CHECK(records[i].query_id == dataset[i].query_id);
    CHECK(!records[i].span.empty());
    CHECK(!records[i].answer.empty());
    CHECK(records[i].passage_scores.size() == dataset[i].passages.size());
  }

  RunConfig eval = base_config(dir);
  eval.answers = run.out;
  eval.out = dir.file("report.json");
  EvalReport report = cmd_eval(eval);
  CHECK(report.per_question.size() == dataset.size());
  CHECK(report.rouge_l_mean >= 0.0);
  CHECK(report.rouge_l_mean <= 1.0);
  CHECK(report.p_at_1 >= 0.0);
  double mean = 0.0;
  for (const auto& [id, r] : report.per_question) mean += r;
  mean /= report.per_question.size();
  CHECK(report.rouge_l_mean == doctest::Approx(mean).epsilon(1e-9));
  double frac = 0.0;
  for (const auto& row : report.bucket_table) frac += row.fraction;
  CHECK(frac == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(fs::exists(eval.out));
}

TEST_CASE("span-only run works without a synthesis checkpoint") {
  TempDir dir;
  RunConfig gen = base_config(dir);
  gen.out = gen.data;
  cmd_gen_corpus(gen);
  RunConfig train = base_config(dir);
  train.epochs = 1;
  train.out = dir.file("extract.ckpt");
  cmd_train_extract(train);

  RunConfig run = base_config(dir);
  run.ckpts = {train.out};
  run.out = dir.file("answers.jsonl");
  cmd_run(run);
  for (const auto& rec : load_run_output(run.out)) {
    CHECK(rec.generated.empty());
    CHECK(rec.answer == rec.span);
  }
}

TEST_CASE("identical seeds give byte-identical artifacts") {
  TempDir a, b;
  for (const TempDir* dir : {&a, &b}) {
    RunConfig gen = base_config(*dir);
    gen.out = gen.data;
    cmd_gen_corpus(gen);
    RunConfig train = base_config(*dir);
    train.epochs = 2;
    train.out = dir->file("extract.ckpt");
    cmd_train_extract(train);
    RunConfig run = base_config(*dir);
    run.ckpts = {train.out};
    run.out = dir->file("answers.jsonl");
    cmd_run(run);
  }
  CHECK(slurp(a.file("corpus.jsonl")) == slurp(b.file("corpus.jsonl")));
  CHECK(slurp(a.file("extract.ckpt")) == slurp(b.file("extract.ckpt")));
  CHECK(slurp(a.file("answers.jsonl")) == slurp(b.file("answers.jsonl")));
}

TEST_CASE("eval rejects unmatched query ids") {
  TempDir dir;
  RunConfig gen = base_config(dir);
  gen.out = gen.data;
  cmd_gen_corpus(gen);
  std::string answers = dir.file("answers.jsonl");
  {
    std::ofstream out(answers);
    out << R"({"query_id": 999999, "span": "x", "generated": "", "answer": "x", "passage_scores": [1.0]})"
        << "\n";
  }
  RunConfig eval = base_config(dir);
  eval.answers = answers;
  eval.out = dir.file("report.json");
  try {
    cmd_eval(eval);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("999999") != std::string::npos);
  }
}

TEST_CASE("train-extract surfaces an empty training set as a data error") {
  TempDir dir;
  // References that no span can overlap: extraction filter drops all.
  std::ofstream out(dir.file("corpus.jsonl"));
  out << R"({"query_id": 1, "query": "q words", "passages": [{"passage_text": "alpha beta gamma", "is_selected": 1}], "answers": ["zeta eta theta"]})"
      << "\n";
  out.close();
  RunConfig train = base_config(dir);
  train.out = dir.file("extract.ckpt");
  CHECK_THROWS_AS(cmd_train_extract(train), DataError);
}

TEST_CASE("run rejects mixed vocabularies and double synthesis") {
  TempDir dir;
  RunConfig gen = base_config(dir);
  gen.out = gen.data;
  cmd_gen_corpus(gen);
  RunConfig train_a = base_config(dir);
  train_a.epochs = 1;
  train_a.out = dir.file("a.ckpt");
  cmd_train_extract(train_a);

  // Second model trained on a different corpus: different vocabulary.
  RunConfig gen_b = base_config(dir);
  gen_b.seed = 77;
  gen_b.corpus_vocab = 31;
  gen_b.data = dir.file("corpus_b.jsonl");
  gen_b.out = gen_b.data;
  cmd_gen_corpus(gen_b);
  RunConfig train_b = base_config(dir);
  train_b.seed = 77;
  train_b.epochs = 1;
  train_b.data = gen_b.data;
  train_b.out = dir.file("b.ckpt");
  cmd_train_extract(train_b);

  RunConfig run = base_config(dir);
  run.ckpts = {dir.file("a.ckpt"), dir.file("b.ckpt")};
  run.out = dir.file("answers.jsonl");
  CHECK_THROWS_AS(cmd_run(run), CheckpointError);

  RunConfig synth = base_config(dir);
  synth.epochs = 1;
  synth.out = dir.file("s.ckpt");
  cmd_train_synth(synth);
  RunConfig run2 = base_config(dir);
  run2.ckpts = {dir.file("s.ckpt"), dir.file("s.ckpt")};
  run2.out = dir.file("answers.jsonl");
  CHECK_THROWS_AS(cmd_run(run2), ConfigError);
}

TEST_CASE("ensemble run combines multiple extraction models") {
  TempDir dir;
  RunConfig gen = base_config(dir);
  gen.out = gen.data;
  cmd_gen_corpus(gen);
  for (uint64_t seed : {11ull, 12ull}) {
    RunConfig train = base_config(dir);
    train.seed = seed;
    train.epochs = 1;
    train.out = dir.file("m" + std::to_string(seed) + ".ckpt");
    cmd_train_extract(train);
  }
  RunConfig run = base_config(dir);
  run.ckpts = {dir.file("m11.ckpt"), dir.file("m12.ckpt")};
  run.out = dir.file("answers.jsonl");
  cmd_run(run);
  CHECK(load_run_output(run.out).size() == 12);
}

TEST_CASE("ensemble-select keeps only strict improvements") {
  TempDir dir;
  RunConfig gen = base_config(dir);
  gen.out = gen.data;
  cmd_gen_corpus(gen);
  std::vector<std::string> ckpts;
  for (uint64_t seed : {21ull, 22ull, 23ull}) {
    RunConfig train = base_config(dir);
    train.seed = seed;
    train.epochs = 2;
    train.out = dir.file("m" + std::to_string(seed) + ".ckpt");
    cmd_train_extract(train);
    ckpts.push_back(train.out);
  }
  RunConfig sel = base_config(dir);
  sel.ckpts = ckpts;
  sel.dev_data = sel.data;
  auto kept = cmd_ensemble_select(sel);
  CHECK(!kept.empty());
  CHECK(kept.size() <= 3);
  for (const auto& k : kept)
    CHECK(std::find(ckpts.begin(), ckpts.end(), k) != ckpts.end());
}

TEST_CASE("rank-then-extract training stores both models") {
  TempDir dir;
  RunConfig gen = base_config(dir);
  gen.out = gen.data;
  cmd_gen_corpus(gen);
  RunConfig train = base_config(dir);
  train.epochs = 1;
  train.ablation = "rank-then-extract";
  train.out = dir.file("rte.ckpt");
  cmd_train_extract(train);
  LoadedExtraction loaded = load_extraction(train.out);
  CHECK(loaded.system.mode == ExtractionAblation::kRankThenExtract);
  REQUIRE(loaded.system.ranker.has_value());

  RunConfig run = base_config(dir);
  run.ckpts = {train.out};
  run.out = dir.file("answers.jsonl");
  cmd_run(run);
  CHECK(load_run_output(run.out).size() == 12);
}

TEST_CASE("checkpoint meta restores ablation hyperparameters") {
  TempDir dir;
  RunConfig gen = base_config(dir);
  gen.out = gen.data;
  cmd_gen_corpus(gen);
  RunConfig train = base_config(dir);
  train.epochs = 1;
  train.ablation = "categorical-ce,bidirectional-match";
  train.out = dir.file("abl.ckpt");
  cmd_train_extract(train);
  LoadedExtraction loaded = load_extraction(train.out);
  CHECK(loaded.system.model.config.categorical_ce);
  CHECK(loaded.system.model.config.bidirectional_match);
}
