#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "snet/checkpoint.hpp"
#include "snet/config.hpp"
#include "snet/errors.hpp"
#include "snet/extraction.hpp"

using namespace snet;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Checkpoint sample_checkpoint() {
  Checkpoint ckpt;
  ckpt.kind = "extraction";
  ckpt.meta = {{"hidden", "4"}, {"seed", "7"}};
  ckpt.vocab = Vocabulary::build({{"alpha", 2}, {"beta", 1}}, 10);
  ckpt.tensors["layer.w"] = {{2, 3}, {1, 2, 3, 4, 5, 6}};
  ckpt.tensors["layer.b"] = {{3}, {0.5f, -0.5f, 0.25f}};
  return ckpt;
}

}  // namespace

TEST_CASE("checkpoint round trips losslessly") {
  Checkpoint ckpt = sample_checkpoint();
  const std::string path = "test_ckpt_a.bin";
  save_checkpoint(ckpt, path);
  Checkpoint back = load_checkpoint(path);
  CHECK(back.kind == ckpt.kind);
  CHECK(back.meta == ckpt.meta);
  CHECK(back.vocab.tokens() == ckpt.vocab.tokens());
  CHECK(back.tensors == ckpt.tensors);

  // Canonical serialization: save(load(x)) is byte-identical to x.
  const std::string path2 = "test_ckpt_b.bin";
  save_checkpoint(back, path2);
  CHECK(slurp(path) == slurp(path2));
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("corrupt files are rejected") {
  const std::string path = "test_ckpt_bad.bin";
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOTMAGIC garbage";
  }
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);

  // Truncation of a valid file.
  save_checkpoint(sample_checkpoint(), path);
  std::string whole = slurp(path);
  {
    std::ofstream out(path, std::ios::binary);
    out << whole.substr(0, whole.size() / 2);
  }
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_checkpoint("missing_ckpt.bin"), CheckpointError);
}

TEST_CASE("apply_tensors validates names and shapes") {
  ParamMap params;
  params["layer.w"] = Tensor::zeros({2, 3});
  params["layer.b"] = Tensor::zeros({3});
  Checkpoint ckpt = sample_checkpoint();
  apply_tensors(ckpt, params);
  CHECK(params["layer.w"].data() == std::vector<float>{1, 2, 3, 4, 5, 6});
  CHECK(params["layer.b"].data() == std::vector<float>{0.5f, -0.5f, 0.25f});

  ParamMap wrong_shape;
  wrong_shape["layer.w"] = Tensor::zeros({3, 2});
  wrong_shape["layer.b"] = Tensor::zeros({3});
  CHECK_THROWS_AS(apply_tensors(ckpt, wrong_shape), CheckpointError);

  ParamMap missing;
  missing["layer.w"] = Tensor::zeros({2, 3});
  CHECK_THROWS_AS(apply_tensors(ckpt, missing), CheckpointError);

  ParamMap extra;
  extra["layer.w"] = Tensor::zeros({2, 3});
  extra["layer.b"] = Tensor::zeros({3});
  extra["other"] = Tensor::zeros({1});
  CHECK_THROWS_AS(apply_tensors(ckpt, extra), CheckpointError);
}

TEST_CASE("snapshot then apply restores a real model") {
  Rng rng(3);
  Vocabulary vocab = Vocabulary::build({{"w1", 3}, {"w2", 2}, {"w3", 1}}, 20);
  ExtractionConfig cfg;
  cfg.hidden = 4;
  cfg.embed_dim = 4;
  cfg.char_embed_dim = 3;
  cfg.char_hidden = 3;
  ExtractionModel model = ExtractionModel::create(
      cfg, static_cast<int>(vocab.size()), rng);
  Checkpoint ckpt = snapshot("extraction", {{"hidden", "4"}}, vocab,
                             model.params());

  Rng rng2(99);
  ExtractionModel fresh = ExtractionModel::create(
      cfg, static_cast<int>(vocab.size()), rng2);
  ParamMap fresh_params = fresh.params();
  apply_tensors(ckpt, fresh_params);
  for (const auto& [name, t] : model.params()) {
    CHECK(fresh_params.at(name).data() == t.data());
  }
}

TEST_CASE("run config file parsing with overrides") {
  const std::string path = "test_cfg.txt";
  {
    std::ofstream out(path);
    out << "# a comment line\n";
    out << "hidden=12\n";
    out << "dropout=0.25\n";
    out << "ablation=no-ranking,categorical-ce\n";
    out << "\n";
    out << "seed=41\n";
  }
  RunConfig cfg = RunConfig::from_file(path);
  std::remove(path.c_str());
  CHECK(cfg.hidden == 12);
  CHECK(cfg.dropout == doctest::Approx(0.25f));
  CHECK(cfg.seed == 41);
  CHECK(cfg.has_ablation("no-ranking"));
  CHECK(cfg.has_ablation("categorical-ce"));
  CHECK_FALSE(cfg.has_ablation("rank-then-extract"));

  cfg.set("hidden", "16");
  CHECK(cfg.hidden == 16);
  CHECK_THROWS_AS(cfg.set("bogus_key", "1"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_file("missing_cfg.txt"), ConfigError);
}

TEST_CASE("run config validation rejects bad ranges") {
  RunConfig cfg;
  cfg.validate();  // defaults are fine
  RunConfig bad_r = cfg;
  bad_r.loss_weight_r = 1.5f;
  CHECK_THROWS_AS(bad_r.validate(), ConfigError);
  RunConfig bad_drop = cfg;
  bad_drop.dropout = 1.0f;
  CHECK_THROWS_AS(bad_drop.validate(), ConfigError);
  RunConfig bad_beam = cfg;
  bad_beam.beam = 0;
  CHECK_THROWS_AS(bad_beam.validate(), ConfigError);
  RunConfig bad_abl = cfg;
  bad_abl.ablation = "no-such-mode";
  CHECK_THROWS_AS(bad_abl.validate(), ConfigError);
}
