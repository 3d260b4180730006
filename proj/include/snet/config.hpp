#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace snet {

// Flat key=value configuration with # comments; command-line flags override
// file values. Unknown keys are rejected.
struct RunConfig {
  // data and artifacts
  std::string data;
  std::string dev_data;
  std::string out;
  std::vector<std::string> ckpts;
  uint64_t seed = 1;

  // shared model hyperparameters (desk-scale defaults; paper scale is
  // hidden=150, embed=300, dropout=0.1, vocab=30000)
  int hidden = 32;
  int embed_dim = 32;
  int char_embed_dim = 16;
  int char_hidden = 16;
  bool use_char = true;
  int feat_dim = 8;
  int vocab_size = 30000;
  float dropout = 0.0f;
  float loss_weight_r = 0.8f;
  float grad_clip = 0.0f;
  int beam = 12;
  int max_len = 40;
  int epochs = 100;
  int batch = 8;
  int max_span_len = 0;
  double extraction_threshold = 0.7;
  double synthesis_threshold = 0.5;
  std::string embeddings;  // optional pretrained word-vector file
  std::string answers;     // eval: the run-output file to score

  // ablations: no-ranking | rank-then-extract | no-position-features |
  // categorical-ce | bidirectional-match (comma separated)
  std::string ablation;

  // gen-corpus
  int corpus_examples = 50;
  int corpus_vocab = 50;
  int passage_len = 10;
  int k_passages = 2;
  int answer_len = 3;
  std::string answer_style = "exact-span";
  float distractor_overlap = 0.0f;

  bool has_ablation(const std::string& name) const;
  void validate() const;

  static RunConfig from_file(const std::string& path);
  // apply one key=value override (the CLI flag path)
  void set(const std::string& key, const std::string& value);
};

int thread_cap();  // SNET_THREADS, >= 1

}  // namespace snet
