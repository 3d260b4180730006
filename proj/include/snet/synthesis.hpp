#pragma once

#include <string>
#include <vector>

#include "snet/encoder.hpp"
#include "snet/optim.hpp"
#include "snet/text.hpp"

namespace snet {

struct SynthesisConfig {
  int hidden = 32;     // encoder per-direction and decoder size
  int embed_dim = 32;
  int feat_dim = 8;    // start/end position feature embeddings
  bool use_position_features = true;  // off reproduces the plain
                                      // question+passage seq2seq ablation
  float dropout_rate = 0.0f;
  float grad_clip = 0.0f;
  int beam_size = 12;
  int max_len = 40;
};

struct SynthesisModel {
  SynthesisConfig config;
  EmbeddingTable words;  // shared question/passage/answer vocabulary
  EmbeddingTable feat_start;  // rows: {0, 1}
  EmbeddingTable feat_end;
  GRUCell p_fwd, p_bwd, q_fwd, q_bwd;
  GRUCell decoder;  // input [w_emb; c_prev]
  Tensor w_d, b_d;  // decoder init from the two backward finals
  Tensor w_a, u_a, v_a;        // concatenate attention
  Tensor w_r, u_r, v_r, w_o;   // readout, maxout feeds w_o

  static SynthesisModel create(const SynthesisConfig& config, int vocab_size,
                               Rng& rng);
  ParamMap params() const;
};

struct SynthesisEncoding {
  std::vector<Tensor> states;  // h^P followed by h^Q, each 2*hidden
  Tensor init_state;           // d_0
};

// Passage input per position is [word; f_s; f_e] embeddings; indicator
// sequences hold exactly one 1 each with start <= end.
SynthesisEncoding encode_with_features(const SynthesisModel& model,
                                       const Vocabulary& vocab,
                                       const TokenList& passage, int span_start,
                                       int span_end, const TokenList& question,
                                       bool training = false,
                                       Rng* rng = nullptr);

struct DecoderStep {
  Tensor state;      // d_t
  Tensor context;    // c_t
  Tensor log_probs;  // over the vocabulary
};

DecoderStep decoder_step(const SynthesisModel& model, const Tensor& d_prev,
                         int prev_word_id, const Tensor& c_prev,
                         const std::vector<Tensor>& encoder_states);

// Teacher-forced -log p(target | input); sum over positions including EOS.
Tensor synthesis_sequence_loss(const SynthesisModel& model,
                               const Vocabulary& vocab,
                               const SynthesisPair& pair,
                               bool training = false, Rng* rng = nullptr);

struct Hypothesis {
  std::vector<int> tokens;  // excludes BOS; includes EOS when finished
  double log_prob = 0.0;
  int finished_at = -1;  // step of EOS, -1 while live
};

// Length-capped beam search; EOS hypotheses retire into a completed pool;
// returns the best completed (or best live at max_len). Ties break by
// earlier completion, then lexicographic token ids.
Hypothesis beam_search(const SynthesisModel& model,
                       const SynthesisEncoding& encoding, int beam_size,
                       int max_len);

// Convenience: beam over token strings, EOS stripped.
TokenList generate_answer(const SynthesisModel& model, const Vocabulary& vocab,
                          const TokenList& passage, int span_start,
                          int span_end, const TokenList& question);

// The three decode-time rules: collapse repeated words/phrases (up to 4
// tokens), repair UNK and out-of-span segments by matching adjacent words
// in the span then the passage, and fall back to the span when the result
// is a single UNK.
TokenList post_process(const TokenList& generated, const TokenList& span,
                       const TokenList& passage);

struct SynthesisEpochStats {
  int epoch = 0;
  double loss = 0.0;
  double dev_exact_match = 0.0;
  double dev_rouge = 0.0;  // post-processed beam output vs target
};

struct SynthesisTrainOptions {
  int epochs = 100;
  int batch_size = 8;
  uint64_t seed = 1;
  double early_stop_em = -1.0;  // on post-processed dev exact match
};

std::vector<SynthesisEpochStats> train_synthesis(
    SynthesisModel& model, const Vocabulary& vocab,
    const std::vector<SynthesisPair>& pairs,
    const SynthesisTrainOptions& options,
    const std::vector<SynthesisPair>* dev = nullptr);

}  // namespace snet
