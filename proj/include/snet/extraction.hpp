#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "snet/encoder.hpp"
#include "snet/optim.hpp"
#include "snet/text.hpp"

namespace snet {

struct ExtractionConfig {
  int hidden = 32;           // encoder GRU size per direction
  int embed_dim = 32;
  int char_embed_dim = 16;
  int char_hidden = 16;
  bool use_char = true;
  bool freeze_word_embeddings = true;  // pretrained-GloVe convention
  float loss_weight_r = 0.8f;
  float dropout_rate = 0.0f;
  float grad_clip = 0.0f;  // 0 disables
  bool categorical_ce = false;   // plain categorical CE instead of the
                                 // summed binary form
  bool bidirectional_match = false;
  int max_span_len = 0;  // decode-time cap on span length; 0 disables
};

// Attention-pooling parameters: s_j = v' tanh(W_key k_j + W_query q).
struct AttentionPool {
  Tensor w_key, w_query, v;

  static AttentionPool create(int key_dim, int query_dim, int att_dim,
                              Rng& rng);
  void register_params(ParamMap& params, const std::string& prefix) const;
};

struct PooledAttention {
  Tensor weights;  // rank-1 over keys
  Tensor pooled;
};

// query may be undefined (Tensor()) when the score uses only the keys'
// term plus a learned query folded into w_query's operand elsewhere.
PooledAttention attention_pool(const std::vector<Tensor>& keys,
                               const Tensor& query, const AttentionPool& p);

struct ExtractionModel {
  ExtractionConfig config;
  EmbeddingTable words;
  std::optional<CharEncoder> chars;
  GRUCell q_fwd, q_bwd, p_fwd, p_bwd;
  // gated matching (question context conditioned on [u_t^P, v_{t-1}^P])
  AttentionPool match_att;
  Tensor match_gate;  // (4h, 4h)
  GRUCell match_gru;  // input 4h, hidden 2h
  GRUCell match_gru_bwd;  // bidirectional-match ablation only
  // question pooling against a learned query
  Tensor v_r_q;  // (2h)
  AttentionPool question_pool;
  // pointer network
  AttentionPool pointer_att;
  GRUCell answer_gru;  // input 2h, hidden 2h
  // passage ranking
  AttentionPool rank_att;
  Tensor rank_w_g;  // (h, 4h)
  Tensor rank_v_g;  // (h)

  static ExtractionModel create(const ExtractionConfig& config, int vocab_size,
                                Rng& rng);
  ParamMap params() const;
};

struct SpanPrediction {
  std::vector<float> start_probs;
  std::vector<float> end_probs;
  std::pair<int, int> span{0, 0};
  std::vector<float> passage_scores;  // normalized ghat, one per passage
  std::vector<int> passage_starts;    // concatenated offset of each passage
};

// Graph-carrying forward result; SpanPrediction is its detached view.
struct ExtractionForward {
  Tensor start_probs;
  Tensor end_probs;
  Tensor ghat;  // defined only when the example has >= 1 passage
  PassageOffsets offsets;

  SpanPrediction to_prediction(int max_span_len = 0) const;
};

ExtractionForward extraction_forward(const ExtractionModel& model,
                                     const Vocabulary& vocab,
                                     const RCExample& example, bool training,
                                     Rng* rng);

// argmax over i <= j (and j - i < max_span_len when > 0) of s[i] * e[j]
std::pair<int, int> constrained_decode(const std::vector<float>& start_probs,
                                       const std::vector<float>& end_probs,
                                       int max_span_len = 0);

// Eq-style summed binary cross-entropy over both pointer steps and all N
// positions; categorical switches to -log a at the gold positions only.
Tensor extraction_loss(const Tensor& start_probs, const Tensor& end_probs,
                       int gold_start, int gold_end, bool categorical = false);
Tensor ranking_loss(const Tensor& ghat, int correct_index);
Tensor joint_loss(const Tensor& l_ap, const Tensor& l_pr, float r);

// Full per-example joint loss (ranking term dropped when the example has
// no selected passage or r == 1).
Tensor extraction_example_loss(const ExtractionModel& model,
                               const Vocabulary& vocab,
                               const ExtractionPair& pair, bool training,
                               Rng* rng);

// Position-wise probability sums across models, renormalized, then
// constrained decoding; passage scores averaged.
SpanPrediction ensemble_combine(const std::vector<SpanPrediction>& predictions,
                                int max_span_len = 0);

// Per-passage span mass (sum of start and end probabilities inside each
// passage); the incidental ranking signal of a no-ranking model.
std::vector<double> passage_mass_scores(const SpanPrediction& pred);

enum class ExtractionAblation { kJoint, kNoRanking, kRankThenExtract };

struct TrainOptions {
  int epochs = 100;
  int batch_size = 8;
  uint64_t seed = 1;
  bool verbose = false;
  // stop once dev span exact-match and P@1 both reach this; <= 0 disables
  double early_stop_em = -1.0;
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double dev_rouge = 0.0;
  double dev_p_at_1 = 0.0;
  double dev_exact_match = 0.0;
};

std::vector<EpochStats> train_extraction(
    ExtractionModel& model, const Vocabulary& vocab,
    const std::vector<ExtractionPair>& pairs, const TrainOptions& options,
    const std::vector<RCExample>* dev = nullptr);

// Deployable extractor: joint or no-ranking holds one model; the
// rank-then-extract configuration trains a ranking-only model (r=0) and a
// span-only model (r=1) and restricts decoding to the top-ranked passage.
struct ExtractionSystem {
  ExtractionAblation mode = ExtractionAblation::kJoint;
  ExtractionModel model;
  std::optional<ExtractionModel> ranker;
};

SpanPrediction predict_span(const ExtractionSystem& system,
                            const Vocabulary& vocab, const RCExample& example);

}  // namespace snet
