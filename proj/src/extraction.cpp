#include "snet/extraction.hpp"

#include <algorithm>
#include <cmath>

#include "snet/errors.hpp"

namespace snet {

static constexpr float kInitBound = 0.08f;
static constexpr float kLogEps = 1e-9f;

AttentionPool AttentionPool::create(int key_dim, int query_dim, int att_dim,
                                    Rng& rng) {
  AttentionPool p;
  p.w_key = Tensor::param_uniform({att_dim, key_dim}, kInitBound, rng);
  p.w_query = Tensor::param_uniform({att_dim, query_dim}, kInitBound, rng);
  p.v = Tensor::param_uniform({att_dim}, kInitBound, rng);
  return p;
}

void AttentionPool::register_params(ParamMap& params,
                                    const std::string& prefix) const {
  params[prefix + ".w_key"] = w_key;
  params[prefix + ".w_query"] = w_query;
  params[prefix + ".v"] = v;
}

namespace {

std::vector<Tensor> project_keys(const std::vector<Tensor>& keys,
                                 const AttentionPool& p) {
  std::vector<Tensor> projected;
  projected.reserve(keys.size());
  for (const Tensor& k : keys) projected.push_back(matmul(p.w_key, k));
  return projected;
}

PooledAttention attention_pool_projected(const std::vector<Tensor>& keys,
                                         const std::vector<Tensor>& projected,
                                         const Tensor& query,
                                         const AttentionPool& p) {
  Tensor q_term;
  if (query.defined()) q_term = matmul(p.w_query, query);
  std::vector<Tensor> scores;
  scores.reserve(keys.size());
  for (const Tensor& pk : projected) {
    Tensor pre = q_term.defined() ? add(pk, q_term) : pk;
    scores.push_back(dot(p.v, tanh(pre)));
  }
  PooledAttention out;
  out.weights = softmax(concat(scores, 0));
  const int n = static_cast<int>(keys.size());
  const int d = keys[0].dim(0);
  Tensor key_matrix = stack_rows(keys);  // (n, d)
  out.pooled =
      reshape(matmul(reshape(out.weights, {1, n}), key_matrix), {d});
  return out;
}

}  // namespace

PooledAttention attention_pool(const std::vector<Tensor>& keys,
                               const Tensor& query, const AttentionPool& p) {
  if (keys.empty()) throw DataError("attention_pool: no keys");
  return attention_pool_projected(keys, project_keys(keys, p), query, p);
}

ExtractionModel ExtractionModel::create(const ExtractionConfig& config,
                                        int vocab_size, Rng& rng) {
  ExtractionModel m;
  m.config = config;
  const int h = config.hidden;
  const int h2 = 2 * h;
  Rng r = rng.split("extraction");
  m.words = EmbeddingTable::create(vocab_size, config.embed_dim,
                                   !config.freeze_word_embeddings, r);
  m.words.zero_unk = config.freeze_word_embeddings;
  int input_dim = config.embed_dim;
  if (config.use_char) {
    m.chars = CharEncoder::create(config.char_embed_dim, config.char_hidden, r);
    input_dim += 2 * config.char_hidden;
  }
  m.q_fwd = GRUCell::create(input_dim, h, r);
  m.q_bwd = GRUCell::create(input_dim, h, r);
  m.p_fwd = GRUCell::create(input_dim, h, r);
  m.p_bwd = GRUCell::create(input_dim, h, r);
  m.match_att = AttentionPool::create(h2, h2 + h2, h, r);
  m.match_gate = Tensor::param_uniform({2 * h2, 2 * h2}, kInitBound, r);
  m.match_gru = GRUCell::create(2 * h2, h2, r);
  m.match_gru_bwd = GRUCell::create(2 * h2, h2, r);
  m.v_r_q = Tensor::param_uniform({h2}, kInitBound, r);
  m.question_pool = AttentionPool::create(h2, h2, h, r);
  m.pointer_att = AttentionPool::create(h2, h2, h, r);
  m.answer_gru = GRUCell::create(h2, h2, r);
  m.rank_att = AttentionPool::create(h2, h2, h, r);
  m.rank_w_g = Tensor::param_uniform({h, 2 * h2}, kInitBound, r);
  m.rank_v_g = Tensor::param_uniform({h}, kInitBound, r);
  return m;
}

ParamMap ExtractionModel::params() const {
  ParamMap p;
  p["words"] = words.weights;
  if (chars) chars->register_params(p, "chars");
  q_fwd.register_params(p, "q_fwd");
  q_bwd.register_params(p, "q_bwd");
  p_fwd.register_params(p, "p_fwd");
  p_bwd.register_params(p, "p_bwd");
  match_att.register_params(p, "match_att");
  p["match_gate"] = match_gate;
  match_gru.register_params(p, "match_gru");
  if (config.bidirectional_match)
    match_gru_bwd.register_params(p, "match_gru_bwd");
  p["v_r_q"] = v_r_q;
  question_pool.register_params(p, "question_pool");
  pointer_att.register_params(p, "pointer_att");
  answer_gru.register_params(p, "answer_gru");
  rank_att.register_params(p, "rank_att");
  p["rank_w_g"] = rank_w_g;
  p["rank_v_g"] = rank_v_g;
  return p;
}

ExtractionForward extraction_forward(const ExtractionModel& model,
                                     const Vocabulary& vocab,
                                     const RCExample& example, bool training,
                                     Rng* rng) {
  const ExtractionConfig& cfg = model.config;
  if (training && !rng)
    throw ConfigError("extraction_forward: training mode needs an rng");
  auto drop = [&](Tensor t) {
    if (training && cfg.dropout_rate > 0.0f)
      return dropout(t, cfg.dropout_rate, true, *rng);
    return t;
  };
  const CharEncoder* chars = model.chars ? &*model.chars : nullptr;

  std::vector<Tensor> q_in =
      embed_sequence(example.question, vocab, model.words, chars);
  for (Tensor& t : q_in) t = drop(t);
  std::vector<Tensor> u_q = bigru_encode(model.q_fwd, model.q_bwd, q_in).states;
  for (Tensor& t : u_q) t = drop(t);

  auto [seq, offsets] = concat_passages(example);
  const int h2 = 2 * cfg.hidden;
  std::vector<Tensor> match_keys_proj = project_keys(u_q, model.match_att);

  // Each passage is encoded and matched independently so its states (and
  // therefore its ranking score) depend only on its own content; the
  // per-passage state sequences are then concatenated for the pointer.
  std::vector<Tensor> v_p;
  v_p.reserve(seq.size());
  for (const TokenList& passage : example.passages) {
    std::vector<Tensor> p_in = embed_sequence(passage, vocab, model.words, chars);
    for (Tensor& t : p_in) t = drop(t);
    std::vector<Tensor> u_p =
        bigru_encode(model.p_fwd, model.p_bwd, p_in).states;
    for (Tensor& t : u_p) t = drop(t);
    const int len = static_cast<int>(u_p.size());

    // gated matching: c_t attends to the question conditioned on
    // [u_t^P, v_{t-1}^P]; the gate rescales [u_t^P, c_t^Q] before the GRU
    auto match_pass = [&](const GRUCell& gru, bool backward) {
      std::vector<Tensor> states(len);
      Tensor v_prev = Tensor::zeros({h2});
      for (int i = 0; i < len; ++i) {
        const int t = backward ? len - 1 - i : i;
        Tensor query = concat({u_p[t], v_prev}, 0);
        PooledAttention att = attention_pool_projected(u_q, match_keys_proj,
                                                       query, model.match_att);
        Tensor gin = concat({u_p[t], att.pooled}, 0);
        Tensor gate = sigmoid(matmul(model.match_gate, gin));
        v_prev = gru_step(gru, v_prev, mul(gate, gin));
        states[t] = v_prev;
      }
      return states;
    };
    std::vector<Tensor> v_here = match_pass(model.match_gru, false);
    if (cfg.bidirectional_match) {
      std::vector<Tensor> v_b = match_pass(model.match_gru_bwd, true);
      for (int t = 0; t < len; ++t)
        v_here[t] = scale(add(v_here[t], v_b[t]), 0.5f);
    }
    for (Tensor& t : v_here) v_p.push_back(drop(t));
  }

  // question vector r^Q pooled against the learned query v_r^Q
  Tensor r_q =
      attention_pool(u_q, model.v_r_q, model.question_pool).pooled;

  // pointer network: two attention steps over v^P
  std::vector<Tensor> ptr_proj = project_keys(v_p, model.pointer_att);
  Tensor h_a = r_q;
  PooledAttention step1 =
      attention_pool_projected(v_p, ptr_proj, h_a, model.pointer_att);
  h_a = gru_step(model.answer_gru, h_a, step1.pooled);
  PooledAttention step2 =
      attention_pool_projected(v_p, ptr_proj, h_a, model.pointer_att);

  ExtractionForward out;
  out.start_probs = step1.weights;
  out.end_probs = step2.weights;
  out.offsets = offsets;

  // passage ranking over the shared matching states, sliced per passage
  const int k = static_cast<int>(example.passages.size());
  std::vector<Tensor> scores;
  scores.reserve(k);
  for (int p = 0; p < k; ++p) {
    const int begin = offsets.starts[p];
    const int len = static_cast<int>(example.passages[p].size());
    std::vector<Tensor> keys(v_p.begin() + begin, v_p.begin() + begin + len);
    Tensor r_p = attention_pool(keys, r_q, model.rank_att).pooled;
    Tensor g = dot(model.rank_v_g,
                   tanh(matmul(model.rank_w_g, concat({r_q, r_p}, 0))));
    scores.push_back(g);
  }
  out.ghat = softmax(concat(scores, 0));
  return out;
}

std::pair<int, int> constrained_decode(const std::vector<float>& start_probs,
                                       const std::vector<float>& end_probs,
                                       int max_span_len) {
  const int n = static_cast<int>(start_probs.size());
  int best_i = 0, best_j = 0;
  double best = -1.0;
  // prefix-max of start_probs when no length cap; direct sweep otherwise
  int arg = 0;
  for (int j = 0; j < n; ++j) {
    if (max_span_len > 0) {
      arg = std::max(0, j - max_span_len + 1);
      for (int i = arg + 1; i <= j; ++i)
        if (start_probs[i] > start_probs[arg]) arg = i;
    } else {
      if (start_probs[j] > start_probs[arg]) arg = j;
    }
    const double p = static_cast<double>(start_probs[arg]) * end_probs[j];
    if (p > best) {
      best = p;
      best_i = arg;
      best_j = j;
    }
  }
  return {best_i, best_j};
}

SpanPrediction ExtractionForward::to_prediction(int max_span_len) const {
  SpanPrediction p;
  p.start_probs = start_probs.data();
  p.end_probs = end_probs.data();
  p.span = constrained_decode(p.start_probs, p.end_probs, max_span_len);
  if (ghat.defined()) p.passage_scores = ghat.data();
  p.passage_starts = offsets.starts;
  return p;
}

namespace {

// log a[gold] + sum_{i != gold} log(1 - a_i), negated
Tensor pointer_step_bce(const Tensor& probs, int gold) {
  Tensor log_a = log(add_scalar(probs, kLogEps));
  Tensor log_1ma = log(add_scalar(add_scalar(neg(probs), 1.0f), kLogEps));
  Tensor picked = slice(log_a, 0, gold, 1);
  Tensor off = sub(sum(log_1ma), slice(log_1ma, 0, gold, 1));
  return neg(add(picked, off));
}

}  // namespace

Tensor extraction_loss(const Tensor& start_probs, const Tensor& end_probs,
                       int gold_start, int gold_end, bool categorical) {
  const int n = start_probs.dim(0);
  if (gold_start < 0 || gold_end < 0 || gold_start >= n || gold_end >= n)
    throw DataError("extraction_loss: gold span (" +
                    std::to_string(gold_start) + "," +
                    std::to_string(gold_end) + ") out of range for N=" +
                    std::to_string(n));
  if (categorical) {
    Tensor s = slice(log(add_scalar(start_probs, kLogEps)), 0, gold_start, 1);
    Tensor e = slice(log(add_scalar(end_probs, kLogEps)), 0, gold_end, 1);
    return neg(add(s, e));
  }
  return add(pointer_step_bce(start_probs, gold_start),
             pointer_step_bce(end_probs, gold_end));
}

Tensor ranking_loss(const Tensor& ghat, int correct_index) {
  if (correct_index < 0 || correct_index >= ghat.dim(0))
    throw DataError("ranking_loss: correct index " +
                    std::to_string(correct_index) + " out of range for k=" +
                    std::to_string(ghat.dim(0)));
  return pointer_step_bce(ghat, correct_index);
}

Tensor joint_loss(const Tensor& l_ap, const Tensor& l_pr, float r) {
  if (r < 0.0f || r > 1.0f)
    throw ConfigError("joint loss weight r must be in [0,1], got " +
                      std::to_string(r));
  return add(scale(l_ap, r), scale(l_pr, 1.0f - r));
}

Tensor extraction_example_loss(const ExtractionModel& model,
                               const Vocabulary& vocab,
                               const ExtractionPair& pair, bool training,
                               Rng* rng) {
  const RCExample& ex = *pair.example;
  ExtractionForward fwd =
      extraction_forward(model, vocab, ex, training, rng);
  Tensor l_ap = extraction_loss(fwd.start_probs, fwd.end_probs,
                                pair.gold.start, pair.gold.end,
                                model.config.categorical_ce);
  const float r = model.config.loss_weight_r;
  if (r < 1.0f && ex.selected_passage) {
    Tensor l_pr = ranking_loss(fwd.ghat, *ex.selected_passage);
    return joint_loss(l_ap, l_pr, r);
  }
  return r < 1.0f ? l_ap : joint_loss(l_ap, Tensor::scalar(0.0f), r);
}

SpanPrediction ensemble_combine(const std::vector<SpanPrediction>& predictions,
                                int max_span_len) {
  if (predictions.empty())
    throw DataError("ensemble_combine: no predictions");
  const size_t n = predictions[0].start_probs.size();
  SpanPrediction out;
  out.start_probs.assign(n, 0.0f);
  out.end_probs.assign(n, 0.0f);
  out.passage_starts = predictions[0].passage_starts;
  const size_t k = predictions[0].passage_scores.size();
  out.passage_scores.assign(k, 0.0f);
  for (const SpanPrediction& p : predictions) {
    if (p.start_probs.size() != n || p.end_probs.size() != n)
      throw DataError("ensemble_combine: mismatched sequence lengths");
    for (size_t i = 0; i < n; ++i) {
      out.start_probs[i] += p.start_probs[i];
      out.end_probs[i] += p.end_probs[i];
    }
    if (p.passage_scores.size() == k)
      for (size_t i = 0; i < k; ++i)
        out.passage_scores[i] += p.passage_scores[i];
  }
  const float inv = 1.0f / static_cast<float>(predictions.size());
  for (float& x : out.start_probs) x *= inv;
  for (float& x : out.end_probs) x *= inv;
  for (float& x : out.passage_scores) x *= inv;
  out.span = constrained_decode(out.start_probs, out.end_probs, max_span_len);
  return out;
}

std::vector<double> passage_mass_scores(const SpanPrediction& pred) {
  const auto& starts = pred.passage_starts;
  std::vector<double> mass(starts.size(), 0.0);
  for (size_t i = 0; i < pred.start_probs.size(); ++i) {
    size_t p = 0;
    while (p + 1 < starts.size() &&
           starts[p + 1] <= static_cast<int>(i))
      ++p;
    mass[p] += pred.start_probs[i] + pred.end_probs[i];
  }
  return mass;
}

std::vector<EpochStats> train_extraction(
    ExtractionModel& model, const Vocabulary& vocab,
    const std::vector<ExtractionPair>& pairs, const TrainOptions& options,
    const std::vector<RCExample>* dev) {
  if (pairs.empty())
    throw DataError("train_extraction: empty training set");
  ParamMap params = model.params();
  AdaDeltaState opt;
  Rng rng = Rng(options.seed).split("train-extract");
  std::vector<size_t> order(pairs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<GoldSpan> dev_gold;
  if (dev)
    for (const RCExample& ex : *dev) dev_gold.push_back(select_gold_span(ex));

  std::vector<EpochStats> history;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0.0;
    for (size_t b = 0; b < order.size(); b += options.batch_size) {
      const size_t end = std::min(order.size(),
                                  b + static_cast<size_t>(options.batch_size));
      const float inv = 1.0f / static_cast<float>(end - b);
      for (size_t i = b; i < end; ++i) {
        Tensor loss = extraction_example_loss(model, vocab, pairs[order[i]],
                                              true, &rng);
        const float lv = loss.value();
        if (!std::isfinite(lv))
          throw TrainingError("non-finite extraction loss at epoch " +
                              std::to_string(epoch) + ", batch " +
                              std::to_string(b / options.batch_size));
        epoch_loss += lv;
        backward(scale(loss, inv));
      }
      adadelta_step(params, opt, model.config.grad_clip);
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.loss = epoch_loss / pairs.size();
    if (dev) {
      int hits = 0, em = 0;
      double rouge_sum = 0.0;
      for (size_t i = 0; i < dev->size(); ++i) {
        const RCExample& ex = (*dev)[i];
        ExtractionForward fwd =
            extraction_forward(model, vocab, ex, false, nullptr);
        SpanPrediction pred = fwd.to_prediction(model.config.max_span_len);
        auto [seq, off] = concat_passages(ex);
        TokenList span(seq.begin() + pred.span.first,
                       seq.begin() + pred.span.second + 1);
        std::vector<TokenList> refs;
        for (const auto& a : ex.answers) refs.push_back(tokenize(a));
        rouge_sum += rouge_l(span, refs);
        if (pred.span.first == dev_gold[i].start &&
            pred.span.second == dev_gold[i].end)
          ++em;
        if (ex.selected_passage) {
          std::vector<double> scores;
          if (model.config.loss_weight_r < 1.0f)
            scores.assign(pred.passage_scores.begin(),
                          pred.passage_scores.end());
          else
            scores = passage_mass_scores(pred);
          int arg = 0;
          for (size_t s = 1; s < scores.size(); ++s)
            if (scores[s] > scores[arg]) arg = static_cast<int>(s);
          if (arg == *ex.selected_passage) ++hits;
        }
      }
      stats.dev_rouge = rouge_sum / dev->size();
      stats.dev_p_at_1 = static_cast<double>(hits) / dev->size();
      stats.dev_exact_match = static_cast<double>(em) / dev->size();
    }
    history.push_back(stats);
    if (options.early_stop_em > 0.0 && dev &&
        stats.dev_exact_match >= options.early_stop_em &&
        stats.dev_p_at_1 >= options.early_stop_em)
      break;
  }
  return history;
}

SpanPrediction predict_span(const ExtractionSystem& system,
                            const Vocabulary& vocab, const RCExample& example) {
  if (system.mode == ExtractionAblation::kRankThenExtract) {
    if (!system.ranker)
      throw ConfigError("rank-then-extract system is missing its ranker");
    ExtractionForward rank_fwd =
        extraction_forward(*system.ranker, vocab, example, false, nullptr);
    const auto& scores = rank_fwd.ghat.data();
    int top = 0;
    for (size_t i = 1; i < scores.size(); ++i)
      if (scores[i] > scores[top]) top = static_cast<int>(i);
    ExtractionForward fwd =
        extraction_forward(system.model, vocab, example, false, nullptr);
    SpanPrediction pred = fwd.to_prediction(system.model.config.max_span_len);
    // restrict decoding to the top-ranked passage
    const int begin = fwd.offsets.starts[top];
    const int len = static_cast<int>(example.passages[top].size());
    std::vector<float> s(pred.start_probs.begin() + begin,
                         pred.start_probs.begin() + begin + len);
    std::vector<float> e(pred.end_probs.begin() + begin,
                         pred.end_probs.begin() + begin + len);
    auto [i, j] = constrained_decode(s, e, system.model.config.max_span_len);
    pred.span = {begin + i, begin + j};
    pred.passage_scores.assign(scores.begin(), scores.end());
    return pred;
  }
  ExtractionForward fwd =
      extraction_forward(system.model, vocab, example, false, nullptr);
  return fwd.to_prediction(system.model.config.max_span_len);
}

}  // namespace snet
