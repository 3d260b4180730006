#include "snet/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "snet/errors.hpp"

namespace snet {

static constexpr float kInitBound = 0.08f;

SynthesisModel SynthesisModel::create(const SynthesisConfig& config,
                                      int vocab_size, Rng& rng) {
  SynthesisModel m;
  m.config = config;
  const int h = config.hidden;
  const int h2 = 2 * h;
  Rng r = rng.split("synthesis");
  m.words = EmbeddingTable::create(vocab_size, config.embed_dim, true, r);
  m.feat_start = EmbeddingTable::create(2, config.feat_dim, true, r);
  m.feat_end = EmbeddingTable::create(2, config.feat_dim, true, r);
  // the indicator-0 rows live at the PAD slot of their tables and must be
  // real embeddings, so re-randomize them
  for (auto* t : {&m.feat_start, &m.feat_end})
    for (float& x : t->weights.mutable_data())
      if (x == 0.0f) x = r.uniform(-kInitBound, kInitBound);
  int p_input = config.embed_dim;
  if (config.use_position_features) p_input += 2 * config.feat_dim;
  m.p_fwd = GRUCell::create(p_input, h, r);
  m.p_bwd = GRUCell::create(p_input, h, r);
  m.q_fwd = GRUCell::create(config.embed_dim, h, r);
  m.q_bwd = GRUCell::create(config.embed_dim, h, r);
  m.decoder = GRUCell::create(config.embed_dim + h2, h, r);
  m.w_d = Tensor::param_uniform({h, h2}, kInitBound, r);
  m.b_d = Tensor::param_uniform({h}, kInitBound, r);
  m.w_a = Tensor::param_uniform({h, h}, kInitBound, r);
  m.u_a = Tensor::param_uniform({h, h2}, kInitBound, r);
  m.v_a = Tensor::param_uniform({h}, kInitBound, r);
  m.w_r = Tensor::param_uniform({h2, config.embed_dim}, kInitBound, r);
  m.u_r = Tensor::param_uniform({h2, h2}, kInitBound, r);
  m.v_r = Tensor::param_uniform({h2, h}, kInitBound, r);
  m.w_o = Tensor::param_uniform({vocab_size, h}, kInitBound, r);
  return m;
}

ParamMap SynthesisModel::params() const {
  ParamMap p;
  p["words"] = words.weights;
  if (config.use_position_features) {
    p["feat_start"] = feat_start.weights;
    p["feat_end"] = feat_end.weights;
  }
  p_fwd.register_params(p, "p_fwd");
  p_bwd.register_params(p, "p_bwd");
  q_fwd.register_params(p, "q_fwd");
  q_bwd.register_params(p, "q_bwd");
  decoder.register_params(p, "decoder");
  p["w_d"] = w_d;
  p["b_d"] = b_d;
  p["w_a"] = w_a;
  p["u_a"] = u_a;
  p["v_a"] = v_a;
  p["w_r"] = w_r;
  p["u_r"] = u_r;
  p["v_r"] = v_r;
  p["w_o"] = w_o;
  return p;
}

SynthesisEncoding encode_with_features(const SynthesisModel& model,
                                       const Vocabulary& vocab,
                                       const TokenList& passage, int span_start,
                                       int span_end, const TokenList& question,
                                       bool training, Rng* rng) {
  const int n = static_cast<int>(passage.size());
  if (span_start < 0 || span_end < span_start || span_end >= n)
    throw DataError("encode_with_features: indicators (" +
                    std::to_string(span_start) + "," +
                    std::to_string(span_end) +
                    ") misaligned with passage length " + std::to_string(n));
  const SynthesisConfig& cfg = model.config;
  auto drop = [&](Tensor t) {
    if (training && cfg.dropout_rate > 0.0f)
      return dropout(t, cfg.dropout_rate, true, *rng);
    return t;
  };
  std::vector<Tensor> p_in;
  p_in.reserve(n);
  for (int t = 0; t < n; ++t) {
    Tensor word = embed_lookup(model.words, vocab.encode(passage[t]));
    if (cfg.use_position_features) {
      Tensor fs = embed_lookup(model.feat_start, t == span_start ? 1 : 0);
      Tensor fe = embed_lookup(model.feat_end, t == span_end ? 1 : 0);
      word = concat({word, fs, fe}, 0);
    }
    p_in.push_back(drop(word));
  }
  std::vector<Tensor> q_in;
  q_in.reserve(question.size());
  for (const std::string& tok : question)
    q_in.push_back(drop(embed_lookup(model.words, vocab.encode(tok))));
  if (q_in.empty())
    q_in.push_back(embed_lookup(model.words, Vocabulary::kUnk));

  BiGRUOutput p_enc = bigru_encode(model.p_fwd, model.p_bwd, p_in);
  BiGRUOutput q_enc = bigru_encode(model.q_fwd, model.q_bwd, q_in);

  SynthesisEncoding out;
  out.states = p_enc.states;
  out.states.insert(out.states.end(), q_enc.states.begin(),
                    q_enc.states.end());
  Tensor init_in = concat({p_enc.bwd_final, q_enc.bwd_final}, 0);
  out.init_state = tanh(add(matmul(model.w_d, init_in), model.b_d));
  return out;
}

DecoderStep decoder_step(const SynthesisModel& model, const Tensor& d_prev,
                         int prev_word_id, const Tensor& c_prev,
                         const std::vector<Tensor>& encoder_states) {
  Tensor w_emb = embed_lookup(model.words, prev_word_id);
  Tensor d_t = gru_step(model.decoder, d_prev, concat({w_emb, c_prev}, 0));

  // concatenate attention scored against d_{t-1}
  Tensor d_term = matmul(model.w_a, d_prev);
  std::vector<Tensor> scores;
  scores.reserve(encoder_states.size());
  for (const Tensor& h : encoder_states)
    scores.push_back(dot(model.v_a, tanh(add(d_term, matmul(model.u_a, h)))));
  Tensor weights = softmax(concat(scores, 0));
  const int n = static_cast<int>(encoder_states.size());
  const int dim = encoder_states[0].dim(0);
  Tensor c_t = reshape(
      matmul(reshape(weights, {1, n}), stack_rows(encoder_states)), {dim});

  Tensor readout = add(add(matmul(model.w_r, w_emb), matmul(model.u_r, c_t)),
                       matmul(model.v_r, d_t));
  Tensor m_t = maxout_pairs(readout);
  DecoderStep step;
  step.state = d_t;
  step.context = c_t;
  step.log_probs = log_softmax(matmul(model.w_o, m_t));
  return step;
}

Tensor synthesis_sequence_loss(const SynthesisModel& model,
                               const Vocabulary& vocab,
                               const SynthesisPair& pair, bool training,
                               Rng* rng) {
  if (pair.target.empty())
    throw DataError("synthesis loss: empty target sequence");
  SynthesisEncoding enc =
      encode_with_features(model, vocab, pair.passage, pair.span_start,
                           pair.span_end, pair.question, training, rng);
  std::vector<int> target = vocab.encode_all(pair.target);
  target.push_back(Vocabulary::kEos);
  Tensor d = enc.init_state;
  Tensor c = Tensor::zeros({2 * model.config.hidden});
  int prev = Vocabulary::kBos;
  Tensor loss = Tensor::scalar(0.0f);
  for (int id : target) {
    DecoderStep step = decoder_step(model, d, prev, c, enc.states);
    loss = sub(loss, slice(step.log_probs, 0, id, 1));
    d = step.state;
    c = step.context;
    prev = id;
  }
  return loss;
}

namespace {

Tensor detach(const Tensor& t) {
  return Tensor::from_vector(t.shape(), t.data());
}

}  // namespace

Hypothesis beam_search(const SynthesisModel& model,
                       const SynthesisEncoding& encoding, int beam_size,
                       int max_len) {
  if (beam_size < 1) throw ConfigError("beam_search: beam_size must be >= 1");
  if (max_len < 1) throw ConfigError("beam_search: max_len must be >= 1");

  struct Live {
    Hypothesis hyp;
    Tensor state;
    Tensor context;
    int prev = Vocabulary::kBos;
  };
  std::vector<Live> beam;
  beam.push_back({Hypothesis{}, detach(encoding.init_state),
                  Tensor::zeros({2 * model.config.hidden}),
                  Vocabulary::kBos});
  std::vector<Hypothesis> completed;

  for (int step_i = 0; step_i < max_len && !beam.empty(); ++step_i) {
    struct Candidate {
      size_t parent;
      int token;
      double log_prob;
    };
    std::vector<Candidate> candidates;
    std::vector<DecoderStep> steps(beam.size());
    for (size_t b = 0; b < beam.size(); ++b) {
      steps[b] = decoder_step(model, beam[b].state, beam[b].prev,
                              beam[b].context, encoding.states);
      const auto& lp = steps[b].log_probs.data();
      for (size_t t = 0; t < lp.size(); ++t) {
        if (t == Vocabulary::kPad || t == Vocabulary::kBos) continue;
        candidates.push_back({b, static_cast<int>(t),
                              beam[b].hyp.log_prob + lp[t]});
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) {
                       if (a.log_prob != b.log_prob)
                         return a.log_prob > b.log_prob;
                       return a.token < b.token;
                     });
    std::vector<Live> next;
    int slots = 0;  // retired hypotheses still consume a slot this step
    for (const Candidate& c : candidates) {
      if (slots >= beam_size) break;
      ++slots;
      Live child;
      child.hyp = beam[c.parent].hyp;
      child.hyp.tokens.push_back(c.token);
      child.hyp.log_prob = c.log_prob;
      if (c.token == Vocabulary::kEos) {
        child.hyp.finished_at = step_i;
        completed.push_back(child.hyp);
        continue;
      }
      child.state = detach(steps[c.parent].state);
      child.context = detach(steps[c.parent].context);
      child.prev = c.token;
      next.push_back(std::move(child));
    }
    beam = std::move(next);
  }
  for (const Live& l : beam) completed.push_back(l.hyp);
  if (completed.empty()) return Hypothesis{};
  return *std::min_element(
      completed.begin(), completed.end(),
      [](const Hypothesis& a, const Hypothesis& b) {
        if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
        const int fa = a.finished_at < 0 ? 1 << 30 : a.finished_at;
        const int fb = b.finished_at < 0 ? 1 << 30 : b.finished_at;
        if (fa != fb) return fa < fb;
        return a.tokens < b.tokens;
      });
}

TokenList generate_answer(const SynthesisModel& model, const Vocabulary& vocab,
                          const TokenList& passage, int span_start,
                          int span_end, const TokenList& question) {
  SynthesisEncoding enc = encode_with_features(model, vocab, passage,
                                               span_start, span_end, question);
  Hypothesis best =
      beam_search(model, enc, model.config.beam_size, model.config.max_len);
  TokenList out;
  for (int id : best.tokens) {
    if (id == Vocabulary::kEos) break;
    out.push_back(vocab.decode(id));
  }
  return out;
}

namespace {

constexpr int kMaxPhrase = 4;

// rule 1: drop the second copy of any immediately repeated word or phrase
TokenList collapse_repeats(TokenList tokens) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (int len = kMaxPhrase; len >= 1 && !changed; --len) {
      for (size_t i = 0; i + 2 * len <= tokens.size(); ++i) {
        if (std::equal(tokens.begin() + i, tokens.begin() + i + len,
                       tokens.begin() + i + len)) {
          tokens.erase(tokens.begin() + i + len,
                       tokens.begin() + i + 2 * len);
          changed = true;
          break;
        }
      }
    }
  }
  return tokens;
}

const std::string kUnkToken = "<unk>";

// earliest segment of source bounded by (left, right) with 1..kMaxPhrase
// tokens between; {-1,-1} when absent
std::pair<int, int> find_bounded(const TokenList& source,
                                 const std::string& left,
                                 const std::string& right) {
  const int n = static_cast<int>(source.size());
  for (int l = 0; l + 2 < n + 1; ++l) {
    if (source[l] != left) continue;
    for (int gap = 1; gap <= kMaxPhrase && l + gap + 1 < n; ++gap) {
      if (source[l + gap + 1] == right) return {l + 1, l + gap};
    }
  }
  return {-1, -1};
}

// rule 2: replace UNK / out-of-span runs with the segment sharing the same
// adjacent words, searching the span first and then the passage
TokenList repair_segments(const TokenList& tokens, const TokenList& span,
                          const TokenList& passage) {
  // Tokens grounded in the span or its passage are left alone; repairs
  // draw from those same sources, so repairing is stable under repetition.
  std::unordered_set<std::string> span_set(span.begin(), span.end());
  span_set.insert(passage.begin(), passage.end());
  TokenList out;
  size_t i = 0;
  while (i < tokens.size()) {
    const bool bad = tokens[i] == kUnkToken || !span_set.count(tokens[i]);
    if (!bad) {
      out.push_back(tokens[i++]);
      continue;
    }
    size_t j = i;
    while (j < tokens.size() &&
           (tokens[j] == kUnkToken || !span_set.count(tokens[j])) &&
           j - i < kMaxPhrase)
      ++j;
    // both neighbors required to anchor a repair
    if (i == 0 || j >= tokens.size()) {
      out.insert(out.end(), tokens.begin() + i, tokens.begin() + j);
      i = j;
      continue;
    }
    const std::string& left = tokens[i - 1];
    const std::string& right = tokens[j];
    auto [s, e] = find_bounded(span, left, right);
    const TokenList* source = &span;
    if (s < 0) {
      std::tie(s, e) = find_bounded(passage, left, right);
      source = &passage;
    }
    if (s >= 0)
      out.insert(out.end(), source->begin() + s, source->begin() + e + 1);
    else
      out.insert(out.end(), tokens.begin() + i, tokens.begin() + j);
    i = j;
  }
  return out;
}

}  // namespace

TokenList post_process(const TokenList& generated, const TokenList& span,
                       const TokenList& passage) {
  TokenList result = collapse_repeats(generated);
  for (int pass = 0; pass < 8; ++pass) {
    TokenList next = collapse_repeats(repair_segments(result, span, passage));
    if (next == result) break;
    result = std::move(next);
  }
  // rule 3: a bare UNK answer falls back to the extracted span, which is
  // given the same duplicate collapse as any other final answer
  const bool bare_unk =
      result.empty() || (result.size() == 1 && result[0] == kUnkToken);
  if (bare_unk && !span.empty()) return collapse_repeats(span);
  return result;
}

std::vector<SynthesisEpochStats> train_synthesis(
    SynthesisModel& model, const Vocabulary& vocab,
    const std::vector<SynthesisPair>& pairs,
    const SynthesisTrainOptions& options,
    const std::vector<SynthesisPair>* dev) {
  if (pairs.empty()) throw DataError("train_synthesis: empty training set");
  ParamMap params = model.params();
  AdaDeltaState opt;
  Rng rng = Rng(options.seed).split("train-synth");
  std::vector<size_t> order(pairs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<SynthesisEpochStats> history;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0.0;
    for (size_t b = 0; b < order.size(); b += options.batch_size) {
      const size_t end = std::min(order.size(),
                                  b + static_cast<size_t>(options.batch_size));
      const float inv = 1.0f / static_cast<float>(end - b);
      for (size_t i = b; i < end; ++i) {
        Tensor loss = synthesis_sequence_loss(model, vocab, pairs[order[i]],
                                              true, &rng);
        const float lv = loss.value();
        if (!std::isfinite(lv))
          throw TrainingError("non-finite synthesis loss at epoch " +
                              std::to_string(epoch) + ", batch " +
                              std::to_string(b / options.batch_size));
        epoch_loss += lv;
        backward(scale(loss, inv));
      }
      adadelta_step(params, opt, model.config.grad_clip);
    }
    SynthesisEpochStats stats;
    stats.epoch = epoch;
    stats.loss = epoch_loss / pairs.size();
    if (dev) {
      int em = 0;
      double rouge_sum = 0.0;
      for (const SynthesisPair& pair : *dev) {
        TokenList gen = generate_answer(model, vocab, pair.passage,
                                        pair.span_start, pair.span_end,
                                        pair.question);
        TokenList span(pair.passage.begin() + pair.span_start,
                       pair.passage.begin() + pair.span_end + 1);
        TokenList final = post_process(gen, span, pair.passage);
        if (final == pair.target) ++em;
        rouge_sum += rouge_l(final, {pair.target});
      }
      stats.dev_exact_match = static_cast<double>(em) / dev->size();
      stats.dev_rouge = rouge_sum / dev->size();
    }
    history.push_back(stats);
    if (options.early_stop_em > 0.0 && dev &&
        stats.dev_exact_match >= options.early_stop_em)
      break;
  }
  return history;
}

}  // namespace snet
