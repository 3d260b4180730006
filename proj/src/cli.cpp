#include "snet/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "snet/checkpoint.hpp"
#include "snet/errors.hpp"

namespace snet {

namespace {

std::string join_tokens(const TokenList& tokens) {
  std::string s;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) s += ' ';
    s += tokens[i];
  }
  return s;
}

// Deterministic ordered parallel map over [0, n).
template <typename Fn>
void parallel_for(size_t n, Fn&& fn) {
  const int threads = std::min<int>(thread_cap(), static_cast<int>(n));
  if (threads <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (size_t i = t; i < n; i += threads) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

ExtractionConfig extraction_config_from(const RunConfig& cfg) {
  ExtractionConfig ec;
  ec.hidden = cfg.hidden;
  ec.embed_dim = cfg.embed_dim;
  ec.char_embed_dim = cfg.char_embed_dim;
  ec.char_hidden = cfg.char_hidden;
  ec.use_char = cfg.use_char;
  ec.loss_weight_r =
      cfg.has_ablation("no-ranking") ? 1.0f : cfg.loss_weight_r;
  ec.dropout_rate = cfg.dropout;
  ec.grad_clip = cfg.grad_clip;
  ec.categorical_ce = cfg.has_ablation("categorical-ce");
  ec.bidirectional_match = cfg.has_ablation("bidirectional-match");
  ec.max_span_len = cfg.max_span_len;
  return ec;
}

std::map<std::string, std::string> extraction_meta(const ExtractionConfig& ec,
                                                   const std::string& mode) {
  std::map<std::string, std::string> m;
  m["mode"] = mode;
  m["hidden"] = std::to_string(ec.hidden);
  m["embed_dim"] = std::to_string(ec.embed_dim);
  m["char_embed_dim"] = std::to_string(ec.char_embed_dim);
  m["char_hidden"] = std::to_string(ec.char_hidden);
  m["use_char"] = ec.use_char ? "1" : "0";
  m["loss_weight_r"] = std::to_string(ec.loss_weight_r);
  m["categorical_ce"] = ec.categorical_ce ? "1" : "0";
  m["bidirectional_match"] = ec.bidirectional_match ? "1" : "0";
  m["max_span_len"] = std::to_string(ec.max_span_len);
  return m;
}

ExtractionConfig extraction_config_from_meta(
    const std::map<std::string, std::string>& m) {
  ExtractionConfig ec;
  auto get = [&](const char* k) -> const std::string& {
    auto it = m.find(k);
    if (it == m.end())
      throw CheckpointError(std::string("checkpoint missing meta key '") + k +
                            "'");
    return it->second;
  };
  ec.hidden = std::stoi(get("hidden"));
  ec.embed_dim = std::stoi(get("embed_dim"));
  ec.char_embed_dim = std::stoi(get("char_embed_dim"));
  ec.char_hidden = std::stoi(get("char_hidden"));
  ec.use_char = get("use_char") == "1";
  ec.loss_weight_r = std::stof(get("loss_weight_r"));
  ec.categorical_ce = get("categorical_ce") == "1";
  ec.bidirectional_match = get("bidirectional_match") == "1";
  ec.max_span_len = std::stoi(get("max_span_len"));
  return ec;
}

ParamMap prefixed(const ParamMap& params, const std::string& prefix) {
  ParamMap out;
  for (const auto& [k, v] : params) out[prefix + k] = v;
  return out;
}

void save_extraction(const ExtractionSystem& system, const Vocabulary& vocab,
                     const std::string& path) {
  const char* mode = system.mode == ExtractionAblation::kJoint ? "joint"
                     : system.mode == ExtractionAblation::kNoRanking
                         ? "no-ranking"
                         : "rank-then-extract";
  ParamMap tensors = system.model.params();
  if (system.ranker) {
    tensors = prefixed(tensors, "model.");
    ParamMap ranker = prefixed(system.ranker->params(), "ranker.");
    tensors.insert(ranker.begin(), ranker.end());
  }
  Checkpoint ckpt = snapshot("extraction",
                             extraction_meta(system.model.config, mode), vocab,
                             tensors);
  if (system.ranker)
    ckpt.meta["ranker_loss_weight_r"] =
        std::to_string(system.ranker->config.loss_weight_r);
  save_checkpoint(ckpt, path);
}

SynthesisConfig synthesis_config_from(const RunConfig& cfg) {
  SynthesisConfig sc;
  sc.hidden = cfg.hidden;
  sc.embed_dim = cfg.embed_dim;
  sc.feat_dim = cfg.feat_dim;
  sc.use_position_features = !cfg.has_ablation("no-position-features");
  sc.dropout_rate = cfg.dropout;
  sc.grad_clip = cfg.grad_clip;
  sc.beam_size = cfg.beam;
  sc.max_len = cfg.max_len;
  return sc;
}

void log_kv(std::initializer_list<std::pair<const char*, std::string>> kv) {
  bool first = true;
  for (const auto& [k, v] : kv) {
    std::cout << (first ? "" : " ") << k << "=" << v;
    first = false;
  }
  std::cout << "\n";
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

Vocabulary build_dataset_vocab(const std::vector<RCExample>& examples,
                               size_t max_size) {
  std::map<std::string, long long> counts;
  for (const RCExample& ex : examples) {
    for (const auto& t : ex.question) ++counts[t];
    for (const auto& p : ex.passages)
      for (const auto& t : p) ++counts[t];
    for (const auto& a : ex.answers)
      for (const auto& t : tokenize(a)) ++counts[t];
  }
  return Vocabulary::build(counts, max_size);
}

void cmd_gen_corpus(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.out.empty()) throw ConfigError("gen-corpus needs --out");
  CorpusSpec spec;
  spec.n_examples = cfg.corpus_examples;
  spec.vocab_size = cfg.corpus_vocab;
  spec.passage_len = cfg.passage_len;
  spec.k_passages = cfg.k_passages;
  spec.answer_len = cfg.answer_len;
  spec.distractor_overlap = cfg.distractor_overlap;
  spec.answer_style = cfg.answer_style == "yes-no" ? AnswerStyle::kYesNo
                      : cfg.answer_style == "span-plus-prefix"
                          ? AnswerStyle::kSpanPlusPrefix
                          : AnswerStyle::kExactSpan;
  save_dataset(generate_synthetic_corpus(spec, cfg.seed), cfg.out);
}

std::vector<EpochStats> cmd_train_extract(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.data.empty() || cfg.out.empty())
    throw ConfigError("train-extract needs --data and --out");
  std::vector<RCExample> examples = load_dataset(cfg.data);
  Vocabulary vocab = build_dataset_vocab(examples, cfg.vocab_size);
  std::vector<ExtractionPair> pairs =
      build_extraction_training_set(examples, cfg.extraction_threshold);
  if (pairs.empty())
    throw DataError("no training pair passed the gold-span ROUGE-L filter (" +
                    std::to_string(cfg.extraction_threshold) + ")");
  std::vector<RCExample> dev =
      cfg.dev_data.empty() ? examples : load_dataset(cfg.dev_data);

  ExtractionConfig ec = extraction_config_from(cfg);
  Rng rng(cfg.seed);
  TrainOptions opts;
  opts.epochs = cfg.epochs;
  opts.batch_size = cfg.batch;
  opts.seed = cfg.seed;

  ExtractionSystem system;
  std::vector<EpochStats> history;
  if (cfg.has_ablation("rank-then-extract")) {
    system.mode = ExtractionAblation::kRankThenExtract;
    ExtractionConfig rank_cfg = ec;
    rank_cfg.loss_weight_r = 0.0f;
    ExtractionConfig span_cfg = ec;
    span_cfg.loss_weight_r = 1.0f;
    system.ranker = ExtractionModel::create(rank_cfg, vocab.size(), rng);
    system.model = ExtractionModel::create(span_cfg, vocab.size(), rng);
    train_extraction(*system.ranker, vocab, pairs, opts, nullptr);
    history = train_extraction(system.model, vocab, pairs, opts, &dev);
  } else {
    system.mode = cfg.has_ablation("no-ranking") ? ExtractionAblation::kNoRanking
                                                 : ExtractionAblation::kJoint;
    system.model = ExtractionModel::create(ec, vocab.size(), rng);
    if (!cfg.embeddings.empty())
      load_pretrained_embeddings(const_cast<EmbeddingTable&>(system.model.words),
                                 vocab, cfg.embeddings);
    history = train_extraction(system.model, vocab, pairs, opts, &dev);
  }
  for (const EpochStats& s : history)
    log_kv({{"epoch", std::to_string(s.epoch)},
            {"loss", fmt(s.loss)},
            {"rouge", fmt(s.dev_rouge)},
            {"p_at_1", fmt(s.dev_p_at_1)}});
  save_extraction(system, vocab, cfg.out);
  return history;
}

LoadedExtraction load_extraction(const std::string& path) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.kind != "extraction")
    throw CheckpointError("checkpoint '" + path + "' is of kind '" +
                          ckpt.kind + "', expected extraction");
  ExtractionConfig ec = extraction_config_from_meta(ckpt.meta);
  LoadedExtraction out;
  out.vocab = ckpt.vocab;
  Rng rng(0);
  const std::string& mode = ckpt.meta.at("mode");
  if (mode == "rank-then-extract") {
    out.system.mode = ExtractionAblation::kRankThenExtract;
    ExtractionConfig rank_cfg = ec;
    rank_cfg.loss_weight_r = std::stof(ckpt.meta.at("ranker_loss_weight_r"));
    out.system.model = ExtractionModel::create(ec, ckpt.vocab.size(), rng);
    out.system.ranker =
        ExtractionModel::create(rank_cfg, ckpt.vocab.size(), rng);
    Checkpoint model_part, ranker_part;
    model_part.vocab = ckpt.vocab;
    ranker_part.vocab = ckpt.vocab;
    for (const auto& [name, sv] : ckpt.tensors) {
      if (name.rfind("model.", 0) == 0)
        model_part.tensors[name.substr(6)] = sv;
      else if (name.rfind("ranker.", 0) == 0)
        ranker_part.tensors[name.substr(7)] = sv;
    }
    ParamMap mp = out.system.model.params();
    apply_tensors(model_part, mp);
    ParamMap rp = out.system.ranker->params();
    apply_tensors(ranker_part, rp);
  } else {
    out.system.mode = mode == "no-ranking" ? ExtractionAblation::kNoRanking
                                           : ExtractionAblation::kJoint;
    out.system.model = ExtractionModel::create(ec, ckpt.vocab.size(), rng);
    ParamMap mp = out.system.model.params();
    apply_tensors(ckpt, mp);
  }
  return out;
}

std::vector<SynthesisEpochStats> cmd_train_synth(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.data.empty() || cfg.out.empty())
    throw ConfigError("train-synth needs --data and --out");
  std::vector<RCExample> examples = load_dataset(cfg.data);
  Vocabulary vocab = build_dataset_vocab(examples, cfg.vocab_size);

  std::optional<LoadedExtraction> extraction;
  std::optional<SpanPredictor> predictor;
  if (!cfg.ckpts.empty()) {
    extraction = load_extraction(cfg.ckpts[0]);
    predictor = [&](const RCExample& ex) {
      return predict_span(extraction->system, extraction->vocab, ex).span;
    };
  }
  std::vector<SynthesisPair> pairs = build_synthesis_training_set(
      examples, cfg.synthesis_threshold,
      predictor ? &*predictor : nullptr);
  if (pairs.empty())
    throw DataError("no synthesis pair passed the gold-span ROUGE-L filter (" +
                    std::to_string(cfg.synthesis_threshold) + ")");

  SynthesisConfig sc = synthesis_config_from(cfg);
  Rng rng(cfg.seed);
  SynthesisModel model = SynthesisModel::create(sc, vocab.size(), rng);
  SynthesisTrainOptions opts;
  opts.epochs = cfg.epochs;
  opts.batch_size = cfg.batch;
  opts.seed = cfg.seed;

  std::optional<std::vector<SynthesisPair>> dev;
  if (!cfg.dev_data.empty())
    dev = build_synthesis_training_set(load_dataset(cfg.dev_data),
                                       cfg.synthesis_threshold, nullptr);
  std::vector<SynthesisEpochStats> history = train_synthesis(
      model, vocab, pairs, opts, dev ? &*dev : nullptr);
  for (const SynthesisEpochStats& s : history)
    log_kv({{"epoch", std::to_string(s.epoch)},
            {"loss", fmt(s.loss)},
            {"rouge", fmt(s.dev_rouge)}});

  std::map<std::string, std::string> meta;
  meta["hidden"] = std::to_string(sc.hidden);
  meta["embed_dim"] = std::to_string(sc.embed_dim);
  meta["feat_dim"] = std::to_string(sc.feat_dim);
  meta["use_position_features"] = sc.use_position_features ? "1" : "0";
  meta["beam_size"] = std::to_string(sc.beam_size);
  meta["max_len"] = std::to_string(sc.max_len);
  save_checkpoint(snapshot("synthesis", meta, vocab, model.params()), cfg.out);
  return history;
}

LoadedSynthesis load_synthesis(const std::string& path) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.kind != "synthesis")
    throw CheckpointError("checkpoint '" + path + "' is of kind '" +
                          ckpt.kind + "', expected synthesis");
  SynthesisConfig sc;
  sc.hidden = std::stoi(ckpt.meta.at("hidden"));
  sc.embed_dim = std::stoi(ckpt.meta.at("embed_dim"));
  sc.feat_dim = std::stoi(ckpt.meta.at("feat_dim"));
  sc.use_position_features = ckpt.meta.at("use_position_features") == "1";
  sc.beam_size = std::stoi(ckpt.meta.at("beam_size"));
  sc.max_len = std::stoi(ckpt.meta.at("max_len"));
  Rng rng(0);
  LoadedSynthesis out{SynthesisModel::create(sc, ckpt.vocab.size(), rng),
                      ckpt.vocab};
  ParamMap mp = out.model.params();
  apply_tensors(ckpt, mp);
  return out;
}

void cmd_run(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.data.empty() || cfg.out.empty() || cfg.ckpts.empty())
    throw ConfigError("run needs --data, --out, and at least one --ckpt");
  std::vector<LoadedExtraction> extractors;
  std::optional<LoadedSynthesis> synthesis;
  for (const std::string& path : cfg.ckpts) {
    Checkpoint probe = load_checkpoint(path);
    if (probe.kind == "synthesis") {
      if (synthesis)
        throw ConfigError("run accepts at most one synthesis checkpoint");
      synthesis = load_synthesis(path);
    } else {
      extractors.push_back(load_extraction(path));
    }
  }
  if (extractors.empty())
    throw ConfigError("run needs at least one extraction checkpoint");
  for (size_t i = 1; i < extractors.size(); ++i)
    if (extractors[i].vocab.tokens() != extractors[0].vocab.tokens())
      throw CheckpointError(
          "extraction checkpoints disagree on their vocabulary ('" +
          cfg.ckpts[0] + "' vs '" + cfg.ckpts[i] + "')");

  std::vector<RCExample> examples = load_dataset(cfg.data);
  std::vector<RunRecord> records(examples.size());
  parallel_for(examples.size(), [&](size_t i) {
    const RCExample& ex = examples[i];
    std::vector<SpanPrediction> preds;
    preds.reserve(extractors.size());
    for (const LoadedExtraction& le : extractors)
      preds.push_back(predict_span(le.system, le.vocab, ex));
    SpanPrediction pred =
        preds.size() == 1
            ? preds[0]
            : ensemble_combine(preds, cfg.max_span_len);
    auto [seq, off] = concat_passages(ex);
    const int passage = off.passage_of(pred.span.first);
    const int p_begin = off.starts[passage];
    const int p_end =
        p_begin + static_cast<int>(ex.passages[passage].size()) - 1;
    const int span_end = std::min(pred.span.second, p_end);
    const int local_start = pred.span.first - p_begin;
    const int local_end = span_end - p_begin;
    TokenList span(seq.begin() + pred.span.first,
                   seq.begin() + span_end + 1);

    RunRecord rec;
    rec.query_id = ex.query_id;
    rec.span = join_tokens(span);
    rec.passage_scores.assign(pred.passage_scores.begin(),
                              pred.passage_scores.end());
    if (synthesis) {
      TokenList generated = generate_answer(
          synthesis->model, synthesis->vocab, ex.passages[passage],
          local_start, local_end, ex.question);
      rec.generated = join_tokens(generated);
      rec.answer = join_tokens(
          post_process(generated, span, ex.passages[passage]));
    } else {
      rec.answer = rec.span;
    }
    records[i] = std::move(rec);
  });

  std::ofstream out(cfg.out);
  if (!out) throw DataError("cannot open output file: " + cfg.out);
  for (const RunRecord& rec : records) {
    nlohmann::json j;
    j["query_id"] = rec.query_id;
    j["span"] = rec.span;
    j["generated"] = rec.generated;
    j["answer"] = rec.answer;
    j["passage_scores"] = rec.passage_scores;
    out << j.dump() << "\n";
  }
}

std::vector<RunRecord> load_run_output(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open run output: " + path);
  std::vector<RunRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("run output line " + std::to_string(line_no) + ": " +
                      e.what());
    }
    RunRecord rec;
    rec.query_id = j.at("query_id").get<long long>();
    rec.span = j.value("span", "");
    rec.generated = j.value("generated", "");
    rec.answer = j.at("answer").get<std::string>();
    if (j.contains("passage_scores"))
      rec.passage_scores = j["passage_scores"].get<std::vector<double>>();
    out.push_back(std::move(rec));
  }
  return out;
}

EvalReport cmd_eval(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.data.empty() || cfg.answers.empty())
    throw ConfigError("eval needs --data and --answers");
  std::vector<RCExample> examples = load_dataset(cfg.data);
  std::map<long long, const RCExample*> by_id;
  for (const RCExample& ex : examples) by_id[ex.query_id] = &ex;
  std::vector<RunRecord> records = load_run_output(cfg.answers);

  std::vector<long long> unmatched;
  for (const RunRecord& rec : records)
    if (!by_id.count(rec.query_id)) unmatched.push_back(rec.query_id);
  if (!unmatched.empty()) {
    std::string ids;
    for (long long id : unmatched) ids += (ids.empty() ? "" : ", ") +
                                          std::to_string(id);
    throw DataError("query ids missing from the dataset: " + ids);
  }

  EvalReport report;
  std::vector<std::pair<TokenList, std::vector<TokenList>>> bleu_pairs;
  std::vector<std::pair<std::vector<double>, int>> rankings;
  std::vector<double> oracle_scores, eval_scores;
  for (const RunRecord& rec : records) {
    const RCExample& ex = *by_id.at(rec.query_id);
    std::vector<TokenList> refs;
    for (const auto& a : ex.answers) refs.push_back(tokenize(a));
    TokenList hyp = tokenize(rec.answer);
    const double r = rouge_l(hyp, refs);
    report.per_question.push_back({rec.query_id, r});
    bleu_pairs.push_back({hyp, refs});
    oracle_scores.push_back(select_gold_span(ex).rouge);
    eval_scores.push_back(r);
    if (!rec.passage_scores.empty() && ex.selected_passage)
      rankings.push_back({rec.passage_scores, *ex.selected_passage});
  }
  double rouge_sum = 0.0;
  for (const auto& [id, r] : report.per_question) rouge_sum += r;
  report.rouge_l_mean =
      report.per_question.empty() ? 0.0
                                  : rouge_sum / report.per_question.size();
  report.bleu_1 = bleu_1_corpus(bleu_pairs);
  if (!rankings.empty()) report.p_at_1 = precision_at_1(rankings);
  report.bucket_table = bucket_by_upper_bound(oracle_scores, eval_scores);

  if (!cfg.out.empty()) {
    std::ofstream out(cfg.out);
    if (!out) throw DataError("cannot open report file: " + cfg.out);
    nlohmann::json j;
    j["rouge_l"] = report.rouge_l_mean;
    j["bleu_1"] = report.bleu_1;
    if (report.p_at_1 >= 0.0) j["p_at_1"] = report.p_at_1;
    nlohmann::json buckets = nlohmann::json::array();
    for (const BucketRow& row : report.bucket_table)
      buckets.push_back({{"bucket", row.label},
                         {"fraction", row.fraction},
                         {"mean_rouge", row.mean_rouge},
                         {"count", row.count}});
    j["buckets"] = buckets;
    nlohmann::json per_q = nlohmann::json::array();
    for (const auto& [id, r] : report.per_question)
      per_q.push_back({{"query_id", id}, {"rouge_l", r}});
    j["per_question"] = per_q;
    out << j.dump() << "\n\n" << format_report_table(report);
  }
  std::cout << format_report_table(report);
  return report;
}

std::vector<std::string> cmd_ensemble_select(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.data.empty() || cfg.ckpts.empty())
    throw ConfigError("ensemble-select needs --data and --ckpt candidates");
  std::vector<RCExample> dev = load_dataset(cfg.data);

  struct Candidate {
    std::string path;
    LoadedExtraction loaded;
    double solo_rouge = 0.0;
    std::vector<SpanPrediction> preds;
  };
  std::vector<Candidate> candidates;
  for (const std::string& path : cfg.ckpts) {
    Candidate c;
    c.path = path;
    c.loaded = load_extraction(path);
    if (!candidates.empty() &&
        c.loaded.vocab.tokens() != candidates[0].loaded.vocab.tokens())
      throw CheckpointError("candidate '" + path +
                            "' disagrees on the vocabulary");
    candidates.push_back(std::move(c));
  }
  for (Candidate& c : candidates) {
    double sum = 0.0;
    for (const RCExample& ex : dev) {
      SpanPrediction pred = predict_span(c.loaded.system, c.loaded.vocab, ex);
      auto [seq, off] = concat_passages(ex);
      TokenList span(seq.begin() + pred.span.first,
                     seq.begin() + pred.span.second + 1);
      std::vector<TokenList> refs;
      for (const auto& a : ex.answers) refs.push_back(tokenize(a));
      sum += rouge_l(span, refs);
      c.preds.push_back(std::move(pred));
    }
    c.solo_rouge = sum / dev.size();
  }
  // high to low; checkpoint filename breaks ties
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) {
                     if (a.solo_rouge != b.solo_rouge)
                       return a.solo_rouge > b.solo_rouge;
                     return a.path < b.path;
                   });

  auto combined_rouge = [&](const std::vector<const Candidate*>& members) {
    double sum = 0.0;
    for (size_t i = 0; i < dev.size(); ++i) {
      std::vector<SpanPrediction> preds;
      for (const Candidate* m : members) preds.push_back(m->preds[i]);
      SpanPrediction combined =
          preds.size() == 1 ? preds[0] : ensemble_combine(preds);
      auto [seq, off] = concat_passages(dev[i]);
      TokenList span(seq.begin() + combined.span.first,
                     seq.begin() + combined.span.second + 1);
      std::vector<TokenList> refs;
      for (const auto& a : dev[i].answers) refs.push_back(tokenize(a));
      sum += rouge_l(span, refs);
    }
    return sum / dev.size();
  };

  std::vector<const Candidate*> kept;
  std::vector<std::string> selected;
  double best = -1.0;
  for (const Candidate& c : candidates) {
    std::vector<const Candidate*> trial = kept;
    trial.push_back(&c);
    const double r = combined_rouge(trial);
    if (r > best) {
      best = r;
      kept = std::move(trial);
      selected.push_back(c.path);
      log_kv({{"kept", c.path}, {"rouge", fmt(r)}});
    } else {
      log_kv({{"discarded", c.path}, {"rouge", fmt(r)}});
    }
  }
  if (!cfg.out.empty()) {
    std::ofstream out(cfg.out);
    for (const std::string& s : selected) out << s << "\n";
  }
  return selected;
}

}  // namespace snet
