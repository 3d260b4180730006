#pragma once

#include <optional>
#include <string>
#include <vector>

#include "snet/config.hpp"
#include "snet/extraction.hpp"
#include "snet/metrics.hpp"
#include "snet/synthesis.hpp"

namespace snet {

// Command implementations, shared between the binary and the tests. Each
// reads inputs and writes artifacts per the RunConfig; all are
// deterministic given (inputs, seed).

void cmd_gen_corpus(const RunConfig& cfg);

std::vector<EpochStats> cmd_train_extract(const RunConfig& cfg);
std::vector<SynthesisEpochStats> cmd_train_synth(const RunConfig& cfg);

// Two-stage inference. cfg.ckpts holds one or more extraction checkpoints
// (ensembled when several) and at most one synthesis checkpoint,
// recognized by its kind; without a synthesis checkpoint the raw span is
// the answer. Writes one record per question to cfg.out.
void cmd_run(const RunConfig& cfg);

EvalReport cmd_eval(const RunConfig& cfg);

// Greedy dev-set ensemble selection; returns kept checkpoints in
// acceptance order.
std::vector<std::string> cmd_ensemble_select(const RunConfig& cfg);

struct LoadedExtraction {
  ExtractionSystem system;
  Vocabulary vocab;
};
struct LoadedSynthesis {
  SynthesisModel model;
  Vocabulary vocab;
};

LoadedExtraction load_extraction(const std::string& path);
LoadedSynthesis load_synthesis(const std::string& path);

Vocabulary build_dataset_vocab(const std::vector<RCExample>& examples,
                               size_t max_size);

struct RunRecord {
  long long query_id = 0;
  std::string span;
  std::string generated;
  std::string answer;
  std::vector<double> passage_scores;
};

std::vector<RunRecord> load_run_output(const std::string& path);

}  // namespace snet
