#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "snet/metrics.hpp"
#include "snet/rng.hpp"

namespace snet {

// --- tokenization ---

// Lowercased whitespace/punctuation split. Apostrophes stay inside words
// ("5'6"); a period stays inside a token only between two digits
// ("167.64"); every other punctuation character is its own token.
TokenList tokenize(const std::string& text);

struct TokenSpan {
  std::string token;
  size_t char_start = 0;  // offset into the original text
  size_t char_end = 0;
};
std::vector<TokenSpan> tokenize_with_offsets(const std::string& text);

// --- vocabulary ---

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;

  Vocabulary();

  // Frequency-ranked, lexicographic tie-break, truncated to max_size
  // (reserved ids included in the budget).
  static Vocabulary build(const std::map<std::string, long long>& counts,
                          size_t max_size);

  int encode(const std::string& token) const;  // OOV -> kUnk
  std::vector<int> encode_all(const TokenList& tokens) const;
  const std::string& decode(int id) const;
  size_t size() const { return id_to_token_.size(); }

  // Insertion-ordered token list past the reserved ids (for serialization).
  const std::vector<std::string>& tokens() const { return id_to_token_; }
  // Rebuild from a serialized id->token list (must start with the
  // reserved tokens).
  static Vocabulary from_tokens(std::vector<std::string> id_to_token);

 private:
  std::map<std::string, int> token_to_id_;
  std::vector<std::string> id_to_token_;
};

// --- dataset ---

struct RCExample {
  long long query_id = 0;
  TokenList question;
  std::vector<TokenList> passages;
  std::vector<std::string> answers;  // reference strings
  std::optional<int> selected_passage;
};

// JSON-lines reader in the MS-MARCO field shape: query_id, query,
// passages [{passage_text, is_selected}], answers. First is_selected=1
// passage wins. Throws DataError with the line number on malformed input.
std::vector<RCExample> load_dataset(const std::string& path);
void save_dataset(const std::vector<RCExample>& examples,
                  const std::string& path);

enum class AnswerStyle { kExactSpan, kSpanPlusPrefix, kYesNo };

struct CorpusSpec {
  int n_examples = 50;
  int vocab_size = 50;
  int passage_len = 10;
  int k_passages = 2;
  AnswerStyle answer_style = AnswerStyle::kExactSpan;
  int answer_len = 3;
  // fraction of question tokens copied into distractor passages, making
  // incidental span localization harder
  float distractor_overlap = 0.0f;
};

std::vector<RCExample> generate_synthetic_corpus(const CorpusSpec& spec,
                                                 uint64_t seed);

// --- passage concatenation ---

struct PassageOffsets {
  std::vector<int> starts;  // concatenated start of each passage
  int total = 0;

  std::pair<int, int> to_local(int global) const;  // (passage, local)
  int to_global(int passage, int local) const;
  int passage_of(int global) const;
};

std::pair<TokenList, PassageOffsets> concat_passages(const RCExample& example);

// --- gold-span oracle ---

struct GoldSpan {
  int start = 0;
  int end = 0;  // inclusive, concatenated offsets
  double rouge = 0.0;
};

// Argmax of ROUGE-L(span, best reference) over spans of the concatenated
// sequence; ties prefer the shorter span, then the earlier start. Candidate
// length capped at max(2 * longest reference length, 10) unless
// max_span_len overrides it; pass 0 to disable the cap (the brute-force
// oracle the tests compare against).
GoldSpan select_gold_span(const RCExample& example, int max_span_len = -1);

struct ExtractionPair {
  const RCExample* example = nullptr;
  GoldSpan gold;
};

std::vector<ExtractionPair> build_extraction_training_set(
    const std::vector<RCExample>& examples, double threshold = 0.7);

enum class SynthesisSource { kGoldSpan, kModelExtracted };

struct SynthesisPair {
  long long query_id = 0;
  TokenList question;
  TokenList passage;
  int span_start = 0;  // local to the passage
  int span_end = 0;
  TokenList target;
  SynthesisSource source = SynthesisSource::kGoldSpan;
};

// Predicted concatenated-sequence span for part-2 construction.
using SpanPredictor =
    std::function<std::pair<int, int>(const RCExample&)>;

// Part 1: gold spans with ROUGE-L > threshold, target = best reference.
// Part 2 (when a predictor is given): the predicted span projected into
// the passage holding its start, end clamped to that passage.
std::vector<SynthesisPair> build_synthesis_training_set(
    const std::vector<RCExample>& examples, double threshold = 0.5,
    const SpanPredictor* predictor = nullptr);

}  // namespace snet
