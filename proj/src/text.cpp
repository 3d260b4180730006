#include "snet/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "snet/errors.hpp"

namespace snet {

namespace {

bool is_word_char(const std::string& text, size_t i) {
  unsigned char c = text[i];
  if (std::isalnum(c) || c == '\'') return true;
  // decimal point inside a number
  if (c == '.' && i > 0 && i + 1 < text.size() &&
      std::isdigit(static_cast<unsigned char>(text[i - 1])) &&
      std::isdigit(static_cast<unsigned char>(text[i + 1])))
    return true;
  return false;
}

}  // namespace

std::vector<TokenSpan> tokenize_with_offsets(const std::string& text) {
  std::vector<TokenSpan> out;
  size_t i = 0;
  while (i < text.size()) {
    unsigned char c = text[i];
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    if (is_word_char(text, i)) {
      size_t start = i;
      std::string tok;
      while (i < text.size() && is_word_char(text, i)) {
        tok.push_back(static_cast<char>(
            std::tolower(static_cast<unsigned char>(text[i]))));
        ++i;
      }
      out.push_back({std::move(tok), start, i});
    } else {
      out.push_back({std::string(1, static_cast<char>(std::tolower(c))), i,
                     i + 1});
      ++i;
    }
  }
  return out;
}

TokenList tokenize(const std::string& text) {
  TokenList out;
  for (auto& span : tokenize_with_offsets(text)) out.push_back(span.token);
  return out;
}

static const char* kReserved[4] = {"<pad>", "<unk>", "<bos>", "<eos>"};

Vocabulary::Vocabulary() {
  for (int i = 0; i < 4; ++i) {
    id_to_token_.emplace_back(kReserved[i]);
    token_to_id_[kReserved[i]] = i;
  }
}

Vocabulary Vocabulary::build(const std::map<std::string, long long>& counts,
                             size_t max_size) {
  if (max_size < 4)
    throw ConfigError("vocabulary max_size must be at least 4");
  std::vector<std::pair<std::string, long long>> ranked(counts.begin(),
                                                        counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) {
                     if (a.second != b.second) return a.second > b.second;
                     return a.first < b.first;
                   });
  Vocabulary v;
  for (const auto& [tok, cnt] : ranked) {
    if (v.id_to_token_.size() >= max_size) break;
    if (v.token_to_id_.count(tok)) continue;
    v.token_to_id_[tok] = static_cast<int>(v.id_to_token_.size());
    v.id_to_token_.push_back(tok);
  }
  return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> id_to_token) {
  if (id_to_token.size() < 4)
    throw DataError("vocabulary token list shorter than the reserved block");
  for (int i = 0; i < 4; ++i)
    if (id_to_token[i] != kReserved[i])
      throw DataError("vocabulary reserved token mismatch at id " +
                      std::to_string(i));
  Vocabulary v;
  v.id_to_token_ = std::move(id_to_token);
  v.token_to_id_.clear();
  for (size_t i = 0; i < v.id_to_token_.size(); ++i)
    v.token_to_id_[v.id_to_token_[i]] = static_cast<int>(i);
  return v;
}

int Vocabulary::encode(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

std::vector<int> Vocabulary::encode_all(const TokenList& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(encode(t));
  return ids;
}

const std::string& Vocabulary::decode(int id) const {
  if (id < 0 || id >= static_cast<int>(id_to_token_.size()))
    throw DataError("vocabulary id out of range: " + std::to_string(id));
  return id_to_token_[id];
}

std::vector<RCExample> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path);
  std::vector<RCExample> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("line " + std::to_string(line_no) +
                      ": malformed record: " + e.what());
    }
    auto require = [&](const char* field) -> const nlohmann::json& {
      if (!j.contains(field))
        throw DataError("line " + std::to_string(line_no) +
                        ": missing field '" + field + "'");
      return j[field];
    };
    RCExample ex;
    ex.query_id = require("query_id").get<long long>();
    ex.question = tokenize(require("query").get<std::string>());
    const auto& answers = require("answers");
    for (const auto& a : answers) ex.answers.push_back(a.get<std::string>());
    const auto& passages = require("passages");
    for (const auto& p : passages) {
      if (!p.contains("passage_text"))
        throw DataError("line " + std::to_string(line_no) +
                        ": missing field 'passage_text'");
      TokenList toks = tokenize(p["passage_text"].get<std::string>());
      if (toks.empty()) continue;  // invariant: passages nonempty
      bool selected = p.contains("is_selected") &&
                      p["is_selected"].get<int>() != 0;
      if (selected && !ex.selected_passage)
        ex.selected_passage = static_cast<int>(ex.passages.size());
      ex.passages.push_back(std::move(toks));
    }
    if (ex.passages.empty())
      throw DataError("line " + std::to_string(line_no) +
                      ": record has no nonempty passage");
    out.push_back(std::move(ex));
  }
  return out;
}

static std::string join_tokens(const TokenList& tokens) {
  std::string s;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) s += ' ';
    s += tokens[i];
  }
  return s;
}

void save_dataset(const std::vector<RCExample>& examples,
                  const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file: " + path);
  for (const RCExample& ex : examples) {
    nlohmann::json j;
    j["query_id"] = ex.query_id;
    j["query"] = join_tokens(ex.question);
    j["answers"] = ex.answers;
    nlohmann::json passages = nlohmann::json::array();
    for (size_t i = 0; i < ex.passages.size(); ++i) {
      passages.push_back(
          {{"passage_text", join_tokens(ex.passages[i])},
           {"is_selected",
            ex.selected_passage && *ex.selected_passage == static_cast<int>(i)
                ? 1
                : 0}});
    }
    j["passages"] = passages;
    out << j.dump() << "\n";
  }
}

std::vector<RCExample> generate_synthetic_corpus(const CorpusSpec& spec,
                                                 uint64_t seed) {
  if (spec.n_examples < 1 || spec.vocab_size < 1 || spec.passage_len < 1 ||
      spec.k_passages < 1 || spec.answer_len < 1)
    throw ConfigError("generate_synthetic_corpus: sizes must be positive");
  Rng rng = Rng(seed).split("corpus");
  const int answer_len = std::min(spec.answer_len, spec.passage_len);
  auto word = [&](size_t i) { return "w" + std::to_string(i); };
  std::vector<RCExample> out;
  for (int e = 0; e < spec.n_examples; ++e) {
    RCExample ex;
    ex.query_id = e + 1;
    TokenList answer;
    for (int i = 0; i < answer_len; ++i)
      answer.push_back(word(rng.index(spec.vocab_size)));
    const int selected = static_cast<int>(rng.index(spec.k_passages));
    ex.selected_passage = selected;
    const int plant =
        static_cast<int>(rng.index(spec.passage_len - answer_len + 1));
    for (int p = 0; p < spec.k_passages; ++p) {
      TokenList toks;
      for (int i = 0; i < spec.passage_len; ++i)
        toks.push_back(word(rng.index(spec.vocab_size)));
      if (p == selected) {
        if (spec.answer_style == AnswerStyle::kYesNo) {
          toks[plant] = rng.bernoulli(0.5) ? "cueyes" : "cueno";
        } else {
          for (int i = 0; i < answer_len; ++i) toks[plant + i] = answer[i];
        }
      } else if (spec.distractor_overlap > 0.0f) {
        int n_copy = static_cast<int>(spec.distractor_overlap * answer_len);
        for (int i = 0; i < n_copy && i < spec.passage_len; ++i)
          toks[i] = answer[i];
      }
      ex.passages.push_back(std::move(toks));
    }
    // question carries the answer tokens plus noise
    if (spec.answer_style == AnswerStyle::kYesNo) {
      ex.question = {"is", "it"};
      ex.question.push_back(word(rng.index(spec.vocab_size)));
      const std::string& cue = ex.passages[selected][plant];
      ex.answers = {cue == "cueyes" ? "yes" : "no"};
    } else {
      ex.question = answer;
      ex.question.push_back(word(rng.index(spec.vocab_size)));
      if (spec.answer_style == AnswerStyle::kSpanPlusPrefix) {
        TokenList full = {"it", "is"};
        full.insert(full.end(), answer.begin(), answer.end());
        ex.answers = {join_tokens(full)};
      } else {
        ex.answers = {join_tokens(answer)};
      }
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::pair<int, int> PassageOffsets::to_local(int global) const {
  const int p = passage_of(global);
  return {p, global - starts[p]};
}

int PassageOffsets::to_global(int passage, int local) const {
  return starts[passage] + local;
}

int PassageOffsets::passage_of(int global) const {
  if (global < 0 || global >= total)
    throw DataError("concatenated index out of range: " +
                    std::to_string(global));
  int p = 0;
  while (p + 1 < static_cast<int>(starts.size()) && starts[p + 1] <= global)
    ++p;
  return p;
}

std::pair<TokenList, PassageOffsets> concat_passages(const RCExample& example) {
  TokenList seq;
  PassageOffsets off;
  for (const TokenList& p : example.passages) {
    off.starts.push_back(static_cast<int>(seq.size()));
    seq.insert(seq.end(), p.begin(), p.end());
  }
  off.total = static_cast<int>(seq.size());
  return {std::move(seq), std::move(off)};
}

GoldSpan select_gold_span(const RCExample& example, int max_span_len) {
  std::vector<TokenList> refs;
  for (const std::string& a : example.answers) {
    TokenList t = tokenize(a);
    if (!t.empty()) refs.push_back(std::move(t));
  }
  if (refs.empty())
    throw DataError("select_gold_span: no nonempty reference answer");
  auto [seq, off] = concat_passages(example);
  const int n = static_cast<int>(seq.size());
  int cap = max_span_len;
  if (cap < 0) {
    size_t longest = 0;
    for (const auto& r : refs) longest = std::max(longest, r.size());
    cap = std::max<int>(2 * static_cast<int>(longest), 10);
  }
  if (cap == 0) cap = n;
  GoldSpan best{0, 0, -1.0};
  int best_len = 0;
  TokenList span;
  for (int start = 0; start < n; ++start) {
    span.clear();
    for (int len = 1; len <= cap && start + len <= n; ++len) {
      span.push_back(seq[start + len - 1]);
      const double r = rouge_l(span, refs);
      if (r > best.rouge || (r == best.rouge && len < best_len)) {
        best = {start, start + len - 1, r};
        best_len = len;
      }
    }
  }
  return best;
}

std::vector<ExtractionPair> build_extraction_training_set(
    const std::vector<RCExample>& examples, double threshold) {
  std::vector<ExtractionPair> out;
  for (const RCExample& ex : examples) {
    GoldSpan g = select_gold_span(ex);
    if (g.rouge > threshold) out.push_back({&ex, g});
  }
  return out;
}

namespace {

// Reference with the highest ROUGE-L against the span; first on ties.
TokenList best_reference(const RCExample& ex, const TokenList& span) {
  TokenList best;
  double best_score = -1.0;
  for (const std::string& a : ex.answers) {
    TokenList ref = tokenize(a);
    if (ref.empty()) continue;
    double s = span.empty() ? 0.0 : rouge_l(span, {ref});
    if (s > best_score) {
      best_score = s;
      best = std::move(ref);
    }
  }
  return best;
}

SynthesisPair project_span(const RCExample& ex, int start, int end,
                           SynthesisSource source) {
  auto [seq, off] = concat_passages(ex);
  const int p = off.passage_of(start);
  const int p_begin = off.starts[p];
  const int p_end = p_begin + static_cast<int>(ex.passages[p].size()) - 1;
  // spans are normalized into a single passage: the one holding the start
  const int clamped_end = std::min(end, p_end);
  TokenList span(seq.begin() + start, seq.begin() + clamped_end + 1);
  SynthesisPair pair;
  pair.query_id = ex.query_id;
  pair.question = ex.question;
  pair.passage = ex.passages[p];
  pair.span_start = start - p_begin;
  pair.span_end = clamped_end - p_begin;
  pair.target = best_reference(ex, span);
  pair.source = source;
  return pair;
}

}  // namespace

std::vector<SynthesisPair> build_synthesis_training_set(
    const std::vector<RCExample>& examples, double threshold,
    const SpanPredictor* predictor) {
  std::vector<SynthesisPair> out;
  for (const RCExample& ex : examples) {
    GoldSpan g = select_gold_span(ex);
    if (g.rouge > threshold) {
      out.push_back(project_span(ex, g.start, g.end,
                                 SynthesisSource::kGoldSpan));
    }
  }
  if (predictor) {
    for (const RCExample& ex : examples) {
      auto [start, end] = (*predictor)(ex);
      out.push_back(project_span(ex, start, end,
                                 SynthesisSource::kModelExtracted));
    }
  }
  return out;
}

}  // namespace snet
