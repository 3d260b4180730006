#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>

#include "snet/errors.hpp"
#include "snet/metrics.hpp"
#include "snet/text.hpp"

using namespace snet;

namespace {

std::string write_temp(const std::string& contents) {
  static int counter = 0;
  std::string path = "test_text_tmp_" + std::to_string(counter++) + ".jsonl";
  std::ofstream out(path);
  out << contents;
  return path;
}

// Uncapped exhaustive search over every span, used as the oracle for the
// production candidate-capped scan.
GoldSpan brute_force_gold(const RCExample& example) {
  auto [tokens, offsets] = concat_passages(example);
  std::vector<TokenList> refs;
  for (const auto& a : example.answers) refs.push_back(tokenize(a));
  GoldSpan best;
  best.rouge = -1.0;
  for (int s = 0; s < static_cast<int>(tokens.size()); ++s) {
    for (int e = s; e < static_cast<int>(tokens.size()); ++e) {
      TokenList span(tokens.begin() + s, tokens.begin() + e + 1);
      const double r = rouge_l(span, refs);
      const int len = e - s + 1;
      const int best_len = best.end - best.start + 1;
      if (r > best.rouge + 1e-12 ||
          (std::abs(r - best.rouge) <= 1e-12 &&
           (len < best_len || (len == best_len && s < best.start)))) {
        best = {s, e, r};
      }
    }
  }
  return best;
}

}  // namespace

TEST_CASE("tokenizer golden cases") {
  CHECK(tokenize("The cat sat.") == TokenList{"the", "cat", "sat", "."});
  CHECK(tokenize("5'6 (167.64 cm)") ==
        TokenList{"5'6", "(", "167.64", "cm", ")"});
  CHECK(tokenize("don't stop") == TokenList{"don't", "stop"});
  CHECK(tokenize("a-b") == TokenList{"a", "-", "b"});
  CHECK(tokenize("ver. 2") == TokenList{"ver", ".", "2"});
  CHECK(tokenize("  spaced\tout\n") == TokenList{"spaced", "out"});
  CHECK(tokenize("") == TokenList{});
  CHECK(tokenize("...") == TokenList{".", ".", "."});
  CHECK(tokenize("U.S. costs $3.50!") ==
        TokenList{"u", ".", "s", ".", "costs", "$", "3.50", "!"});
}

TEST_CASE("offsets point back into the original text") {
  const std::string text = "He is 5'6 (167.64 cm) tall.";
  auto spans = tokenize_with_offsets(text);
  TokenList plain = tokenize(text);
  REQUIRE(spans.size() == plain.size());
  for (size_t i = 0; i < spans.size(); ++i) {
    CHECK(spans[i].token == plain[i]);
    std::string raw =
        text.substr(spans[i].char_start, spans[i].char_end - spans[i].char_start);
    for (char& c : raw) c = static_cast<char>(std::tolower(c));
    CHECK(raw == spans[i].token);
  }
}

TEST_CASE("vocabulary ranks by frequency with lexicographic ties") {
  std::map<std::string, long long> counts = {
      {"banana", 5}, {"apple", 5}, {"cherry", 9}, {"date", 1}};
  Vocabulary v = Vocabulary::build(counts, 100);
  CHECK(v.size() == 8);  // 4 reserved + 4 words
  CHECK(v.encode("cherry") == 4);
  CHECK(v.encode("apple") == 5);   // ties break alphabetically
  CHECK(v.encode("banana") == 6);
  CHECK(v.encode("date") == 7);
  CHECK(v.encode("missing") == Vocabulary::kUnk);
  CHECK(v.decode(Vocabulary::kPad) == "<pad>");
  CHECK(v.decode(Vocabulary::kUnk) == "<unk>");
  CHECK(v.decode(Vocabulary::kBos) == "<bos>");
  CHECK(v.decode(Vocabulary::kEos) == "<eos>");
}

TEST_CASE("vocabulary truncation counts reserved slots") {
  std::map<std::string, long long> counts = {
      {"a", 9}, {"b", 8}, {"c", 7}, {"d", 6}};
  Vocabulary v = Vocabulary::build(counts, 6);
  CHECK(v.size() == 6);
  CHECK(v.encode("a") == 4);
  CHECK(v.encode("b") == 5);
  CHECK(v.encode("c") == Vocabulary::kUnk);
  CHECK(v.encode_all({"a", "q", "b"}) ==
        std::vector<int>{4, Vocabulary::kUnk, 5});
}

TEST_CASE("vocabulary serialization round trip") {
  std::map<std::string, long long> counts = {{"x", 2}, {"y", 1}};
  Vocabulary v = Vocabulary::build(counts, 10);
  Vocabulary w = Vocabulary::from_tokens(v.tokens());
  CHECK(w.size() == v.size());
  CHECK(w.encode("x") == v.encode("x"));
  CHECK(w.encode("y") == v.encode("y"));
  CHECK_THROWS_AS(Vocabulary::from_tokens({"a", "b"}), DataError);
}

TEST_CASE("dataset loader maps fields and selected passage") {
  std::string path = write_temp(
      R"({"query_id": 7, "query": "Who wrote it?", "passages": [{"passage_text": "Bob wrote it.", "is_selected": 0}, {"passage_text": "Alice wrote it.", "is_selected": 1}], "answers": ["Alice"]})"
      "\n"
      R"({"query_id": 8, "query": "no label", "passages": [{"passage_text": "something"}], "answers": []})"
      "\n");
  auto data = load_dataset(path);
  std::remove(path.c_str());
  REQUIRE(data.size() == 2);
  CHECK(data[0].query_id == 7);
  CHECK(data[0].question == TokenList{"who", "wrote", "it", "?"});
  REQUIRE(data[0].passages.size() == 2);
  CHECK(data[0].passages[1] == TokenList{"alice", "wrote", "it", "."});
  CHECK(data[0].answers == std::vector<std::string>{"Alice"});
  REQUIRE(data[0].selected_passage.has_value());
  CHECK(*data[0].selected_passage == 1);
  CHECK_FALSE(data[1].selected_passage.has_value());
}

TEST_CASE("dataset loader reports the offending line") {
  std::string path = write_temp(
      R"({"query_id": 1, "query": "q", "passages": [{"passage_text": "p"}], "answers": []})"
      "\nnot json at all\n");
  try {
    load_dataset(path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_dataset("no_such_file.jsonl"), DataError);
}

TEST_CASE("dataset save then load round trips") {
  RCExample ex;
  ex.query_id = 3;
  ex.question = {"what", "is", "it"};
  ex.passages = {{"it", "is", "blue"}, {"red", "herring"}};
  ex.answers = {"blue"};
  ex.selected_passage = 0;
  std::string path = "test_text_roundtrip.jsonl";
  save_dataset({ex}, path);
  auto back = load_dataset(path);
  std::remove(path.c_str());
  REQUIRE(back.size() == 1);
  CHECK(back[0].query_id == 3);
  CHECK(back[0].question == ex.question);
  CHECK(back[0].passages == ex.passages);
  CHECK(back[0].answers == ex.answers);
  CHECK(back[0].selected_passage == ex.selected_passage);
}

TEST_CASE("synthetic corpus is deterministic and well formed") {
  CorpusSpec spec;
  spec.n_examples = 30;
  spec.vocab_size = 40;
  spec.k_passages = 3;
  auto a = generate_synthetic_corpus(spec, 123);
  auto b = generate_synthetic_corpus(spec, 123);
  auto c = generate_synthetic_corpus(spec, 124);
  REQUIRE(a.size() == 30);
  bool differs = false;
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].query_id == b[i].query_id);
    CHECK(a[i].question == b[i].question);
    CHECK(a[i].passages == b[i].passages);
    CHECK(a[i].answers == b[i].answers);
    if (a[i].question != c[i].question) differs = true;
  }
  CHECK(differs);

  std::set<long long> ids;
  for (const auto& ex : a) {
    ids.insert(ex.query_id);
    REQUIRE(ex.passages.size() == 3);
    REQUIRE(ex.selected_passage.has_value());
    REQUIRE(ex.answers.size() == 1);
    // The answer is planted verbatim in the selected passage.
    TokenList answer = tokenize(ex.answers[0]);
    const TokenList& sel = ex.passages[*ex.selected_passage];
    bool found = false;
    for (size_t s = 0; s + answer.size() <= sel.size(); ++s) {
      if (std::equal(answer.begin(), answer.end(), sel.begin() + s))
        found = true;
    }
    CHECK(found);
    // The question shares tokens with the answer.
    std::set<std::string> q(ex.question.begin(), ex.question.end());
    bool overlap = false;
    for (const auto& t : answer)
      if (q.count(t)) overlap = true;
    CHECK(overlap);
  }
  CHECK(ids.size() == a.size());
}

TEST_CASE("yes-no corpus plants cue words") {
  CorpusSpec spec;
  spec.n_examples = 20;
  spec.k_passages = 1;
  spec.answer_style = AnswerStyle::kYesNo;
  auto data = generate_synthetic_corpus(spec, 5);
  int yes = 0, no = 0;
  for (const auto& ex : data) {
    REQUIRE(ex.answers.size() == 1);
    const std::string& ans = ex.answers[0];
    CHECK((ans == "yes" || ans == "no"));
    const TokenList& sel = ex.passages[*ex.selected_passage];
    const std::string cue = ans == "yes" ? "cueyes" : "cueno";
    CHECK(std::count(sel.begin(), sel.end(), cue) > 0);
    (ans == "yes" ? yes : no)++;
  }
  CHECK(yes > 0);
  CHECK(no > 0);
}

TEST_CASE("concatenated offsets are a bijection") {
  RCExample ex;
  ex.passages = {{"a", "b", "c"}, {"d"}, {"e", "f"}};
  auto [tokens, off] = concat_passages(ex);
  CHECK(tokens == TokenList{"a", "b", "c", "d", "e", "f"});
  CHECK(off.total == 6);
  CHECK(off.starts == std::vector<int>{0, 3, 4});
  for (int g = 0; g < off.total; ++g) {
    auto [p, l] = off.to_local(g);
    CHECK(off.to_global(p, l) == g);
    CHECK(off.passage_of(g) == p);
  }
  CHECK(off.passage_of(3) == 1);
  CHECK(off.passage_of(5) == 2);
}

TEST_CASE("gold span oracle matches uncapped brute force") {
  Rng rng(31);
  const char* alpha[] = {"t0", "t1", "t2", "t3", "t4"};
  for (int trial = 0; trial < 200; ++trial) {
    RCExample ex;
    const int n_pass = 1 + static_cast<int>(rng.index(3));
    int total = 0;
    for (int p = 0; p < n_pass && total < 40; ++p) {
      const int len = 1 + static_cast<int>(rng.index(14));
      TokenList pass;
      for (int i = 0; i < len && total < 40; ++i, ++total)
        pass.push_back(alpha[rng.index(5)]);
      ex.passages.push_back(pass);
    }
    const int n_ref = 1 + static_cast<int>(rng.index(2));
    for (int r = 0; r < n_ref; ++r) {
      const int len = 1 + static_cast<int>(rng.index(4));
      std::string answer;
      for (int i = 0; i < len; ++i) {
        if (i) answer += ' ';
        answer += alpha[rng.index(5)];
      }
      ex.answers.push_back(answer);
    }
    GoldSpan got = select_gold_span(ex, 0);  // cap disabled
    GoldSpan want = brute_force_gold(ex);
    REQUIRE(got.start == want.start);
    REQUIRE(got.end == want.end);
    REQUIRE(got.rouge == doctest::Approx(want.rouge).epsilon(1e-9));
  }
}

TEST_CASE("gold span default cap still finds short exact answers") {
  RCExample ex;
  ex.passages = {{"x", "x", "the", "answer", "here", "x", "x"}};
  ex.answers = {"the answer here"};
  GoldSpan g = select_gold_span(ex);
  CHECK(g.start == 2);
  CHECK(g.end == 4);
  CHECK(g.rouge == doctest::Approx(1.0));
}

TEST_CASE("extraction training set filters on the 0.7 threshold") {
  RCExample good;
  good.query_id = 1;
  good.passages = {{"alpha", "beta", "gamma"}};
  good.answers = {"alpha beta gamma"};
  RCExample bad;
  bad.query_id = 2;
  bad.passages = {{"one", "two", "three"}};
  bad.answers = {"completely different words"};
  std::vector<RCExample> examples = {good, bad};
  auto pairs = build_extraction_training_set(examples);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].example->query_id == 1);
  CHECK(pairs[0].gold.rouge > 0.7);
}

TEST_CASE("synthesis training set combines gold and predicted parts") {
  RCExample ex;
  ex.query_id = 9;
  ex.question = {"what", "color"};
  ex.passages = {{"the", "sky", "is", "blue", "today"}, {"noise", "words"}};
  ex.answers = {"sky is blue"};
  auto part1 = build_synthesis_training_set({ex});
  REQUIRE(part1.size() == 1);
  CHECK(part1[0].source == SynthesisSource::kGoldSpan);
  CHECK(part1[0].passage == ex.passages[0]);
  CHECK(part1[0].span_start == 1);
  CHECK(part1[0].span_end == 3);
  CHECK(part1[0].target == TokenList{"sky", "is", "blue"});

  // Predictor pointing past the first passage projects into the second,
  // clamping the end to that passage.
  SpanPredictor pred = [](const RCExample&) { return std::make_pair(5, 9); };
  auto both = build_synthesis_training_set({ex}, 0.5, &pred);
  REQUIRE(both.size() == 2);
  CHECK(both[1].source == SynthesisSource::kModelExtracted);
  CHECK(both[1].passage == ex.passages[1]);
  CHECK(both[1].span_start == 0);
  CHECK(both[1].span_end == 1);

  // A low-rouge example is dropped from part 1 but kept in part 2.
  RCExample off;
  off.query_id = 10;
  off.passages = {{"unrelated", "tokens", "entirely"}};
  off.answers = {"no overlap at all"};
  SpanPredictor pred0 = [](const RCExample&) { return std::make_pair(0, 1); };
  auto mixed = build_synthesis_training_set({off}, 0.5, &pred0);
  REQUIRE(mixed.size() == 1);
  CHECK(mixed[0].source == SynthesisSource::kModelExtracted);
}
