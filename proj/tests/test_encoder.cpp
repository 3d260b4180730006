#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "snet/encoder.hpp"

using namespace snet;

TEST_CASE("gru step with zero parameters halves the previous state") {
  Rng rng(1);
  GRUCell cell = GRUCell::create(3, 2, rng);
  for (Tensor* t : {&cell.w_hz, &cell.w_xz, &cell.b_z, &cell.w_hr, &cell.w_xr,
                    &cell.b_r, &cell.w_h, &cell.w_x, &cell.b}) {
    std::fill(t->mutable_data().begin(), t->mutable_data().end(), 0.0f);
  }
  Tensor h = Tensor::from_vector({2}, {0.6f, -0.4f});
  Tensor x = Tensor::from_vector({3}, {1, 2, 3});
  Tensor out = gru_step(cell, h, x);
  // z = 0.5 and hc = 0 everywhere, so h' = 0.5 h.
  CHECK(out.data()[0] == doctest::Approx(0.3f));
  CHECK(out.data()[1] == doctest::Approx(-0.2f));
}

TEST_CASE("gru step is a blend between h_prev and the candidate") {
  Rng rng(2);
  GRUCell cell = GRUCell::create(4, 3, rng);
  Tensor h = Tensor::from_vector({3}, {0.9f, -0.9f, 0.2f});
  Tensor x = Tensor::from_vector({4}, {0.1f, 0.2f, -0.3f, 0.4f});
  Tensor out = gru_step(cell, h, x);
  REQUIRE(out.shape() == Shape{3});
  for (int i = 0; i < 3; ++i) {
    // The update gate convexly combines h_prev with a tanh candidate, so
    // the output stays inside the hull of the two.
    const float lo = std::min(h.data()[i], -1.0f);
    const float hi = std::max(h.data()[i], 1.0f);
    CHECK(out.data()[i] >= lo);
    CHECK(out.data()[i] <= hi);
  }
}

TEST_CASE("gru parameters flow gradient") {
  Rng rng(3);
  GRUCell cell = GRUCell::create(2, 2, rng);
  ParamMap params;
  cell.register_params(params, "gru.");
  CHECK(params.size() == 9);
  Tensor h = Tensor::zeros({2});
  Tensor x = Tensor::from_vector({2}, {0.5f, -0.5f});
  Tensor h1 = gru_step(cell, h, x);
  Tensor h2 = gru_step(cell, h1, x);
  backward(sum(h2));
  int nonzero_params = 0;
  for (auto& [name, p] : params) {
    auto g = p.grad();
    bool any = false;
    for (float v : g) any = any || v != 0.0f;
    if (any) ++nonzero_params;
    p.zero_grad();
  }
  CHECK(nonzero_params >= 8);  // everything except possibly a dead gate
}

TEST_CASE("bigru is symmetric under sequence reversal") {
  Rng rng(4);
  GRUCell fwd = GRUCell::create(3, 2, rng);
  GRUCell bwd = GRUCell::create(3, 2, rng);
  std::vector<Tensor> seq;
  for (int t = 0; t < 5; ++t) {
    seq.push_back(Tensor::from_vector(
        {3}, {0.1f * t, 0.2f - 0.05f * t, std::sin(static_cast<float>(t))}));
  }
  BiGRUOutput out = bigru_encode(fwd, bwd, seq);
  REQUIRE(out.states.size() == 5);
  CHECK(out.states[0].shape() == Shape{4});

  std::vector<Tensor> rev(seq.rbegin(), seq.rend());
  // Swapping the two directions on the reversed sequence reproduces the
  // original states with their halves exchanged, in reverse order.
  BiGRUOutput mirror = bigru_encode(bwd, fwd, rev);
  for (int t = 0; t < 5; ++t) {
    const auto& a = out.states[t].data();
    const auto& b = mirror.states[4 - t].data();
    for (int i = 0; i < 2; ++i) {
      CHECK(a[i] == doctest::Approx(b[2 + i]));
      CHECK(a[2 + i] == doctest::Approx(b[i]));
    }
  }
}

TEST_CASE("bigru finals match the boundary states") {
  Rng rng(5);
  GRUCell fwd = GRUCell::create(2, 3, rng);
  GRUCell bwd = GRUCell::create(2, 3, rng);
  std::vector<Tensor> seq = {Tensor::from_vector({2}, {1, 0}),
                             Tensor::from_vector({2}, {0, 1}),
                             Tensor::from_vector({2}, {1, 1})};
  BiGRUOutput out = bigru_encode(fwd, bwd, seq);
  for (int i = 0; i < 3; ++i) {
    CHECK(out.fwd_final.data()[i] == doctest::Approx(out.states[2].data()[i]));
    CHECK(out.bwd_final.data()[i] ==
          doctest::Approx(out.states[0].data()[3 + i]));
  }
}

TEST_CASE("embedding lookup gradient rules") {
  Rng rng(6);
  EmbeddingTable trainable = EmbeddingTable::create(6, 4, true, rng);
  Tensor e = embed_lookup(trainable, 4);
  backward(sum(e));
  auto g = trainable.weights.grad();
  for (int col = 0; col < 4; ++col) CHECK(g[4 * 4 + col] == 1.0f);
  for (int col = 0; col < 4; ++col) CHECK(g[2 * 4 + col] == 0.0f);
  trainable.weights.zero_grad();

  // PAD never receives gradient.
  backward(sum(embed_lookup(trainable, Vocabulary::kPad)));
  for (float v : trainable.weights.grad()) CHECK(v == 0.0f);
  trainable.weights.zero_grad();
  // And the PAD row itself is zero.
  CHECK(embed_lookup(trainable, Vocabulary::kPad).data() ==
        std::vector<float>(4, 0.0f));

  EmbeddingTable frozen = EmbeddingTable::create(6, 4, false, rng);
  backward(sum(embed_lookup(frozen, 4)));
  for (float v : frozen.weights.grad()) CHECK(v == 0.0f);

  EmbeddingTable zu = EmbeddingTable::create(6, 4, false, rng);
  zu.zero_unk = true;
  CHECK(embed_lookup(zu, Vocabulary::kUnk).data() ==
        std::vector<float>(4, 0.0f));
  CHECK(embed_lookup(zu, 5).data() != std::vector<float>(4, 0.0f));
}

TEST_CASE("char ids cover printable ascii and reject the rest") {
  CHECK(char_id('!') == 4);
  CHECK(char_id('~') == 4 + 93);
  CHECK(char_id('a') != char_id('b'));
  CHECK(char_id(' ') == Vocabulary::kUnk);
  CHECK(char_id('\n') == Vocabulary::kUnk);
  CHECK(char_id(static_cast<char>(200)) == Vocabulary::kUnk);
  CHECK(kCharVocabSize == 98);
}

TEST_CASE("char embedding is deterministic and token sensitive") {
  Rng r1(7), r2(7);
  CharEncoder a = CharEncoder::create(5, 3, r1);
  CharEncoder b = CharEncoder::create(5, 3, r2);
  CHECK(char_embed("word", a).data() == char_embed("word", b).data());
  CHECK(char_embed("word", a).shape() == Shape{6});
  CHECK(char_embed("word", a).data() != char_embed("sword", a).data());
  CHECK_THROWS_AS(char_embed("", a), DataError);

  ParamMap params;
  a.register_params(params, "char.");
  CHECK(params.size() == 1 + 18);  // table plus two GRU cells
}

TEST_CASE("embed_sequence concatenates word and char parts") {
  Rng rng(8);
  Vocabulary vocab = Vocabulary::build({{"hello", 2}, {"world", 1}}, 10);
  EmbeddingTable words = EmbeddingTable::create(
      static_cast<int>(vocab.size()), 4, true, rng);
  CharEncoder chars = CharEncoder::create(3, 2, rng);
  auto with = embed_sequence({"hello", "oov"}, vocab, words, &chars);
  REQUIRE(with.size() == 2);
  CHECK(with[0].shape() == Shape{8});  // 4 word + 4 char
  auto without = embed_sequence({"hello", "oov"}, vocab, words, nullptr);
  CHECK(without[0].shape() == Shape{4});
  // Word half agrees between the two calls.
  for (int i = 0; i < 4; ++i)
    CHECK(with[0].data()[i] == doctest::Approx(without[0].data()[i]));
}

TEST_CASE("pretrained vectors overwrite matching rows only") {
  Rng rng(9);
  Vocabulary vocab = Vocabulary::build({{"apple", 3}, {"pear", 2}}, 10);
  EmbeddingTable table = EmbeddingTable::create(
      static_cast<int>(vocab.size()), 3, false, rng);
  const std::vector<float> before = table.weights.data();
  std::string path = "test_encoder_vecs.txt";
  {
    std::ofstream out(path);
    out << "apple 1.0 2.0 3.0\n";
    out << "unknowntoken 9.0 9.0 9.0\n";
  }
  load_pretrained_embeddings(table, vocab, path);
  std::remove(path.c_str());
  const int apple = vocab.encode("apple");
  const int pear = vocab.encode("pear");
  CHECK(table.weights.data()[apple * 3 + 0] == 1.0f);
  CHECK(table.weights.data()[apple * 3 + 1] == 2.0f);
  CHECK(table.weights.data()[apple * 3 + 2] == 3.0f);
  for (int i = 0; i < 3; ++i)
    CHECK(table.weights.data()[pear * 3 + i] == before[pear * 3 + i]);
}
