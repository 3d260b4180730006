#include "snet/encoder.hpp"

#include <fstream>
#include <sstream>

#include "snet/errors.hpp"

namespace snet {

static constexpr float kInitBound = 0.08f;

GRUCell GRUCell::create(int input_size, int hidden_size, Rng& rng) {
  GRUCell c;
  c.input_size = input_size;
  c.hidden_size = hidden_size;
  const Shape hh{hidden_size, hidden_size};
  const Shape hx{hidden_size, input_size};
  const Shape h{hidden_size};
  c.w_hz = Tensor::param_uniform(hh, kInitBound, rng);
  c.w_xz = Tensor::param_uniform(hx, kInitBound, rng);
  c.b_z = Tensor::param_uniform(h, kInitBound, rng);
  c.w_hr = Tensor::param_uniform(hh, kInitBound, rng);
  c.w_xr = Tensor::param_uniform(hx, kInitBound, rng);
  c.b_r = Tensor::param_uniform(h, kInitBound, rng);
  c.w_h = Tensor::param_uniform(hh, kInitBound, rng);
  c.w_x = Tensor::param_uniform(hx, kInitBound, rng);
  c.b = Tensor::param_uniform(h, kInitBound, rng);
  return c;
}

void GRUCell::register_params(ParamMap& params,
                              const std::string& prefix) const {
  params[prefix + ".w_hz"] = w_hz;
  params[prefix + ".w_xz"] = w_xz;
  params[prefix + ".b_z"] = b_z;
  params[prefix + ".w_hr"] = w_hr;
  params[prefix + ".w_xr"] = w_xr;
  params[prefix + ".b_r"] = b_r;
  params[prefix + ".w_h"] = w_h;
  params[prefix + ".w_x"] = w_x;
  params[prefix + ".b"] = b;
}

Tensor gru_step(const GRUCell& cell, const Tensor& h_prev, const Tensor& x) {
  if (h_prev.dim(0) != cell.hidden_size || x.dim(0) != cell.input_size)
    throw DimensionError("gru_step: state " + shape_str(h_prev.shape()) +
                         " / input " + shape_str(x.shape()) +
                         " do not match cell (" +
                         std::to_string(cell.hidden_size) + "," +
                         std::to_string(cell.input_size) + ")");
  Tensor z = sigmoid(
      add(add(matmul(cell.w_hz, h_prev), matmul(cell.w_xz, x)), cell.b_z));
  Tensor r = sigmoid(
      add(add(matmul(cell.w_hr, h_prev), matmul(cell.w_xr, x)), cell.b_r));
  Tensor h_cand = tanh(
      add(add(matmul(cell.w_h, mul(r, h_prev)), matmul(cell.w_x, x)), cell.b));
  Tensor one_minus_z = add_scalar(neg(z), 1.0f);
  return add(mul(one_minus_z, h_prev), mul(z, h_cand));
}

BiGRUOutput bigru_encode(const GRUCell& fwd, const GRUCell& bwd,
                         const std::vector<Tensor>& inputs) {
  if (inputs.empty()) throw DataError("bigru_encode: empty sequence");
  const size_t n = inputs.size();
  std::vector<Tensor> fwd_states(n), bwd_states(n);
  Tensor h = Tensor::zeros({fwd.hidden_size});
  for (size_t t = 0; t < n; ++t) {
    h = gru_step(fwd, h, inputs[t]);
    fwd_states[t] = h;
  }
  Tensor g = Tensor::zeros({bwd.hidden_size});
  for (size_t t = n; t-- > 0;) {
    g = gru_step(bwd, g, inputs[t]);
    bwd_states[t] = g;
  }
  BiGRUOutput out;
  out.states.reserve(n);
  for (size_t t = 0; t < n; ++t)
    out.states.push_back(concat({fwd_states[t], bwd_states[t]}, 0));
  out.fwd_final = fwd_states[n - 1];
  out.bwd_final = bwd_states[0];
  return out;
}

EmbeddingTable EmbeddingTable::create(int vocab, int dim, bool trainable,
                                      Rng& rng) {
  EmbeddingTable t;
  t.weights = Tensor::param_uniform({vocab, dim}, kInitBound, rng);
  t.trainable = trainable;
  // PAD row stays zero
  for (int j = 0; j < dim; ++j) t.weights.mutable_data()[j] = 0.0f;
  return t;
}

Tensor embed_lookup(const EmbeddingTable& table, int id) {
  const int vocab = table.weights.dim(0);
  const int dim = table.weights.dim(1);
  if (id < 0 || id >= vocab)
    throw DataError("embedding id out of range: " + std::to_string(id));
  if (table.zero_unk && id == Vocabulary::kUnk) return Tensor::zeros({dim});
  std::vector<float> row(table.weights.data().begin() +
                             static_cast<size_t>(id) * dim,
                         table.weights.data().begin() +
                             static_cast<size_t>(id + 1) * dim);
  if (!table.trainable || id == Vocabulary::kPad)
    return Tensor::from_vector({dim}, std::move(row));
  auto wn = table.weights.node();
  return make_op({dim}, std::move(row), {table.weights},
                 [wn, id, dim](TapeNode& o) {
                   float* g = wn->grad_ptr() + static_cast<size_t>(id) * dim;
                   for (int j = 0; j < dim; ++j) g[j] += o.grad[j];
                 });
}

int char_id(char c) {
  unsigned char u = static_cast<unsigned char>(c);
  if (u < 33 || u > 126) return Vocabulary::kUnk;
  return 4 + (u - 33);
}

CharEncoder CharEncoder::create(int embed_dim, int hidden, Rng& rng) {
  CharEncoder e;
  e.table = EmbeddingTable::create(kCharVocabSize, embed_dim, true, rng);
  e.fwd = GRUCell::create(embed_dim, hidden, rng);
  e.bwd = GRUCell::create(embed_dim, hidden, rng);
  return e;
}

void CharEncoder::register_params(ParamMap& params,
                                  const std::string& prefix) const {
  params[prefix + ".table"] = table.weights;
  fwd.register_params(params, prefix + ".fwd");
  bwd.register_params(params, prefix + ".bwd");
}

Tensor char_embed(const std::string& token, const CharEncoder& enc) {
  if (token.empty()) throw DataError("char_embed: empty token");
  std::vector<Tensor> inputs;
  inputs.reserve(token.size());
  for (char c : token) inputs.push_back(embed_lookup(enc.table, char_id(c)));
  BiGRUOutput out = bigru_encode(enc.fwd, enc.bwd, inputs);
  return concat({out.fwd_final, out.bwd_final}, 0);
}

std::vector<Tensor> embed_sequence(const TokenList& tokens,
                                   const Vocabulary& vocab,
                                   const EmbeddingTable& word_table,
                                   const CharEncoder* char_enc) {
  std::vector<Tensor> out;
  out.reserve(tokens.size());
  for (const std::string& tok : tokens) {
    Tensor word = embed_lookup(word_table, vocab.encode(tok));
    if (char_enc)
      out.push_back(concat({word, char_embed(tok, *char_enc)}, 0));
    else
      out.push_back(word);
  }
  return out;
}

void load_pretrained_embeddings(EmbeddingTable& table, const Vocabulary& vocab,
                                const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embedding file: " + path);
  const int dim = table.dim();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string tok;
    is >> tok;
    const int id = vocab.encode(tok);
    std::vector<float> row(dim);
    for (int j = 0; j < dim; ++j) {
      if (!(is >> row[j]))
        throw DataError("embedding file line " + std::to_string(line_no) +
                        ": expected " + std::to_string(dim) + " floats");
    }
    if (id == Vocabulary::kUnk && tok != vocab.decode(Vocabulary::kUnk))
      continue;  // token not in vocabulary
    std::copy(row.begin(), row.end(),
              table.weights.mutable_data().begin() +
                  static_cast<size_t>(id) * dim);
  }
}

}  // namespace snet
