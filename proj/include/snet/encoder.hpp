#pragma once

#include <string>
#include <vector>

#include "snet/optim.hpp"
#include "snet/tensor.hpp"
#include "snet/text.hpp"

namespace snet {

struct GRUCell {
  int input_size = 0;
  int hidden_size = 0;
  Tensor w_hz, w_xz, b_z;
  Tensor w_hr, w_xr, b_r;
  Tensor w_h, w_x, b;

  static GRUCell create(int input_size, int hidden_size, Rng& rng);
  void register_params(ParamMap& params, const std::string& prefix) const;
};

// z = sig(W_hz h + W_xz x + b_z); r = sig(W_hr h + W_xr x + b_r);
// hc = tanh(W_h (r.h) + W_x x + b); h' = (1-z).h + z.hc
Tensor gru_step(const GRUCell& cell, const Tensor& h_prev, const Tensor& x);

struct BiGRUOutput {
  std::vector<Tensor> states;  // per position, [fwd_t; bwd_t], 2*hidden
  Tensor fwd_final;            // forward state at the last position
  Tensor bwd_final;            // backward state at position 0
};

BiGRUOutput bigru_encode(const GRUCell& fwd, const GRUCell& bwd,
                         const std::vector<Tensor>& inputs);

struct EmbeddingTable {
  Tensor weights;  // (vocab, dim)
  bool trainable = true;
  // when set, lookups of kUnk return a constant zero vector (the frozen
  // out-of-vocabulary convention)
  bool zero_unk = false;

  static EmbeddingTable create(int vocab, int dim, bool trainable, Rng& rng);
  int dim() const { return weights.dim(1); }
};

// Row lookup. The PAD row and non-trainable tables never receive gradient.
Tensor embed_lookup(const EmbeddingTable& table, int id);

// Fixed printable-ASCII character inventory (reserved ids 0..3 as in
// Vocabulary); anything outside maps to kUnk.
int char_id(char c);
constexpr int kCharVocabSize = 4 + 94;

struct CharEncoder {
  EmbeddingTable table;
  GRUCell fwd;
  GRUCell bwd;

  static CharEncoder create(int embed_dim, int hidden, Rng& rng);
  void register_params(ParamMap& params, const std::string& prefix) const;
};

// Final fwd/bwd hidden states of a character BiGRU over the token's
// characters, concatenated; dimension 2 * char hidden.
Tensor char_embed(const std::string& token, const CharEncoder& enc);

// Per position [word embedding; char embedding]; the char part is dropped
// when char_enc is null (the synthesis configuration).
std::vector<Tensor> embed_sequence(const TokenList& tokens,
                                   const Vocabulary& vocab,
                                   const EmbeddingTable& word_table,
                                   const CharEncoder* char_enc);

// Plain-text word-vector file: token then dim floats per line. Rows for
// tokens present in the vocabulary are overwritten in place.
void load_pretrained_embeddings(EmbeddingTable& table, const Vocabulary& vocab,
                                const std::string& path);

}  // namespace snet
