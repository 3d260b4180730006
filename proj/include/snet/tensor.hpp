#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "snet/errors.hpp"
#include "snet/rng.hpp"

namespace snet {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
size_t shape_numel(const Shape& s);

// One record of the gradient tape. The tape is the graph itself: every
// non-leaf tensor keeps handles to its parents plus a closure that pushes
// its output gradient back to them. backward() topologically sorts the
// reachable records and sweeps them in reverse.
struct TapeNode {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<TapeNode>> parents;
  std::function<void(TapeNode&)> backprop;

  float* grad_ptr();  // allocates zeroed grad on first use
};

// Dense row-major float32 tensor with value semantics over a shared record.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& shape);
  static Tensor full(const Shape& shape, float value);
  static Tensor from_vector(const Shape& shape, std::vector<float> values);
  static Tensor scalar(float value);
  // Leaf parameter: participates in backward(), keeps its gradient.
  static Tensor param(const Shape& shape, std::vector<float> values);
  static Tensor param_uniform(const Shape& shape, float bound, Rng& rng);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int dim(size_t axis) const { return node_->shape[axis]; }
  size_t rank() const { return node_->shape.size(); }
  size_t numel() const { return node_->data.size(); }

  const std::vector<float>& data() const { return node_->data; }
  std::vector<float>& mutable_data() { return node_->data; }
  float value() const;  // scalar only

  bool requires_grad() const { return node_->requires_grad; }
  // Gradient accumulated by the last backward(); zeros if never touched.
  std::vector<float> grad() const;
  void zero_grad();

  std::shared_ptr<TapeNode> node() const { return node_; }
  explicit Tensor(std::shared_ptr<TapeNode> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<TapeNode> node_;
};

// Builds a non-leaf tensor wired into the tape. The backprop closure reads
// out.grad and accumulates into parents' grads.
Tensor make_op(Shape shape, std::vector<float> data,
               std::vector<Tensor> parents,
               std::function<void(TapeNode&)> backprop);

// --- differentiable operations ---

// (m,k)x(k,n)->(m,n), or (m,k)x(k)->(m)
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, float s);
Tensor add_scalar(const Tensor& a, float s);
Tensor neg(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor log(const Tensor& a);

enum class Activation { kSigmoid, kTanh };
Tensor activation(const Tensor& a, Activation kind);

// Max-subtraction stabilized; masked positions (mask[i]==false) are exactly
// zero and excluded from the normalization. Rank-1 input.
Tensor softmax(const Tensor& scores,
               const std::vector<bool>* mask = nullptr);
Tensor log_softmax(const Tensor& scores);

Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& a, int axis, int start, int len);
// m[j] = max(r[2j], r[2j+1]) over the last axis; ties route the gradient
// to the lower index.
Tensor maxout_pairs(const Tensor& a);
Tensor sum(const Tensor& a);  // -> scalar
Tensor stack_rows(const std::vector<Tensor>& rows);  // n rank-1 -> (n,d)
Tensor reshape(const Tensor& a, const Shape& shape);  // same numel
Tensor dot(const Tensor& a, const Tensor& b);  // rank-1 -> scalar

// Inverted dropout: zeroes with probability rate, scales survivors by
// 1/(1-rate). Identity when !training or rate == 0.
Tensor dropout(const Tensor& a, float rate, bool training, Rng& rng);

// Reverse sweep from a scalar loss. Accumulates additively across fan-out
// and releases the graph afterwards; leaf gradients persist until
// zero_grad().
void backward(const Tensor& loss);

}  // namespace snet
