#include "snet/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace snet {

using MatMap = Eigen::Map<
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap = Eigen::Map<
    const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

size_t shape_numel(const Shape& s) {
  size_t n = 1;
  for (int d : s) n *= static_cast<size_t>(d);
  return n;
}

float* TapeNode::grad_ptr() {
  if (grad.empty()) grad.assign(data.size(), 0.0f);
  return grad.data();
}

Tensor Tensor::zeros(const Shape& shape) { return full(shape, 0.0f); }

Tensor Tensor::full(const Shape& shape, float value) {
  auto n = std::make_shared<TapeNode>();
  n->shape = shape;
  n->data.assign(shape_numel(shape), value);
  return Tensor(std::move(n));
}

Tensor Tensor::from_vector(const Shape& shape, std::vector<float> values) {
  if (values.size() != shape_numel(shape))
    throw DimensionError("tensor data length " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(shape));
  auto n = std::make_shared<TapeNode>();
  n->shape = shape;
  n->data = std::move(values);
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(float value) { return from_vector({1}, {value}); }

Tensor Tensor::param(const Shape& shape, std::vector<float> values) {
  Tensor t = from_vector(shape, std::move(values));
  t.node()->requires_grad = true;
  return t;
}

Tensor Tensor::param_uniform(const Shape& shape, float bound, Rng& rng) {
  std::vector<float> v(shape_numel(shape));
  for (float& x : v) x = rng.uniform(-bound, bound);
  return param(shape, std::move(v));
}

float Tensor::value() const {
  if (numel() != 1)
    throw DimensionError("value() on non-scalar tensor " + shape_str(shape()));
  return node_->data[0];
}

std::vector<float> Tensor::grad() const {
  if (!node_->grad.empty()) return node_->grad;
  return std::vector<float>(node_->data.size(), 0.0f);
}

void Tensor::zero_grad() { node_->grad.clear(); }

Tensor make_op(Shape shape, std::vector<float> data,
               std::vector<Tensor> parents,
               std::function<void(TapeNode&)> backprop) {
  auto n = std::make_shared<TapeNode>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  bool needs = false;
  for (const Tensor& p : parents) {
    needs = needs || p.node()->requires_grad || !p.node()->parents.empty() ||
            p.node()->backprop;
  }
  if (needs) {
    n->requires_grad = true;
    for (const Tensor& p : parents) n->parents.push_back(p.node());
    n->backprop = std::move(backprop);
  }
  return Tensor(std::move(n));
}

static void check_same_shape(const Tensor& a, const Tensor& b,
                             const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || (b.rank() != 2 && b.rank() != 1))
    throw DimensionError("matmul: expected rank-2 x rank-1/2, got " +
                         shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const int m = a.dim(0), k = a.dim(1);
  const int bk = b.dim(0);
  const int n = b.rank() == 2 ? b.dim(1) : 1;
  const int inner = b.rank() == 2 ? bk : bk;
  if (k != inner)
    throw DimensionError("matmul: inner dimensions disagree " +
                         shape_str(a.shape()) + " x " + shape_str(b.shape()));
  std::vector<float> out(static_cast<size_t>(m) * n);
  ConstMatMap A(a.data().data(), m, k);
  ConstMatMap B(b.data().data(), k, n);
  MatMap O(out.data(), m, n);
  O.noalias() = A * B;
  Shape out_shape = b.rank() == 2 ? Shape{m, n} : Shape{m};
  auto an = a.node();
  auto bn = b.node();
  return make_op(out_shape, std::move(out), {a, b},
                 [an, bn, m, k, n](TapeNode& o) {
                   ConstMatMap G(o.grad_ptr(), m, n);
                   ConstMatMap A(an->data.data(), m, k);
                   ConstMatMap B(bn->data.data(), k, n);
                   MatMap GA(an->grad_ptr(), m, k);
                   MatMap GB(bn->grad_ptr(), k, n);
                   GA.noalias() += G * B.transpose();
                   GB.noalias() += A.transpose() * G;
                 });
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<float> out(a.numel());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  auto an = a.node(), bn = b.node();
  return make_op(a.shape(), std::move(out), {a, b}, [an, bn](TapeNode& o) {
    float* ga = an->grad_ptr();
    float* gb = bn->grad_ptr();
    for (size_t i = 0; i < o.grad.size(); ++i) {
      ga[i] += o.grad[i];
      gb[i] += o.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<float> out(a.numel());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  auto an = a.node(), bn = b.node();
  return make_op(a.shape(), std::move(out), {a, b}, [an, bn](TapeNode& o) {
    float* ga = an->grad_ptr();
    float* gb = bn->grad_ptr();
    for (size_t i = 0; i < o.grad.size(); ++i) {
      ga[i] += o.grad[i];
      gb[i] -= o.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<float> out(a.numel());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  auto an = a.node(), bn = b.node();
  return make_op(a.shape(), std::move(out), {a, b}, [an, bn](TapeNode& o) {
    float* ga = an->grad_ptr();
    float* gb = bn->grad_ptr();
    for (size_t i = 0; i < o.grad.size(); ++i) {
      ga[i] += o.grad[i] * bn->data[i];
      gb[i] += o.grad[i] * an->data[i];
    }
  });
}

Tensor scale(const Tensor& a, float s) {
  std::vector<float> out(a.numel());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * s;
  auto an = a.node();
  return make_op(a.shape(), std::move(out), {a}, [an, s](TapeNode& o) {
    float* ga = an->grad_ptr();
    for (size_t i = 0; i < o.grad.size(); ++i) ga[i] += o.grad[i] * s;
  });
}

Tensor add_scalar(const Tensor& a, float s) {
  std::vector<float> out(a.numel());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + s;
  auto an = a.node();
  return make_op(a.shape(), std::move(out), {a}, [an](TapeNode& o) {
    float* ga = an->grad_ptr();
    for (size_t i = 0; i < o.grad.size(); ++i) ga[i] += o.grad[i];
  });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0f); }

Tensor sigmoid(const Tensor& a) {
  std::vector<float> out(a.numel());
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = 1.0f / (1.0f + std::exp(-a.data()[i]));
  auto an = a.node();
  return make_op(a.shape(), std::move(out), {a}, [an](TapeNode& o) {
    float* ga = an->grad_ptr();
    for (size_t i = 0; i < o.grad.size(); ++i) {
      float y = o.data[i];
      ga[i] += o.grad[i] * y * (1.0f - y);
    }
  });
}

Tensor tanh(const Tensor& a) {
  std::vector<float> out(a.numel());
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.data()[i]);
  auto an = a.node();
  return make_op(a.shape(), std::move(out), {a}, [an](TapeNode& o) {
    float* ga = an->grad_ptr();
    for (size_t i = 0; i < o.grad.size(); ++i) {
      float y = o.data[i];
      ga[i] += o.grad[i] * (1.0f - y * y);
    }
  });
}

Tensor log(const Tensor& a) {
  std::vector<float> out(a.numel());
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::log(a.data()[i]);
  auto an = a.node();
  return make_op(a.shape(), std::move(out), {a}, [an](TapeNode& o) {
    float* ga = an->grad_ptr();
    for (size_t i = 0; i < o.grad.size(); ++i)
      ga[i] += o.grad[i] / an->data[i];
  });
}

Tensor activation(const Tensor& a, Activation kind) {
  return kind == Activation::kSigmoid ? sigmoid(a) : tanh(a);
}

Tensor softmax(const Tensor& scores, const std::vector<bool>* mask) {
  if (scores.rank() != 1)
    throw DimensionError("softmax: expected rank-1, got " +
                         shape_str(scores.shape()));
  const size_t n = scores.numel();
  if (mask && mask->size() != n)
    throw DimensionError("softmax: mask length mismatch");
  float mx = -std::numeric_limits<float>::infinity();
  size_t live = 0;
  for (size_t i = 0; i < n; ++i) {
    if (mask && !(*mask)[i]) continue;
    ++live;
    mx = std::max(mx, scores.data()[i]);
  }
  if (live == 0) throw DataError("softmax: all positions masked");
  std::vector<float> out(n, 0.0f);
  float z = 0.0f;
  for (size_t i = 0; i < n; ++i) {
    if (mask && !(*mask)[i]) continue;
    out[i] = std::exp(scores.data()[i] - mx);
    z += out[i];
  }
  for (float& x : out) x /= z;
  auto sn = scores.node();
  std::vector<bool> mask_copy = mask ? *mask : std::vector<bool>();
  return make_op(scores.shape(), std::move(out), {scores},
                 [sn, mask_copy](TapeNode& o) {
                   float dot = 0.0f;
                   for (size_t i = 0; i < o.data.size(); ++i)
                     dot += o.grad[i] * o.data[i];
                   float* gs = sn->grad_ptr();
                   for (size_t i = 0; i < o.data.size(); ++i) {
                     if (!mask_copy.empty() && !mask_copy[i]) continue;
                     gs[i] += o.data[i] * (o.grad[i] - dot);
                   }
                 });
}

Tensor log_softmax(const Tensor& scores) {
  if (scores.rank() != 1)
    throw DimensionError("log_softmax: expected rank-1, got " +
                         shape_str(scores.shape()));
  const size_t n = scores.numel();
  float mx = *std::max_element(scores.data().begin(), scores.data().end());
  float z = 0.0f;
  for (size_t i = 0; i < n; ++i) z += std::exp(scores.data()[i] - mx);
  const float logz = std::log(z) + mx;
  std::vector<float> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = scores.data()[i] - logz;
  auto sn = scores.node();
  return make_op(scores.shape(), std::move(out), {scores}, [sn](TapeNode& o) {
    float gsum = 0.0f;
    for (float g : o.grad) gsum += g;
    float* gs = sn->grad_ptr();
    for (size_t i = 0; i < o.data.size(); ++i)
      gs[i] += o.grad[i] - std::exp(o.data[i]) * gsum;
  });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const size_t rank = parts[0].rank();
  if (axis < 0 || static_cast<size_t>(axis) >= rank)
    throw DimensionError("concat: bad axis");
  Shape out_shape = parts[0].shape();
  for (size_t p = 1; p < parts.size(); ++p) {
    const Shape& s = parts[p].shape();
    if (s.size() != rank)
      throw DimensionError("concat: rank mismatch");
    for (size_t d = 0; d < rank; ++d) {
      if (static_cast<int>(d) == axis) continue;
      if (s[d] != out_shape[d])
        throw DimensionError("concat: non-axis dimension mismatch " +
                             shape_str(parts[0].shape()) + " vs " +
                             shape_str(s));
    }
    out_shape[axis] += s[axis];
  }
  // outer = product of dims before axis, inner = product after
  size_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= out_shape[d];
  for (size_t d = axis + 1; d < rank; ++d) inner *= out_shape[d];
  std::vector<float> out(shape_numel(out_shape));
  size_t axis_off = 0;
  std::vector<size_t> offsets;
  for (const Tensor& p : parts) {
    offsets.push_back(axis_off);
    const size_t pa = p.dim(axis);
    for (size_t o = 0; o < outer; ++o) {
      std::copy_n(p.data().data() + o * pa * inner, pa * inner,
                  out.data() + (o * out_shape[axis] + axis_off) * inner);
    }
    axis_off += pa;
  }
  std::vector<std::shared_ptr<TapeNode>> pnodes;
  std::vector<int> axis_dims;
  for (const Tensor& p : parts) {
    pnodes.push_back(p.node());
    axis_dims.push_back(p.dim(axis));
  }
  const int total_axis = out_shape[axis];
  return make_op(
      out_shape, std::move(out), parts,
      [pnodes, offsets, axis_dims, outer, inner, total_axis](TapeNode& o) {
        for (size_t p = 0; p < pnodes.size(); ++p) {
          float* gp = pnodes[p]->grad_ptr();
          const size_t pa = axis_dims[p];
          for (size_t ou = 0; ou < outer; ++ou) {
            const float* src =
                o.grad.data() + (ou * total_axis + offsets[p]) * inner;
            float* dst = gp + ou * pa * inner;
            for (size_t i = 0; i < pa * inner; ++i) dst[i] += src[i];
          }
        }
      });
}

Tensor slice(const Tensor& a, int axis, int start, int len) {
  const size_t rank = a.rank();
  if (axis < 0 || static_cast<size_t>(axis) >= rank)
    throw DimensionError("slice: bad axis");
  if (start < 0 || len < 1 || start + len > a.dim(axis))
    throw DimensionError("slice: range [" + std::to_string(start) + "," +
                         std::to_string(start + len) + ") out of bounds for " +
                         shape_str(a.shape()));
  size_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= a.dim(d);
  for (size_t d = axis + 1; d < rank; ++d) inner *= a.dim(d);
  Shape out_shape = a.shape();
  out_shape[axis] = len;
  std::vector<float> out(shape_numel(out_shape));
  const int full = a.dim(axis);
  for (size_t o = 0; o < outer; ++o)
    std::copy_n(a.data().data() + (o * full + start) * inner, len * inner,
                out.data() + o * len * inner);
  auto an = a.node();
  return make_op(out_shape, std::move(out), {a},
                 [an, outer, inner, full, start, len](TapeNode& o) {
                   float* ga = an->grad_ptr();
                   for (size_t ou = 0; ou < outer; ++ou) {
                     const float* src = o.grad.data() + ou * len * inner;
                     float* dst = ga + (ou * full + start) * inner;
                     for (size_t i = 0; i < static_cast<size_t>(len) * inner;
                          ++i)
                       dst[i] += src[i];
                   }
                 });
}

Tensor maxout_pairs(const Tensor& a) {
  const int last = a.dim(a.rank() - 1);
  if (last % 2 != 0)
    throw DimensionError("maxout_pairs: last dimension must be even, got " +
                         shape_str(a.shape()));
  Shape out_shape = a.shape();
  out_shape.back() = last / 2;
  const size_t pairs = a.numel() / 2;
  std::vector<float> out(pairs);
  std::vector<uint8_t> winner(pairs);  // 0 = first of the pair
  for (size_t j = 0; j < pairs; ++j) {
    float lo = a.data()[2 * j], hi = a.data()[2 * j + 1];
    winner[j] = hi > lo ? 1 : 0;
    out[j] = winner[j] ? hi : lo;
  }
  auto an = a.node();
  return make_op(out_shape, std::move(out), {a},
                 [an, winner](TapeNode& o) {
                   float* ga = an->grad_ptr();
                   for (size_t j = 0; j < o.data.size(); ++j)
                     ga[2 * j + winner[j]] += o.grad[j];
                 });
}

Tensor sum(const Tensor& a) {
  float s = 0.0f;
  for (float x : a.data()) s += x;
  auto an = a.node();
  return make_op({1}, {s}, {a}, [an](TapeNode& o) {
    float* ga = an->grad_ptr();
    for (size_t i = 0; i < an->data.size(); ++i) ga[i] += o.grad[0];
  });
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw DimensionError("stack_rows: no inputs");
  const int d = rows[0].dim(0);
  std::vector<Tensor> as_rows;
  as_rows.reserve(rows.size());
  for (const Tensor& r : rows) {
    if (r.rank() != 1 || r.dim(0) != d)
      throw DimensionError("stack_rows: inconsistent row shapes");
    auto n = r.node();
    Tensor row = make_op({1, d}, r.data(), {r}, [n](TapeNode& o) {
      float* g = n->grad_ptr();
      for (size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
    });
    as_rows.push_back(row);
  }
  return concat(as_rows, 0);
}

Tensor reshape(const Tensor& a, const Shape& shape) {
  if (shape_numel(shape) != a.numel())
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) +
                         " as " + shape_str(shape));
  auto an = a.node();
  return make_op(shape, a.data(), {a}, [an](TapeNode& o) {
    float* ga = an->grad_ptr();
    for (size_t i = 0; i < o.grad.size(); ++i) ga[i] += o.grad[i];
  });
}

Tensor dot(const Tensor& a, const Tensor& b) { return sum(mul(a, b)); }

Tensor dropout(const Tensor& a, float rate, bool training, Rng& rng) {
  if (rate < 0.0f || rate >= 1.0f)
    throw ConfigError("dropout: rate must be in [0,1), got " +
                      std::to_string(rate));
  if (!training || rate == 0.0f) return a;
  const float keep = 1.0f - rate;
  std::vector<float> mask(a.numel());
  for (float& m : mask) m = rng.bernoulli(rate) ? 0.0f : 1.0f / keep;
  std::vector<float> out(a.numel());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * mask[i];
  auto an = a.node();
  return make_op(a.shape(), std::move(out), {a},
                 [an, mask](TapeNode& o) {
                   float* ga = an->grad_ptr();
                   for (size_t i = 0; i < o.grad.size(); ++i)
                     ga[i] += o.grad[i] * mask[i];
                 });
}

void backward(const Tensor& loss) {
  if (loss.numel() != 1)
    throw DimensionError("backward: loss must be scalar, got " +
                         shape_str(loss.shape()));
  // Iterative post-order over parents gives a topological order.
  std::vector<std::shared_ptr<TapeNode>> order;
  std::unordered_set<TapeNode*> seen;
  struct Frame {
    std::shared_ptr<TapeNode> node;
    size_t next = 0;
  };
  std::vector<Frame> stack;
  if (seen.insert(loss.node().get()).second) stack.push_back({loss.node()});
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.node->parents.size()) {
      auto p = f.node->parents[f.next++];
      if (seen.insert(p.get()).second) stack.push_back({p});
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }
  loss.node()->grad_ptr()[0] = 1.0f;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TapeNode& n = **it;
    if (n.backprop && !n.grad.empty()) n.backprop(n);
  }
  // Consume the tape: drop the graph edges, keep leaf grads.
  for (auto& n : order) {
    n->backprop = nullptr;
    n->parents.clear();
  }
}

}  // namespace snet
