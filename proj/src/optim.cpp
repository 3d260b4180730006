#include "snet/optim.hpp"

#include <cmath>

namespace snet {

void adadelta_step(ParamMap& params, AdaDeltaState& state, float clip) {
  float norm_sq = 0.0f;
  for (auto& [name, p] : params) {
    for (float g : p.node()->grad) {
      if (!std::isfinite(g))
        throw TrainingError("non-finite gradient for parameter '" + name + "'");
      norm_sq += g * g;
    }
  }
  float scale = 1.0f;
  if (clip > 0.0f) {
    float norm = std::sqrt(norm_sq);
    if (norm > clip) scale = clip / norm;
  }
  for (auto& [name, p] : params) {
    auto& eg = state.sq_grad[name];
    auto& ex = state.sq_update[name];
    if (eg.empty()) eg.assign(p.numel(), 0.0f);
    if (ex.empty()) ex.assign(p.numel(), 0.0f);
    auto& grad = p.node()->grad;
    auto& data = p.mutable_data();
    for (size_t i = 0; i < data.size(); ++i) {
      float g = grad.empty() ? 0.0f : grad[i] * scale;
      eg[i] = state.rho * eg[i] + (1.0f - state.rho) * g * g;
      float dx = -std::sqrt(ex[i] + state.epsilon) /
                 std::sqrt(eg[i] + state.epsilon) * g * state.learning_rate;
      ex[i] = state.rho * ex[i] + (1.0f - state.rho) * dx * dx;
      data[i] += dx;
    }
    p.zero_grad();
  }
}

}  // namespace snet
