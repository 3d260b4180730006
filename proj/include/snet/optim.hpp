#pragma once

#include <map>
#include <string>
#include <vector>

#include "snet/tensor.hpp"

namespace snet {

// Named parameter collection shared by both models and the checkpoint code.
// Ordered by name so serialization and update order are canonical.
using ParamMap = std::map<std::string, Tensor>;

struct AdaDeltaState {
  float rho = 0.95f;
  float epsilon = 1e-6f;
  float learning_rate = 1.0f;
  // keyed like the parameter map; created lazily with matching shapes
  std::map<std::string, std::vector<float>> sq_grad;
  std::map<std::string, std::vector<float>> sq_update;
};

// One AdaDelta update over every parameter using the gradients accumulated
// on the tensors. Clears gradients afterwards. Throws TrainingError naming
// the parameter on a non-finite gradient. clip > 0 rescales the global
// gradient norm down to clip first.
void adadelta_step(ParamMap& params, AdaDeltaState& state, float clip = 0.0f);

}  // namespace snet
