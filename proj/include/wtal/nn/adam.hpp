#pragma once

#include <vector>

#include "wtal/nn/tensor.hpp"

namespace wtal::nn {

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Decoupled: applied to the parameter directly, not folded into the
  // moment estimates.
  double weight_decay = 0.0;
};

// First and second moments per parameter, plus the shared step counter.
struct AdamState {
  long long step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

// One update over `params` using their accumulated gradients; a parameter
// with no accumulated gradient is treated as having a zero gradient.
void adam_step(std::vector<Tensor>& params, AdamState& state, const AdamConfig& config);

void zero_grads(std::vector<Tensor>& params);

}  // namespace wtal::nn
