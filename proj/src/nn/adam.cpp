#include "wtal/nn/adam.hpp"

#include <cmath>

#include "wtal/errors.hpp"

namespace wtal::nn {

void adam_step(std::vector<Tensor>& params, AdamState& state, const AdamConfig& config) {
  if (config.lr <= 0.0) throw ArgumentError("adam: learning rate must be positive");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.numel(), 0.0);
      state.v.emplace_back(p.numel(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ArgumentError("adam: state does not match parameter list");
  ++state.step;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto values = params[p].mutable_data();
    const auto grad = params[p].grad();
    auto& m = state.m[p];
    auto& v = state.v[p];
    for (std::size_t i = 0; i < values.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grad[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      values[i] -= config.lr * (m_hat / (std::sqrt(v_hat) + config.eps) + config.weight_decay * values[i]);
    }
  }
}

void zero_grads(std::vector<Tensor>& params) {
  for (auto& p : params) p.zero_grad();
}

}  // namespace wtal::nn
