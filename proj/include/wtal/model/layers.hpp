#pragma once

#include <string>
#include <utility>
#include <vector>

#include "wtal/nn/ops.hpp"

namespace wtal::model {

using nn::Rng;
using nn::Tensor;

// Named parameter handles, in a fixed order. Names are stable across runs and
// are what checkpoints store.
using ParamList = std::vector<std::pair<std::string, Tensor>>;

std::vector<Tensor> tensors_of(const ParamList& params);

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation.
Tensor uniform_param(nn::Shape shape, std::size_t fan_in, Rng& rng);
Tensor normal_param(nn::Shape shape, double stddev, Rng& rng);

struct Linear {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]

  static Linear init(std::size_t in, std::size_t out, Rng& rng);
  Tensor operator()(const Tensor& x) const { return nn::add_bias(nn::matmul(x, weight), bias); }
  void collect(const std::string& prefix, ParamList& out) const;
};

struct Conv1d {
  Tensor weight;  // [K x C_in x C_out]
  Tensor bias;    // [C_out]

  static Conv1d init(std::size_t in, std::size_t out, std::size_t kernel, Rng& rng);
  Tensor operator()(const Tensor& x) const { return nn::conv1d(x, weight, bias); }
  void collect(const std::string& prefix, ParamList& out) const;
};

struct LayerNorm {
  Tensor gamma;
  Tensor beta;

  static LayerNorm init(std::size_t width);
  Tensor operator()(const Tensor& x) const { return nn::layer_norm(x, gamma, beta); }
  void collect(const std::string& prefix, ParamList& out) const;
};

// conv(k=3) -> ReLU -> conv(k=3) -> sigmoid, producing a [T x 1] track.
struct AttentionStack {
  Conv1d hidden;
  Conv1d output;

  static AttentionStack init(std::size_t in, std::size_t hidden_width, Rng& rng);
  Tensor operator()(const Tensor& features) const;
  void collect(const std::string& prefix, ParamList& out) const;
};

}  // namespace wtal::model
