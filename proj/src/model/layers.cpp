#include "wtal/model/layers.hpp"

#include <cmath>

namespace wtal::model {

std::vector<Tensor> tensors_of(const ParamList& params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const auto& [name, t] : params) out.push_back(t);
  return out;
}

Tensor uniform_param(nn::Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(nn::numel_of(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor::from(std::move(shape), std::move(v), true);
}

Tensor normal_param(nn::Shape shape, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(nn::numel_of(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor::from(std::move(shape), std::move(v), true);
}

Linear Linear::init(std::size_t in, std::size_t out, Rng& rng) {
  Linear l;
  l.weight = uniform_param({in, out}, in, rng);
  l.bias = uniform_param({out}, in, rng);
  return l;
}

void Linear::collect(const std::string& prefix, ParamList& out) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

Conv1d Conv1d::init(std::size_t in, std::size_t out, std::size_t kernel, Rng& rng) {
  Conv1d c;
  c.weight = uniform_param({kernel, in, out}, in * kernel, rng);
  c.bias = uniform_param({out}, in * kernel, rng);
  return c;
}

void Conv1d::collect(const std::string& prefix, ParamList& out) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

LayerNorm LayerNorm::init(std::size_t width) {
  return {Tensor::full({width}, 1.0, true), Tensor::zeros({width}, true)};
}

void LayerNorm::collect(const std::string& prefix, ParamList& out) const {
  out.emplace_back(prefix + ".gamma", gamma);
  out.emplace_back(prefix + ".beta", beta);
}

AttentionStack AttentionStack::init(std::size_t in, std::size_t hidden_width, Rng& rng) {
  return {Conv1d::init(in, hidden_width, 3, rng), Conv1d::init(hidden_width, 1, 3, rng)};
}

Tensor AttentionStack::operator()(const Tensor& features) const {
  return nn::sigmoid(output(nn::relu(hidden(features))));
}

void AttentionStack::collect(const std::string& prefix, ParamList& out) const {
  hidden.collect(prefix + ".hidden", out);
  output.collect(prefix + ".output", out);
}

}  // namespace wtal::model
