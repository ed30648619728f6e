#pragma once

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <random>
#include <span>
#include <vector>

#include "wtal/model/config.hpp"
#include "wtal/nn/tensor.hpp"

namespace wtal::testing {

inline nn::Tensor random_tensor(nn::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0,
                                bool requires_grad = false) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> values(nn::numel_of(shape));
  for (auto& v : values) v = u(rng);
  return nn::Tensor::from(std::move(shape), std::move(values), requires_grad);
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

inline std::vector<double> values(const nn::Tensor& t) { return {t.data().begin(), t.data().end()}; }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("wtal-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Small widths so model-level tests run in milliseconds.
inline model::ModelConfig tiny_model_config(std::size_t num_classes = 3, std::size_t feature_dim = 12,
                                            std::size_t vocab_size = 20, std::size_t max_key_length = 4) {
  model::ModelConfig c;
  c.num_classes = num_classes;
  c.feature_dim = feature_dim;
  c.embed_dim = 8;
  c.attention_hidden = 6;
  c.text_heads = 2;
  c.text_ff = 10;
  c.context_tokens = 3;
  c.word_dim = 5;
  c.recon_dim = 6;
  c.head_hidden = 7;
  c.vocab_size = vocab_size;
  c.max_key_length = max_key_length;
  return c;
}

}  // namespace wtal::testing
