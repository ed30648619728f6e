#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "wtal/nn/tensor.hpp"

// Differentiable operations. Every function builds a graph node when any
// input requires a gradient; otherwise it is a plain computation.
//
// Matrices are 2-D row-major tensors. Where an operation takes a "track"
// (one value per row) both [n] and [n x 1] shapes are accepted.
namespace wtal::nn {

using Rng = std::mt19937_64;

// --- linear algebra ---------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// --- elementwise ------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor maximum(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor softplus(const Tensor& x);
// log(max(x, floor)); the gradient is zero where the floor is active.
Tensor log_clamped(const Tensor& x, double floor = 1e-12);
// x^p for x >= 0.
Tensor pow_scalar(const Tensor& x, double p);

// --- broadcasting -----------------------------------------------------------

// x[m x n] + bias[n] on every row.
Tensor add_bias(const Tensor& x, const Tensor& bias);
// x[i][j] * w[i]
Tensor scale_rows(const Tensor& x, const Tensor& w);
// x[i][j] * w[j]
Tensor scale_cols(const Tensor& x, const Tensor& w);

// --- reductions -------------------------------------------------------------

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor mse(const Tensor& a, const Tensor& b);

// --- shape ------------------------------------------------------------------

// Concatenate 2-D tensors along axis 0 (rows) or 1 (columns). 1-D inputs are
// concatenated end to end.
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
// Elements x[rows[i]][cols[i]] as a 1-D tensor.
Tensor pick(const Tensor& x, std::span<const std::size_t> rows, std::span<const std::size_t> cols);

// --- network layers ---------------------------------------------------------

// Max-subtracted softmax of a 1-D tensor (axis 0) or of the rows (axis 1) or
// columns (axis 0) of a matrix.
Tensor softmax(const Tensor& x, std::size_t axis);

// Same-length 1-D convolution over time. x: [T x C_in], weight:
// [K x C_in x C_out] with K odd, bias: [C_out]. Zero padding of K/2 on both
// sides.
Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// Each row divided by sqrt(|row|^2 + eps).
Tensor normalize_rows(const Tensor& x, double eps = 1e-12);

// Mean of the k largest entries of a track. Ties are broken by lowest index.
Tensor topk_mean(const Tensor& x, std::size_t k);
// topk_mean applied to each column of x[T x C]; result is [C].
Tensor topk_mean_columns(const Tensor& x, std::size_t k);
// Indices chosen by topk_mean, in selection order.
std::vector<std::size_t> topk_indices(std::span<const double> values, std::size_t k);

// Inverted dropout with an explicit keep mask (1 = keep).
Tensor dropout_with_mask(const Tensor& x, std::span<const std::uint8_t> keep, double p);
// Training mode draws a Bernoulli(1-p) keep mask from rng and rescales kept
// entries by 1/(1-p); evaluation mode is the identity.
Tensor dropout(const Tensor& x, double p, Rng& rng, bool training);

// softmax((Q K^T / sqrt(d)) * a[j] column-wise) V, with the modulation inside
// the softmax.
Tensor masked_scaled_attention(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& a_weights);

// softmax(Q K^T / sqrt(d) + mask) V where masked keys receive -inf.
// key_valid may be empty (no masking).
Tensor scaled_attention(const Tensor& q, const Tensor& k, const Tensor& v, const std::vector<bool>& key_valid = {});

}  // namespace wtal::nn
