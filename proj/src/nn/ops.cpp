#include "wtal/nn/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "wtal/errors.hpp"

namespace wtal::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

using detail::Node;

ConstMapMat view(const Node& n, std::size_t rows, std::size_t cols) {
  return ConstMapMat(n.value.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

MapMat grad_view(Node& n, std::size_t rows, std::size_t cols) {
  return MapMat(n.ensure_grad().data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.ndim() != 2) throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_str(t.shape()));
}

bool is_track(const Tensor& t) { return t.ndim() == 1 || (t.ndim() == 2 && t.shape()[1] == 1); }

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return;
  if (is_track(a) && is_track(b) && a.numel() == b.numel()) return;
  throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

void accumulate(Node& n, std::span<const double> delta) {
  if (!n.requires_grad) return;
  auto& g = n.ensure_grad();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
}

// Shared implementation for elementwise unary ops: fn computes the value,
// dfn the local derivative from (input, output).
template <class F, class DF>
Tensor unary(const char* name, const Tensor& x, F fn, DF dfn) {
  const auto in = x.data();
  Buffer out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fn(in[i]);
  return make_result(name, x.shape(), std::move(out), {x}, [dfn](Node& self) {
    Node& a = *self.inputs[0];
    if (!a.requires_grad) return;
    auto& g = a.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * dfn(a.value[i], self.value[i]);
  });
}

// Shared implementation for same-shape binary ops; dfn returns the pair of
// partial derivatives.
template <class F, class DF>
Tensor binary(const char* name, const Tensor& a, const Tensor& b, F fn, DF dfn) {
  require_same(a, b, name);
  const auto x = a.data();
  const auto y = b.data();
  Buffer out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fn(x[i], y[i]);
  return make_result(name, a.shape(), std::move(out), {a, b}, [dfn](Node& self) {
    Node& l = *self.inputs[0];
    Node& r = *self.inputs[1];
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const auto [dl, dr] = dfn(l.value[i], r.value[i]);
      if (l.requires_grad) l.ensure_grad()[i] += self.grad[i] * dl;
      if (r.requires_grad) r.ensure_grad()[i] += self.grad[i] * dr;
    }
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions disagree " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  Buffer out(m * n);
  MapMat(out.data(), m, n).noalias() = view(*a.node(), m, k) * view(*b.node(), k, n);
  return make_result("matmul", {m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    Node& l = *self.inputs[0];
    Node& r = *self.inputs[1];
    ConstMapMat grad(self.grad.data(), m, n);
    if (l.requires_grad) grad_view(l, m, k).noalias() += grad * view(r, k, n).transpose();
    if (r.requires_grad) grad_view(r, k, n).noalias() += view(l, m, k).transpose() * grad;
  });
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  Buffer out(m * n);
  MapMat(out.data(), n, m) = view(*a.node(), m, n).transpose();
  return make_result("transpose", {n, m}, std::move(out), {a}, [m, n](Node& self) {
    Node& in = *self.inputs[0];
    if (!in.requires_grad) return;
    grad_view(in, m, n) += ConstMapMat(self.grad.data(), n, m).transpose();
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary("add", a, b, [](double x, double y) { return x + y; },
                [](double, double) { return std::pair{1.0, 1.0}; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary("sub", a, b, [](double x, double y) { return x - y; },
                [](double, double) { return std::pair{1.0, -1.0}; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary("mul", a, b, [](double x, double y) { return x * y; },
                [](double x, double y) { return std::pair{y, x}; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary("div", a, b, [](double x, double y) { return x / y; },
                [](double x, double y) { return std::pair{1.0 / y, -x / (y * y)}; });
}

// Ties send the gradient to the first operand.
Tensor minimum(const Tensor& a, const Tensor& b) {
  return binary("minimum", a, b, [](double x, double y) { return std::min(x, y); },
                [](double x, double y) { return x <= y ? std::pair{1.0, 0.0} : std::pair{0.0, 1.0}; });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
  return binary("maximum", a, b, [](double x, double y) { return std::max(x, y); },
                [](double x, double y) { return x >= y ? std::pair{1.0, 0.0} : std::pair{0.0, 1.0}; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary("scale", a, [factor](double x) { return x * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary("add_scalar", a, [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& x) {
  return unary("relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      "sigmoid", x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double s) { return s * (1.0 - s); });
}

Tensor softplus(const Tensor& x) {
  return unary(
      "softplus", x, [](double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); },
      [](double v, double) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      });
}

Tensor log_clamped(const Tensor& x, double floor) {
  return unary("log_clamped", x, [floor](double v) { return std::log(std::max(v, floor)); },
               [floor](double v, double) { return v > floor ? 1.0 / v : 0.0; });
}

Tensor pow_scalar(const Tensor& x, double p) {
  return unary("pow_scalar", x, [p](double v) { return std::pow(v, p); },
               [p](double v, double) { return v == 0.0 && p < 1.0 ? 0.0 : p * std::pow(v, p - 1.0); });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_matrix(x, "add_bias");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (bias.numel() != n) {
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " does not fit " + shape_str(x.shape()));
  }
  Buffer out(x.data().begin(), x.data().end());
  const auto b = bias.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += b[j];
  return make_result("add_bias", x.shape(), std::move(out), {x, bias}, [m, n](Node& self) {
    Node& in = *self.inputs[0];
    Node& b = *self.inputs[1];
    accumulate(in, self.grad);
    if (b.requires_grad) {
      auto& g = b.ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
    }
  });
}

Tensor scale_rows(const Tensor& x, const Tensor& w) {
  require_matrix(x, "scale_rows");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (w.numel() != m) throw DimensionError("scale_rows: weights " + shape_str(w.shape()) + " vs " + shape_str(x.shape()));
  Buffer out(m * n);
  const auto xv = x.data();
  const auto wv = w.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] * wv[i];
  return make_result("scale_rows", x.shape(), std::move(out), {x, w}, [m, n](Node& self) {
    Node& in = *self.inputs[0];
    Node& wt = *self.inputs[1];
    if (in.requires_grad) {
      auto& g = in.ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[i * n + j] * wt.value[i];
    }
    if (wt.requires_grad) {
      auto& g = wt.ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i] += self.grad[i * n + j] * in.value[i * n + j];
    }
  });
}

Tensor scale_cols(const Tensor& x, const Tensor& w) {
  require_matrix(x, "scale_cols");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (w.numel() != n) throw DimensionError("scale_cols: weights " + shape_str(w.shape()) + " vs " + shape_str(x.shape()));
  Buffer out(m * n);
  const auto xv = x.data();
  const auto wv = w.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] * wv[j];
  return make_result("scale_cols", x.shape(), std::move(out), {x, w}, [m, n](Node& self) {
    Node& in = *self.inputs[0];
    Node& wt = *self.inputs[1];
    if (in.requires_grad) {
      auto& g = in.ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[i * n + j] * wt.value[j];
    }
    if (wt.requires_grad) {
      auto& g = wt.ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j] * in.value[i * n + j];
    }
  });
}

Tensor sum(const Tensor& x) {
  const auto v = x.data();
  const double s = std::accumulate(v.begin(), v.end(), 0.0);
  return make_result("sum", {1}, {s}, {x}, [](Node& self) {
    Node& in = *self.inputs[0];
    auto& g = in.ensure_grad();
    for (auto& gi : g) gi += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  const auto v = x.data();
  const double n = static_cast<double>(v.size());
  const double s = std::accumulate(v.begin(), v.end(), 0.0) / n;
  return make_result("mean", {1}, {s}, {x}, [n](Node& self) {
    Node& in = *self.inputs[0];
    auto& g = in.ensure_grad();
    for (auto& gi : g) gi += self.grad[0] / n;
  });
}

Tensor mse(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mse");
  const auto x = a.data();
  const auto y = b.data();
  const double n = static_cast<double>(x.size());
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return make_result("mse", {1}, {s / n}, {a, b}, [n](Node& self) {
    Node& l = *self.inputs[0];
    Node& r = *self.inputs[1];
    const double g = self.grad[0];
    for (std::size_t i = 0; i < l.value.size(); ++i) {
      const double d = 2.0 * (l.value[i] - r.value[i]) / n * g;
      if (l.requires_grad) l.ensure_grad()[i] += d;
      if (r.requires_grad) r.ensure_grad()[i] -= d;
    }
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ArgumentError("concat: no inputs");
  const bool flat = parts.front().ndim() == 1;
  if (flat) {
    Buffer out;
    std::vector<std::size_t> sizes;
    for (const auto& p : parts) {
      if (p.ndim() != 1) throw DimensionError("concat: mixing 1-D and 2-D inputs");
      out.insert(out.end(), p.data().begin(), p.data().end());
      sizes.push_back(p.numel());
    }
    const std::size_t total = out.size();
    return make_result("concat", {total}, std::move(out), parts, [sizes](Node& self) {
      std::size_t off = 0;
      for (std::size_t p = 0; p < sizes.size(); ++p) {
        Node& in = *self.inputs[p];
        if (in.requires_grad) {
          auto& g = in.ensure_grad();
          for (std::size_t i = 0; i < sizes[p]; ++i) g[i] += self.grad[off + i];
        }
        off += sizes[p];
      }
    });
  }
  if (axis > 1) throw DimensionError("concat: axis must be 0 or 1 for matrices");
  for (const auto& p : parts) require_matrix(p, "concat");
  const std::size_t other = axis == 0 ? parts.front().dim(1) : parts.front().dim(0);
  std::vector<std::size_t> sizes;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if ((axis == 0 ? p.dim(1) : p.dim(0)) != other) {
      throw DimensionError("concat: incompatible shapes " + shape_str(parts.front().shape()) + " and " +
                           shape_str(p.shape()));
    }
    sizes.push_back(p.dim(axis));
    total += p.dim(axis);
  }
  if (axis == 0) {
    Buffer out;
    out.reserve(total * other);
    for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
    return make_result("concat", {total, other}, std::move(out), parts, [sizes, other](Node& self) {
      std::size_t off = 0;
      for (std::size_t p = 0; p < sizes.size(); ++p) {
        Node& in = *self.inputs[p];
        const std::size_t len = sizes[p] * other;
        if (in.requires_grad) {
          auto& g = in.ensure_grad();
          for (std::size_t i = 0; i < len; ++i) g[i] += self.grad[off + i];
        }
        off += len;
      }
    });
  }
  const std::size_t rows = other;
  Buffer out(rows * total);
  std::size_t col = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto v = parts[p].data();
    for (std::size_t i = 0; i < rows; ++i)
      std::copy_n(v.begin() + i * sizes[p], sizes[p], out.begin() + i * total + col);
    col += sizes[p];
  }
  return make_result("concat", {rows, total}, std::move(out), parts, [sizes, rows, total](Node& self) {
    std::size_t col = 0;
    for (std::size_t p = 0; p < sizes.size(); ++p) {
      Node& in = *self.inputs[p];
      if (in.requires_grad) {
        auto& g = in.ensure_grad();
        for (std::size_t i = 0; i < rows; ++i)
          for (std::size_t j = 0; j < sizes[p]; ++j) g[i * sizes[p] + j] += self.grad[i * total + col + j];
      }
      col += sizes[p];
    }
  });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  if (begin >= end || end > x.dim(0)) {
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) + ") invalid for " +
                         shape_str(x.shape()));
  }
  const std::size_t width = x.numel() / x.dim(0);
  Shape shape = x.shape();
  shape[0] = end - begin;
  Buffer out(x.data().begin() + begin * width, x.data().begin() + end * width);
  return make_result("slice_rows", std::move(shape), std::move(out), {x}, [begin, width](Node& self) {
    Node& in = *self.inputs[0];
    auto& g = in.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * width + i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  require_matrix(x, "slice_cols");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (begin >= end || end > n) throw DimensionError("slice_cols: invalid column range for " + shape_str(x.shape()));
  const std::size_t w = end - begin;
  Buffer out(m * w);
  const auto v = x.data();
  for (std::size_t i = 0; i < m; ++i) std::copy_n(v.begin() + i * n + begin, w, out.begin() + i * w);
  return make_result("slice_cols", {m, w}, std::move(out), {x}, [m, n, w, begin](Node& self) {
    Node& in = *self.inputs[0];
    auto& g = in.ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) g[i * n + begin + j] += self.grad[i * w + j];
  });
}

Tensor pick(const Tensor& x, std::span<const std::size_t> rows, std::span<const std::size_t> cols) {
  require_matrix(x, "pick");
  if (rows.size() != cols.size() || rows.empty()) throw ArgumentError("pick: index lists must be equal and non-empty");
  const std::size_t n = x.dim(1);
  std::vector<std::size_t> flat(rows.size());
  Buffer out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= x.dim(0) || cols[i] >= n) throw ArgumentError("pick: index out of range");
    flat[i] = rows[i] * n + cols[i];
    out[i] = x.data()[flat[i]];
  }
  return make_result("pick", {rows.size()}, std::move(out), {x}, [flat](Node& self) {
    Node& in = *self.inputs[0];
    auto& g = in.ensure_grad();
    for (std::size_t i = 0; i < flat.size(); ++i) g[flat[i]] += self.grad[i];
  });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  // Normalize along `axis` by iterating over (outer, stride) lanes.
  std::size_t lanes, len, stride, lane_step;
  if (x.ndim() == 1) {
    if (axis != 0) throw DimensionError("softmax: axis out of range for a 1-D tensor");
    lanes = 1, len = x.numel(), stride = 1, lane_step = 0;
  } else if (x.ndim() == 2) {
    const std::size_t m = x.dim(0), n = x.dim(1);
    if (axis == 1) {
      lanes = m, len = n, stride = 1, lane_step = n;
    } else if (axis == 0) {
      lanes = n, len = m, stride = n, lane_step = 1;
    } else {
      throw DimensionError("softmax: axis out of range for a matrix");
    }
  } else {
    throw DimensionError("softmax: supports 1-D and 2-D tensors");
  }
  const auto v = x.data();
  Buffer out(v.size());
  for (std::size_t l = 0; l < lanes; ++l) {
    const std::size_t base = l * lane_step;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < len; ++i) mx = std::max(mx, v[base + i * stride]);
    double z = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const double e = std::exp(v[base + i * stride] - mx);
      out[base + i * stride] = e;
      z += e;
    }
    for (std::size_t i = 0; i < len; ++i) out[base + i * stride] /= z;
  }
  return make_result("softmax", x.shape(), std::move(out), {x}, [lanes, len, stride, lane_step](Node& self) {
    Node& in = *self.inputs[0];
    auto& g = in.ensure_grad();
    for (std::size_t l = 0; l < lanes; ++l) {
      const std::size_t base = l * lane_step;
      double dot = 0.0;
      for (std::size_t i = 0; i < len; ++i) dot += self.grad[base + i * stride] * self.value[base + i * stride];
      for (std::size_t i = 0; i < len; ++i) {
        const std::size_t idx = base + i * stride;
        g[idx] += self.value[idx] * (self.grad[idx] - dot);
      }
    }
  });
}

Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_matrix(x, "conv1d");
  if (weight.ndim() != 3) throw DimensionError("conv1d: weight must be [K x C_in x C_out]");
  const std::size_t kw = weight.dim(0), cin = weight.dim(1), cout = weight.dim(2);
  if (kw % 2 == 0) throw ConfigError("conv1d: kernel width must be odd, got " + std::to_string(kw));
  if (x.dim(1) != cin) {
    throw DimensionError("conv1d: input channels " + std::to_string(x.dim(1)) + " vs kernel " + std::to_string(cin));
  }
  if (bias.numel() != cout) throw DimensionError("conv1d: bias length mismatch");
  const std::size_t t_len = x.dim(0);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(kw / 2);
  const auto T = static_cast<std::ptrdiff_t>(t_len);

  // Tap k maps input row t + k - pad onto output row t. Returns the
  // overlapping [out_begin, out_begin + n) and its input start.
  auto tap_range = [T, pad](std::size_t k) {
    const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - pad;
    const std::ptrdiff_t out_begin = std::max<std::ptrdiff_t>(0, -shift);
    const std::ptrdiff_t out_end = std::min<std::ptrdiff_t>(T, T - shift);
    return std::tuple{out_begin, out_begin + shift, std::max<std::ptrdiff_t>(0, out_end - out_begin)};
  };

  Buffer out(t_len * cout);
  MapMat y(out.data(), T, cout);
  y.rowwise() = Eigen::Map<const Eigen::RowVectorXd>(bias.data().data(), cout);
  const ConstMapMat xin = view(*x.node(), t_len, cin);
  for (std::size_t k = 0; k < kw; ++k) {
    const auto [ob, ib, n] = tap_range(k);
    if (n == 0) continue;
    ConstMapMat wk(weight.data().data() + k * cin * cout, cin, cout);
    y.middleRows(ob, n).noalias() += xin.middleRows(ib, n) * wk;
  }
  return make_result("conv1d", {t_len, cout}, std::move(out), {x, weight, bias},
                     [t_len, cin, cout, kw, tap_range](Node& self) {
                       Node& in = *self.inputs[0];
                       Node& w = *self.inputs[1];
                       Node& b = *self.inputs[2];
                       const ConstMapMat g(self.grad.data(), t_len, cout);
                       if (b.requires_grad) {
                         Eigen::Map<Eigen::RowVectorXd>(b.ensure_grad().data(), cout) += g.colwise().sum();
                       }
                       for (std::size_t k = 0; k < kw; ++k) {
                         const auto [ob, ib, n] = tap_range(k);
                         if (n == 0) continue;
                         if (w.requires_grad) {
                           MapMat gw(w.ensure_grad().data() + k * cin * cout, cin, cout);
                           gw.noalias() += view(in, t_len, cin).middleRows(ib, n).transpose() * g.middleRows(ob, n);
                         }
                         if (in.requires_grad) {
                           ConstMapMat wk(w.value.data() + k * cin * cout, cin, cout);
                           grad_view(in, t_len, cin).middleRows(ib, n).noalias() += g.middleRows(ob, n) * wk.transpose();
                         }
                       }
                     });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_matrix(x, "layer_norm");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (gamma.numel() != n || beta.numel() != n) throw DimensionError("layer_norm: affine parameters must have length " + std::to_string(n));
  const auto v = x.data();
  const auto gm = gamma.data();
  const auto bt = beta.data();
  Buffer out(m * n), xhat(m * n), inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += v[i * n + j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (v[i * n + j] - mu) * (v[i * n + j] - mu);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (v[i * n + j] - mu) * inv_std[i];
      out[i * n + j] = xhat[i * n + j] * gm[j] + bt[j];
    }
  }
  return make_result("layer_norm", x.shape(), std::move(out), {x, gamma, beta},
                     [m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                       Node& in = *self.inputs[0];
                       Node& gm = *self.inputs[1];
                       Node& bt = *self.inputs[2];
                       for (std::size_t i = 0; i < m; ++i) {
                         const double* g = self.grad.data() + i * n;
                         const double* xh = xhat.data() + i * n;
                         if (gm.requires_grad || bt.requires_grad) {
                           for (std::size_t j = 0; j < n; ++j) {
                             if (gm.requires_grad) gm.ensure_grad()[j] += g[j] * xh[j];
                             if (bt.requires_grad) bt.ensure_grad()[j] += g[j];
                           }
                         }
                         if (!in.requires_grad) continue;
                         double mean_d = 0.0, mean_dx = 0.0;
                         for (std::size_t j = 0; j < n; ++j) {
                           const double d = g[j] * gm.value[j];
                           mean_d += d;
                           mean_dx += d * xh[j];
                         }
                         mean_d /= static_cast<double>(n);
                         mean_dx /= static_cast<double>(n);
                         auto& gi = in.ensure_grad();
                         for (std::size_t j = 0; j < n; ++j) {
                           const double d = g[j] * gm.value[j];
                           gi[i * n + j] += inv_std[i] * (d - mean_d - xh[j] * mean_dx);
                         }
                       }
                     });
}

Tensor normalize_rows(const Tensor& x, double eps) {
  require_matrix(x, "normalize_rows");
  const std::size_t m = x.dim(0), n = x.dim(1);
  const auto v = x.data();
  Buffer out(m * n), norms(m);
  for (std::size_t i = 0; i < m; ++i) {
    double s = eps;
    for (std::size_t j = 0; j < n; ++j) s += v[i * n + j] * v[i * n + j];
    norms[i] = std::sqrt(s);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = v[i * n + j] / norms[i];
  }
  return make_result("normalize_rows", x.shape(), std::move(out), {x}, [m, n, norms = std::move(norms)](Node& self) {
    Node& in = *self.inputs[0];
    auto& g = in.ensure_grad();
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += self.grad[i * n + j] * self.value[i * n + j];
      for (std::size_t j = 0; j < n; ++j) {
        g[i * n + j] += (self.grad[i * n + j] - self.value[i * n + j] * dot) / norms[i];
      }
    }
  });
}

std::vector<std::size_t> topk_indices(std::span<const double> values, std::size_t k) {
  if (k < 1 || k > values.size()) {
    throw ArgumentError("top-k: k=" + std::to_string(k) + " outside [1, " + std::to_string(values.size()) + "]");
  }
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) { return values[a] > values[b] || (values[a] == values[b] && a < b); });
  idx.resize(k);
  return idx;
}

Tensor topk_mean(const Tensor& x, std::size_t k) {
  if (!is_track(x)) throw DimensionError("topk_mean: expected a track, got " + shape_str(x.shape()));
  const auto idx = topk_indices(x.data(), k);
  double s = 0.0;
  for (auto i : idx) s += x.data()[i];
  const double kd = static_cast<double>(k);
  return make_result("topk_mean", {1}, {s / kd}, {x}, [idx, kd](Node& self) {
    Node& in = *self.inputs[0];
    auto& g = in.ensure_grad();
    for (auto i : idx) g[i] += self.grad[0] / kd;
  });
}

Tensor topk_mean_columns(const Tensor& x, std::size_t k) {
  require_matrix(x, "topk_mean_columns");
  const std::size_t t_len = x.dim(0), c = x.dim(1);
  std::vector<std::vector<std::size_t>> chosen(c);
  Buffer out(c);
  Buffer column(t_len);
  const auto v = x.data();
  for (std::size_t j = 0; j < c; ++j) {
    for (std::size_t t = 0; t < t_len; ++t) column[t] = v[t * c + j];
    chosen[j] = topk_indices(column, k);
    double s = 0.0;
    for (auto t : chosen[j]) s += column[t];
    out[j] = s / static_cast<double>(k);
  }
  const double kd = static_cast<double>(k);
  return make_result("topk_mean_columns", {c}, std::move(out), {x}, [chosen = std::move(chosen), c, kd](Node& self) {
    Node& in = *self.inputs[0];
    auto& g = in.ensure_grad();
    for (std::size_t j = 0; j < c; ++j)
      for (auto t : chosen[j]) g[t * c + j] += self.grad[j] / kd;
  });
}

Tensor dropout_with_mask(const Tensor& x, std::span<const std::uint8_t> keep, double p) {
  if (keep.size() != x.numel()) throw DimensionError("dropout: mask length does not match input");
  if (p < 0.0 || p >= 1.0) throw ArgumentError("dropout: rate must be in [0, 1)");
  const double s = 1.0 / (1.0 - p);
  Buffer factor(keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) factor[i] = keep[i] ? s : 0.0;
  Buffer out(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= factor[i];
  return make_result("dropout", x.shape(), std::move(out), {x}, [factor = std::move(factor)](Node& self) {
    Node& in = *self.inputs[0];
    auto& g = in.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor[i];
  });
}

Tensor dropout(const Tensor& x, double p, Rng& rng, bool training) {
  if (!training || p == 0.0) return x;
  std::bernoulli_distribution keep_dist(1.0 - p);
  std::vector<std::uint8_t> keep(x.numel());
  for (auto& k : keep) k = keep_dist(rng) ? 1 : 0;
  return dropout_with_mask(x, keep, p);
}

Tensor masked_scaled_attention(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor& a_weights) {
  require_matrix(q, "masked_scaled_attention");
  require_matrix(k, "masked_scaled_attention");
  require_matrix(v, "masked_scaled_attention");
  if (q.dim(1) != k.dim(1)) throw DimensionError("masked_scaled_attention: query/key widths differ");
  if (k.dim(0) != v.dim(0)) throw DimensionError("masked_scaled_attention: key/value counts differ");
  if (a_weights.numel() != k.dim(0)) throw DimensionError("masked_scaled_attention: one weight per key required");
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.dim(1)));
  auto scores = scale(matmul(q, transpose(k)), inv_sqrt_d);
  return matmul(softmax(scale_cols(scores, a_weights), 1), v);
}

Tensor scaled_attention(const Tensor& q, const Tensor& k, const Tensor& v, const std::vector<bool>& key_valid) {
  require_matrix(q, "scaled_attention");
  require_matrix(k, "scaled_attention");
  if (q.dim(1) != k.dim(1)) throw DimensionError("scaled_attention: query/key widths differ");
  if (k.dim(0) != v.dim(0)) throw DimensionError("scaled_attention: key/value counts differ");
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.dim(1)));
  auto scores = scale(matmul(q, transpose(k)), inv_sqrt_d);
  if (!key_valid.empty()) {
    if (key_valid.size() != k.dim(0)) throw DimensionError("scaled_attention: mask length mismatch");
    const std::size_t a = q.dim(0), b = k.dim(0);
    Buffer bias(a * b, 0.0);
    for (std::size_t i = 0; i < a; ++i)
      for (std::size_t j = 0; j < b; ++j)
        if (!key_valid[j]) bias[i * b + j] = -std::numeric_limits<double>::infinity();
    scores = add(scores, Tensor::from({a, b}, std::move(bias)));
  }
  return matmul(softmax(scores, 1), v);
}

}  // namespace wtal::nn
