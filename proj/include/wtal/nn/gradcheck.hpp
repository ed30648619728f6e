#pragma once

#include <functional>
#include <string>
#include <vector>

#include "wtal/nn/tensor.hpp"

namespace wtal::nn {

struct GradCheckReport {
  std::string op_name;
  double max_rel_error = 0.0;
  bool passed = false;
  // Set when some coordinate sits on a kink (left and right difference
  // quotients disagree, or the two central differences do); such
  // coordinates are excluded from max_rel_error.
  bool tie_degenerate = false;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  // The coordinate behind max_rel_error.
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

struct GradCheckOptions {
  double eps = 1e-4;  // outer step h; the inner step is h/2
  double tol = 1e-4;
};

// Compares the autodiff gradient of the scalar f() with respect to every
// tensor in `inputs` against Richardson-extrapolated central differences,
// (4 D(h/2) - D(h)) / 3. f must be deterministic
// and must read the inputs through the same handles (they are perturbed in
// place). Relative error uses max(|analytic|, |numeric|, 1e-8) as denominator.
GradCheckReport finite_diff_check(const std::string& name, const std::function<Tensor()>& f,
                                  std::vector<Tensor> inputs, GradCheckOptions options = {});

GradCheckReport finite_diff_check(const std::string& name, const std::function<Tensor(const Tensor&)>& f,
                                  const Tensor& x, GradCheckOptions options = {});

}  // namespace wtal::nn
