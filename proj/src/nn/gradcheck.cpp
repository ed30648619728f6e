#include "wtal/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "wtal/errors.hpp"

namespace wtal::nn {

GradCheckReport finite_diff_check(const std::string& name, const std::function<Tensor()>& f,
                                  std::vector<Tensor> inputs, GradCheckOptions options) {
  GradCheckReport report;
  report.op_name = name;
  for (auto& x : inputs) {
    x.set_requires_grad(true);
    x.zero_grad();
  }
  const Tensor out = f();
  if (out.numel() != 1) throw ArgumentError("finite_diff_check: f must return a scalar");
  const double f0 = out.item();
  out.backward();

  const double h = options.eps;
  for (auto& x : inputs) {
    const std::vector<double> analytic(x.grad().begin(), x.grad().end());
    auto values = x.mutable_data();
    const auto eval_at = [&](std::size_t i, double value) {
      values[i] = value;
      return f().item();
    };
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      const double fp = eval_at(i, saved + h);
      const double fm = eval_at(i, saved - h);
      const double fp2 = eval_at(i, saved + 0.5 * h);
      const double fm2 = eval_at(i, saved - 0.5 * h);
      values[i] = saved;

      const double forward = (fp - f0) / h;
      const double backward = (f0 - fm) / h;
      const double scale = std::max({1.0, std::abs(forward), std::abs(backward)});
      if (std::abs(forward - backward) > 1e-2 * scale) {
        report.tie_degenerate = true;
        ++report.skipped;
        continue;
      }
      // Richardson extrapolation of two central differences. When the two
      // disagree beyond tolerance a kink lies inside the stencil and the
      // difference quotient is no reference at all.
      const double coarse = (fp - fm) / (2.0 * h);
      const double fine = (fp2 - fm2) / h;
      if (std::abs(fine - coarse) > options.tol * std::max({std::abs(fine), std::abs(coarse), 1e-8})) {
        report.tie_degenerate = true;
        ++report.skipped;
        continue;
      }
      const double numeric = (4.0 * fine - coarse) / 3.0;
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic[i] - numeric) / denom;
      if (rel >= report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_analytic = analytic[i];
        report.worst_numeric = numeric;
      }
      ++report.checked;
    }
  }
  report.passed = report.max_rel_error < options.tol;
  return report;
}

GradCheckReport finite_diff_check(const std::string& name, const std::function<Tensor(const Tensor&)>& f,
                                  const Tensor& x, GradCheckOptions options) {
  return finite_diff_check(name, [&] { return f(x); }, {x}, options);
}

}  // namespace wtal::nn
