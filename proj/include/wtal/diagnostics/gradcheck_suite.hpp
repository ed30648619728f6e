#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "wtal/nn/gradcheck.hpp"
#include "wtal/nn/ops.hpp"

namespace wtal::diagnostics {

// A differentiable operation with a generator of random small instances.
struct RegisteredOp {
  std::string name;
  std::function<nn::GradCheckReport(nn::Rng&, const nn::GradCheckOptions&)> trial;
};

const std::vector<RegisteredOp>& registered_ops();

struct OpSummary {
  std::string name;
  std::size_t trials = 0;
  std::size_t failed_trials = 0;
  std::size_t checked = 0;  // coordinates compared
  std::size_t skipped = 0;  // coordinates on a kink
  double max_rel_error = 0.0;
  double seconds = 0.0;
  bool passed() const { return failed_trials == 0 && checked > 0; }
};

// Runs `trials` seeded instances of every registered op (or of those whose
// name is in `only`, when non-empty).
std::vector<OpSummary> run_gradcheck_suite(std::size_t trials, std::uint64_t seed, nn::GradCheckOptions options = {},
                                           const std::vector<std::string>& only = {});

std::string format_gradcheck_table(const std::vector<OpSummary>& rows);

}  // namespace wtal::diagnostics
