#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fogbench/grad_check.hpp"

namespace fogbench {

/// Named gradient-check cases: every differentiable op, the loss functions,
/// and the three composed networks on small inputs.
const std::vector<std::string>& grad_check_case_names();

/// Builds random inputs for `name` from `seed` and runs grad_check.
/// Throws ContractViolation for an unknown name.
GradCheckReport run_grad_check_case(const std::string& name, std::uint64_t seed,
                                    const GradCheckOptions& base = {});

struct GradSuiteRow {
  std::string name;
  std::size_t seeds = 0;
  double worst_error = 0.0;
  std::uint64_t worst_seed = 0;
  std::size_t coordinates = 0;
  std::size_t skipped = 0;  // probes straddling a kink, excluded from the error
  bool passed = true;       // every seed under tolerance and skipped <= coordinates
};

/// Runs each case over seeds first_seed .. first_seed + seeds - 1.
std::vector<GradSuiteRow> run_grad_check_suite(std::size_t seeds, std::uint64_t first_seed = 0,
                                               const std::vector<std::string>& only = {});

}  // namespace fogbench
