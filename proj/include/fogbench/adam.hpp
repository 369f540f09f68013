#pragma once

#include <cstdint>
#include <vector>

#include "fogbench/tensor.hpp"

namespace fogbench {

struct AdamOptions {
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment buffers for a fixed list of parameters.
class AdamState {
 public:
  AdamState(const std::vector<Tensor>& params, AdamOptions options);

  const AdamOptions& options() const { return options_; }
  std::int64_t step_count() const { return step_; }
  const std::vector<std::vector<float>>& first_moments() const { return m_; }
  const std::vector<std::vector<float>>& second_moments() const { return v_; }

 private:
  friend void adam_step(std::vector<Tensor>& params, AdamState& state);

  AdamOptions options_;
  std::int64_t step_ = 0;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
};

/// One bias-corrected Adam update in place, then clears every gradient.
/// Throws ContractViolation if any parameter lacks a gradient.
void adam_step(std::vector<Tensor>& params, AdamState& state);

void zero_grads(std::vector<Tensor>& params);

}  // namespace fogbench
