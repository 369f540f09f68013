#include "fogbench/adam.hpp"

#include <cmath>
#include <string>

namespace fogbench {

AdamState::AdamState(const std::vector<Tensor>& params, AdamOptions options) : options_(options) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& p : params) {
    m_.emplace_back(p.numel(), 0.0f);
    v_.emplace_back(p.numel(), 0.0f);
  }
}

void adam_step(std::vector<Tensor>& params, AdamState& state) {
  if (params.size() != state.m_.size()) {
    throw ContractViolation("adam_step: state tracks " + std::to_string(state.m_.size()) + " parameters, got " +
                            std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) {
      throw ContractViolation("adam_step: parameter " + std::to_string(i) + " " + shape_str(params[i].shape()) +
                              " has no gradient");
    }
    if (params[i].numel() != state.m_[i].size()) {
      throw ContractViolation("adam_step: parameter " + std::to_string(i) + " changed size since state creation");
    }
  }
  const auto& o = state.options_;
  ++state.step_;
  const double t = static_cast<double>(state.step_);
  const double correction1 = 1.0 - std::pow(o.beta1, t);
  const double correction2 = 1.0 - std::pow(o.beta2, t);
  const auto b1 = static_cast<float>(o.beta1);
  const auto b2 = static_cast<float>(o.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto value = params[i].mutable_data();
    const auto grad = params[i].grad();
    auto& m = state.m_[i];
    auto& v = state.v_[i];
    for (std::size_t k = 0; k < value.size(); ++k) {
      const float g = grad[k];
      m[k] = b1 * m[k] + (1.0f - b1) * g;
      v[k] = b2 * v[k] + (1.0f - b2) * g * g;
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      value[k] -= static_cast<float>(o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon));
    }
    params[i].zero_grad();
  }
}

void zero_grads(std::vector<Tensor>& params) {
  for (auto& p : params) p.zero_grad();
}

}  // namespace fogbench
