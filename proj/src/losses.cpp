#include "fogbench/losses.hpp"

#include <cmath>

namespace fogbench {

namespace {

SimilarityCheck similarity_from(double sum_sq, std::size_t n, double epsilon) {
  const double d = n == 0 ? 0.0 : std::sqrt(sum_sq / static_cast<double>(n));
  return {d <= epsilon, d};
}

}  // namespace

void LossWeights::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ContractViolation("alpha must lie strictly between 0 and 1, got " + std::to_string(alpha));
  }
  if (!(theta >= 0.0) || !std::isfinite(theta)) {
    throw ContractViolation("theta must be a finite non-negative angle, got " + std::to_string(theta));
  }
  if (!(lambda_cycle > 0.0) || !std::isfinite(lambda_cycle)) {
    throw ContractViolation("lambda_cycle must be positive, got " + std::to_string(lambda_cycle));
  }
  if (!(lambda_identity >= 0.0) || !std::isfinite(lambda_identity)) {
    throw ContractViolation("lambda_identity must be non-negative, got " + std::to_string(lambda_identity));
  }
}

double regress_loss(double pred_adv, double pred_clean, double theta) { return theta - std::abs(pred_adv - pred_clean); }

SimilarityCheck visual_similarity_check(const Tensor& x, const Tensor& phi_x, double epsilon) {
  detail::require_shapes(x, phi_x, "visual_similarity_check");
  double acc = 0;
  const auto a = x.data(), b = phi_x.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    acc += d * d;
  }
  return similarity_from(acc, a.size(), epsilon);
}

SimilarityCheck visual_similarity_check(const Image& x, const Image& phi_x, double epsilon) {
  if (!x.same_size(phi_x)) throw ContractViolation("visual_similarity_check: image sizes differ");
  double acc = 0;
  for (std::size_t i = 0; i < x.pixels.size(); ++i) {
    const double d = static_cast<double>(x.pixels[i]) - phi_x.pixels[i];
    acc += d * d;
  }
  return similarity_from(acc, x.pixels.size(), epsilon);
}

}  // namespace fogbench
