#pragma once

#include <optional>
#include <string>

#include "fogbench/image.hpp"
#include "fogbench/ops.hpp"

namespace fogbench {

struct LossWeights {
  double alpha = 0.2;
  double theta = 0.5;  // radians
  double lambda_cycle = 10.0;
  double lambda_identity = 3.0;

  /// Throws ContractViolation unless 0 < alpha < 1, theta >= 0,
  /// lambda_cycle > 0 and lambda_identity >= 0 (all finite).
  void validate() const;
};

namespace detail {
template <typename T>
void require_shapes(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ContractViolation(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                            shape_str(b.shape()));
  }
}
}  // namespace detail

/// theta - |pred_adv - pred_clean| for one pair of predictions. May be negative.
double regress_loss(double pred_adv, double pred_clean, double theta);

/// Batch form: mean over samples of theta - |pred_adv - pred_clean|.
/// With `clamp`, each sample term is max(0, .) before averaging.
template <typename T>
BasicTensor<T> regress_loss(const BasicTensor<T>& pred_adv, const BasicTensor<T>& pred_clean, double theta,
                            bool clamp = false) {
  detail::require_shapes(pred_adv, pred_clean, "regress_loss");
  if (!clamp) return add_scalar(scale(mean_abs_error(pred_adv, pred_clean), -1.0), theta);
  return mean(relu(add_scalar(scale(abs(sub(pred_adv, pred_clean)), -1.0), theta)));
}

/// Same formula with the roles of the translated and original domain-B images.
template <typename T>
BasicTensor<T> backward_regress_loss(const BasicTensor<T>& pred_of_phi_ba_y, const BasicTensor<T>& pred_of_y,
                                     double theta, bool clamp = false) {
  return regress_loss(pred_of_phi_ba_y, pred_of_y, theta, clamp);
}

/// lambda_cycle * (MAE(rec_x, x) + MAE(rec_y, y)).
template <typename T>
BasicTensor<T> cycle_loss(const BasicTensor<T>& x, const BasicTensor<T>& rec_x, const BasicTensor<T>& y,
                          const BasicTensor<T>& rec_y, double lambda_cycle) {
  detail::require_shapes(x, rec_x, "cycle_loss");
  detail::require_shapes(y, rec_y, "cycle_loss");
  return scale(add(mean_abs_error(rec_x, x), mean_abs_error(rec_y, y)), lambda_cycle);
}

/// lambda_identity * (MAE(phi_AB(y), y) + MAE(phi_BA(x), x)).
template <typename T>
BasicTensor<T> identity_loss(const BasicTensor<T>& y, const BasicTensor<T>& ab_of_y, const BasicTensor<T>& x,
                             const BasicTensor<T>& ba_of_x, double lambda_identity) {
  detail::require_shapes(y, ab_of_y, "identity_loss");
  detail::require_shapes(x, ba_of_x, "identity_loss");
  return scale(add(mean_abs_error(ab_of_y, y), mean_abs_error(ba_of_x, x)), lambda_identity);
}

// Least-squares GAN terms over patch maps.

template <typename T>
BasicTensor<T> gan_generator_loss(const BasicTensor<T>& d_fake) {
  return mean(square(add_scalar(d_fake, -1.0)));
}

template <typename T>
BasicTensor<T> gan_discriminator_loss(const BasicTensor<T>& d_real, const BasicTensor<T>& d_fake) {
  return add(mean(square(add_scalar(d_real, -1.0))), mean(square(d_fake)));
}

template <typename T>
struct GanTerms {
  BasicTensor<T> gen;
  BasicTensor<T> disc;
};

template <typename T>
GanTerms<T> gan_losses(const BasicTensor<T>& d_real, const BasicTensor<T>& d_fake) {
  return {gan_generator_loss(d_fake), gan_discriminator_loss(d_real, d_fake)};
}

template <typename T>
struct GeneratorLossParts {
  BasicTensor<T> regress;
  BasicTensor<T> cycle;
  BasicTensor<T> identity;
  BasicTensor<T> gan;
  std::optional<BasicTensor<T>> bregress;
};

template <typename T>
struct GeneratorLossBreakdown {
  BasicTensor<T> regress;
  BasicTensor<T> cycle;
  BasicTensor<T> identity;
  BasicTensor<T> gan;
  std::optional<BasicTensor<T>> bregress;
  BasicTensor<T> total;
};

/// total = (1 - alpha) * (cycle + identity + gan) + alpha * regress
///         [+ alpha * bregress when present].
template <typename T>
GeneratorLossBreakdown<T> total_generator_loss(const GeneratorLossParts<T>& parts, const LossWeights& weights) {
  weights.validate();
  auto cyclegan = add(add(parts.cycle, parts.identity), parts.gan);
  auto total = add(scale(cyclegan, 1.0 - weights.alpha), scale(parts.regress, weights.alpha));
  if (parts.bregress) total = add(total, scale(*parts.bregress, weights.alpha));
  return {parts.regress, parts.cycle, parts.identity, parts.gan, parts.bregress, total};
}

struct SimilarityCheck {
  bool within = false;
  double distance = 0.0;  // root mean squared difference
};

/// ||phi_x - x|| <= epsilon with the distance taken as RMS over all elements.
SimilarityCheck visual_similarity_check(const Tensor& x, const Tensor& phi_x, double epsilon);
SimilarityCheck visual_similarity_check(const Image& x, const Image& phi_x, double epsilon);

}  // namespace fogbench
