#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "fogbench/tensor.hpp"

namespace fogbench {

struct GradCheckOptions {
  double step = 1e-3;
  double tolerance = 1e-3;
  /// 0 checks every coordinate; otherwise a seeded random subset per input.
  std::size_t max_coordinates = 0;
  std::uint64_t seed = 0;
  double relative_floor = 1e-3;
  /// Skip probes whose +step and -step evaluations land on a different
  /// linear piece of a relu/leaky-relu/abs than the centre point.
  bool skip_kink_crossings = true;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t coordinates_checked = 0;
  std::size_t coordinates_skipped = 0;  // probes straddling a kink
  double tolerance = 0.0;
  bool passed() const { return max_rel_error < tolerance; }
};

/// Compares the float autodiff gradient of a scalar fragment against central
/// finite differences evaluated in double precision.
///
/// `fragment` is a generic callable taking `const std::vector<BasicTensor<T>>&`
/// and returning a single-element tensor; it is instantiated for both float
/// (autodiff side) and double (difference side). The error for each input is
/// max|autodiff - numeric| / max(max|autodiff|, max|numeric|, floor), where
/// floor = relative_floor * (largest autodiff gradient over all inputs). The
/// floor keeps inputs whose exact gradient is zero (a bias feeding a
/// normalization) from being scored as rounding noise over rounding noise.
template <typename Fragment>
GradCheckReport grad_check(Fragment&& fragment, const std::vector<Tensor>& inputs,
                           const GradCheckOptions& options = {}) {
  GradCheckReport report;
  report.tolerance = options.tolerance;

  std::vector<Tensor> tracked;
  tracked.reserve(inputs.size());
  for (const auto& in : inputs) tracked.push_back(in.detach().set_requires_grad(true));
  Tape<float>::current().clear();
  const Tensor loss = fragment(tracked);
  if (loss.numel() != 1) throw ContractViolation("grad_check: fragment output must be scalar");
  backward(loss);

  std::vector<Tensor64> point;
  point.reserve(inputs.size());
  for (const auto& in : inputs) point.push_back(in.cast<double>());

  double global_scale = 0.0;
  for (const auto& t : tracked) {
    if (!t.has_grad()) continue;
    for (float g : t.grad()) global_scale = std::max(global_scale, std::abs(static_cast<double>(g)));
  }
  const double floor = options.relative_floor * global_scale;

  // Evaluates the double fragment, returning the value and its kink signature.
  auto evaluate = [&](std::uint64_t& signature) {
    KinkTrace trace;
    const double v = fragment(point).item();
    signature = trace.signature();
    return v;
  };
  std::uint64_t centre = 0;
  evaluate(centre);

  std::mt19937_64 rng(options.seed);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const std::size_t n = inputs[k].numel();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    const bool sampled = options.max_coordinates != 0 && options.max_coordinates < n;
    if (sampled) std::shuffle(coords.begin(), coords.end(), rng);
    const std::size_t wanted = sampled ? options.max_coordinates : n;

    double max_diff = 0.0, max_mag = 0.0;
    if (tracked[k].has_grad()) {
      for (float g : tracked[k].grad()) max_mag = std::max(max_mag, std::abs(static_cast<double>(g)));
    }
    std::size_t checked_here = 0;
    for (std::size_t c : coords) {
      if (checked_here == wanted) break;
      auto values = point[k].mutable_data();
      const double saved = values[c];
      std::uint64_t sig_plus = 0, sig_minus = 0;
      values[c] = saved + options.step;
      const double plus = evaluate(sig_plus);
      values[c] = saved - options.step;
      const double minus = evaluate(sig_minus);
      values[c] = saved;
      if (options.skip_kink_crossings && (sig_plus != centre || sig_minus != centre)) {
        ++report.coordinates_skipped;
        continue;
      }
      ++checked_here;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double analytic = tracked[k].has_grad() ? tracked[k].grad()[c] : 0.0;
      max_diff = std::max(max_diff, std::abs(analytic - numeric));
      max_mag = std::max(max_mag, std::abs(numeric));
      ++report.coordinates_checked;
    }
    const double denom = std::max(max_mag, floor);
    const double err = denom > 0.0 ? max_diff / denom : 0.0;
    if (err >= report.max_rel_error) {
      report.max_rel_error = err;
      report.worst_input = k;
    }
  }
  return report;
}

}  // namespace fogbench
