#include "fogbench/iqa.hpp"

#include <array>
#include <cmath>
#include <limits>

namespace fogbench {

namespace {

void require_same_size(const Image& a, const Image& b, const char* metric) {
  if (!a.same_size(b)) {
    throw ContractViolation(std::string(metric) + ": size mismatch " + std::to_string(a.width) + "x" +
                            std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                            std::to_string(b.height));
  }
}

std::array<double, kSsimWindow> gaussian_window() {
  std::array<double, kSsimWindow> g{};
  double total = 0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kSsimWindow / 2;
    g[i] = std::exp(-d * d / (2 * kSsimSigma * kSsimSigma));
    total += g[i];
  }
  for (auto& v : g) v /= total;
  return g;
}

// Valid-mode separable Gaussian filter of a w x h plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int w, int h) {
  static const auto g = gaussian_window();
  const int ow = w - kSsimWindow + 1, oh = h - kSsimWindow + 1;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < ow; ++c) {
      double acc = 0;
      for (int k = 0; k < kSsimWindow; ++k) acc += g[k] * plane[static_cast<std::size_t>(r) * w + c + k];
      tmp[static_cast<std::size_t>(r) * ow + c] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int r = 0; r < oh; ++r)
    for (int c = 0; c < ow; ++c) {
      double acc = 0;
      for (int k = 0; k < kSsimWindow; ++k) acc += g[k] * tmp[static_cast<std::size_t>(r + k) * ow + c];
      out[static_cast<std::size_t>(r) * ow + c] = acc;
    }
  return out;
}

double ssim_plane(const std::vector<double>& x, const std::vector<double>& y, int w, int h) {
  constexpr double c1 = (0.01 * 255) * (0.01 * 255);
  constexpr double c2 = (0.03 * 255) * (0.03 * 255);
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mx = filter_valid(x, w, h), my = filter_valid(y, w, h);
  const auto sxx = filter_valid(xx, w, h), syy = filter_valid(yy, w, h), sxy = filter_valid(xy, w, h);
  double total = 0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i];
    const double vy = syy[i] - my[i] * my[i];
    const double cov = sxy[i] - mx[i] * my[i];
    total += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) / ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.size());
}

}  // namespace

double mse(const Image& a, const Image& b) {
  require_same_size(a, b, "mse");
  double acc = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - b.pixels[i];
    acc += d * d;
  }
  return a.pixels.empty() ? 0.0 : acc / static_cast<double>(a.pixels.size());
}

double psnr_from_mse(double mse_value) {
  if (mse_value <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / mse_value);
}

double psnr(const Image& a, const Image& b) {
  require_same_size(a, b, "psnr");
  return psnr_from_mse(mse(a, b));
}

double ssim(const Image& a, const Image& b, const SsimOptions& options) {
  require_same_size(a, b, "ssim");
  if (a.width < kSsimWindow || a.height < kSsimWindow) {
    throw ContractViolation("ssim: image " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                            " is smaller than the 11x11 window");
  }
  const std::size_t n = static_cast<std::size_t>(a.width) * a.height;
  if (options.per_channel) {
    double total = 0;
    for (int ch = 0; ch < 3; ++ch) {
      std::vector<double> x(n), y(n);
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = a.pixels[i * 3 + ch];
        y[i] = b.pixels[i * 3 + ch];
      }
      total += ssim_plane(x, y, a.width, a.height);
    }
    return total / 3.0;
  }
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = 0.299 * a.pixels[i * 3] + 0.587 * a.pixels[i * 3 + 1] + 0.114 * a.pixels[i * 3 + 2];
    y[i] = 0.299 * b.pixels[i * 3] + 0.587 * b.pixels[i * 3 + 1] + 0.114 * b.pixels[i * 3 + 2];
  }
  return ssim_plane(x, y, a.width, a.height);
}

IqaResult compare_images(const Image& a, const Image& b) {
  IqaResult r;
  r.mse = mse(a, b);
  r.psnr = psnr_from_mse(r.mse);
  r.ssim = ssim(a, b);
  return r;
}

}  // namespace fogbench
