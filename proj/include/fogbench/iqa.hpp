#pragma once

#include "fogbench/image.hpp"

namespace fogbench {

/// Mean squared error over every pixel and channel, in 8-bit units.
double mse(const Image& a, const Image& b);

/// 10*log10(255^2 / mse); +infinity when the images are identical.
double psnr(const Image& a, const Image& b);
double psnr_from_mse(double mse_value);

struct SsimOptions {
  /// Average SSIM over R, G, B instead of computing it on luma.
  bool per_channel = false;
};

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

/// Mean structural similarity over all valid 11x11 Gaussian-weighted windows
/// (sigma 1.5, C1 = (0.01*255)^2, C2 = (0.03*255)^2). Luma is
/// 0.299 R + 0.587 G + 0.114 B. Both sides must be at least 11 pixels.
double ssim(const Image& a, const Image& b, const SsimOptions& options = {});

struct IqaResult {
  double mse = 0.0;
  double psnr = 0.0;
  double ssim = 1.0;
};

IqaResult compare_images(const Image& a, const Image& b);

}  // namespace fogbench
