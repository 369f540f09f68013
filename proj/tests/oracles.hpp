#pragma once

// Brute-force reference implementations shared by unit and acceptance tests.

#include <cmath>

#include "fogbench/image.hpp"

namespace fogbench::oracle {

// Reference SSIM: explicit 2-D window, two-pass moments per window position.
inline double naive_ssim(const Image& a, const Image& b) {
  const int n = 11;
  const double sigma = 1.5;
  double w2[11][11];
  double wsum = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double di = i - 5, dj = j - 5;
      w2[i][j] = std::exp(-(di * di + dj * dj) / (2 * sigma * sigma));
      wsum += w2[i][j];
    }
  auto luma = [](const Image& im, int r, int c) {
    return 0.299 * im.at(r, c, 0) + 0.587 * im.at(r, c, 1) + 0.114 * im.at(r, c, 2);
  };
  const double c1 = std::pow(0.01 * 255, 2), c2 = std::pow(0.03 * 255, 2);
  double total = 0;
  int count = 0;
  for (int r0 = 0; r0 + n <= a.height; ++r0)
    for (int c0 = 0; c0 + n <= a.width; ++c0) {
      double mx = 0, my = 0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          mx += w2[i][j] / wsum * luma(a, r0 + i, c0 + j);
          my += w2[i][j] / wsum * luma(b, r0 + i, c0 + j);
        }
      double vx = 0, vy = 0, cov = 0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const double dx = luma(a, r0 + i, c0 + j) - mx, dy = luma(b, r0 + i, c0 + j) - my;
          const double w = w2[i][j] / wsum;
          vx += w * dx * dx;
          vy += w * dy * dy;
          cov += w * dx * dy;
        }
      total += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  return total / count;
}

inline double naive_mse(const Image& a, const Image& b) {
  double acc = 0;
  for (int r = 0; r < a.height; ++r)
    for (int c = 0; c < a.width; ++c)
      for (int ch = 0; ch < 3; ++ch) acc += std::pow(double(a.at(r, c, ch)) - b.at(r, c, ch), 2);
  return acc / (3.0 * a.width * a.height);
}

}  // namespace fogbench::oracle
