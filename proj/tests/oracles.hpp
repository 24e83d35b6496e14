// SPDX-License-Identifier: Apache-2.0
//
// Brute-force reference metrics, written without sharing code with the library.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "arthdr/image.hpp"

namespace oracle {

inline double psnr(const std::vector<double>& a, const std::vector<double>& b, double peak = 1.0) {
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mse += (a[i] - b[i]) * (a[i] - b[i]) / double(a.size());
  return 20.0 * std::log10(peak) - 10.0 * std::log10(mse);
}

inline double psnr(const arthdr::RgbImage& a, const arthdr::RgbImage& b) {
  return psnr(std::vector<double>(a.pixels.begin(), a.pixels.end()),
              std::vector<double>(b.pixels.begin(), b.pixels.end()));
}

// Every 11x11 window fully inside the image, 2-D Gaussian weights, two-pass moments.
inline double ssim_plane(const std::vector<double>& x, const std::vector<double>& y, int w, int h, double L) {
  const int r = 5;
  const double sigma = 1.5;
  double wsum = 0.0;
  double wt[11][11];
  for (int i = -r; i <= r; ++i)
    for (int j = -r; j <= r; ++j) wsum += wt[i + r][j + r] = std::exp(-(i * i + j * j) / (2 * sigma * sigma));
  const double c1 = 0.01 * L * 0.01 * L, c2 = 0.03 * L * 0.03 * L;
  double total = 0.0;
  int count = 0;
  for (int cy = r; cy < h - r; ++cy) {
    for (int cx = r; cx < w - r; ++cx) {
      double mx = 0, my = 0;
      for (int i = -r; i <= r; ++i)
        for (int j = -r; j <= r; ++j) {
          const double k = wt[i + r][j + r] / wsum;
          mx += k * x[(cy + i) * w + cx + j];
          my += k * y[(cy + i) * w + cx + j];
        }
      double vx = 0, vy = 0, cxy = 0;
      for (int i = -r; i <= r; ++i)
        for (int j = -r; j <= r; ++j) {
          const double k = wt[i + r][j + r] / wsum;
          const double dx = x[(cy + i) * w + cx + j] - mx, dy = y[(cy + i) * w + cx + j] - my;
          vx += k * dx * dx;
          vy += k * dy * dy;
          cxy += k * dx * dy;
        }
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return total / count;
}

inline double ssim(const arthdr::RgbImage& a, const arthdr::RgbImage& b) {
  std::vector<double> la, lb;
  double L = 1e-6;
  for (std::size_t p = 0; p < a.width * a.height; ++p) {
    la.push_back((double(a.pixels[3 * p]) + a.pixels[3 * p + 1] + a.pixels[3 * p + 2]) / 3.0);
    lb.push_back((double(b.pixels[3 * p]) + b.pixels[3 * p + 1] + b.pixels[3 * p + 2]) / 3.0);
    for (int c = 0; c < 3; ++c) L = std::max({L, double(a.pixels[3 * p + c]), double(b.pixels[3 * p + c])});
  }
  return ssim_plane(la, lb, int(a.width), int(a.height), L);
}

}  // namespace oracle
