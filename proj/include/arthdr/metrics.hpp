// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "arthdr/image.hpp"

namespace arthdr {

/// 10 log10(peak^2 / MSE); +infinity when the inputs are identical.
/// Values must lie in [0, peak].
double psnr(std::span<const double> a, std::span<const double> b, double peak = 1.0);
double psnr(const RgbImage& a, const RgbImage& b, double peak = 1.0);

inline constexpr std::size_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

/// 11x11 Gaussian weights (sigma 1.5), normalised to sum 1, row-major.
std::vector<double> ssim_window();

/// Mean SSIM over all fully-contained windows of two single-channel planes.
double ssim_plane(std::span<const double> a, std::span<const double> b, std::size_t width,
                  std::size_t height, double dynamic_range);

/// Luminance (mean of RGB) SSIM; L is the largest component over the pair,
/// floored at 1e-6.
double ssim(const RgbImage& a, const RgbImage& b);

struct MetricsRow {
  std::string path;
  double psnr_db = 0.0;
  double ssim = 0.0;
};

struct MetricsReport {
  std::vector<MetricsRow> rows;
  std::vector<std::string> skipped;  // "path: reason"

  double mean_psnr() const;
  double mean_ssim() const;
};

/// "path,psnr_db,ssim" header, one row per image, final "mean" row.
void write_report_csv(std::ostream& os, const MetricsReport& report);

}  // namespace arthdr
