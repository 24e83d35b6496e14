// SPDX-License-Identifier: Apache-2.0
#include "arthdr/tonemap.hpp"

#include <algorithm>
#include <cmath>

#include "arthdr/error.hpp"

namespace arthdr {

void ReinhardParams::validate() const {
  if (!(key > 0.0)) throw ConfigError("reinhard key must be positive");
  if (!(delta > 0.0)) throw ConfigError("reinhard delta must be positive");
  if (white && !(*white > 0.0)) throw ConfigError("reinhard white point must be positive");
}

std::vector<double> luminance(const RgbImage& image) {
  std::vector<double> lum(image.width * image.height);
  for (std::size_t i = 0; i < lum.size(); ++i) {
    const float* px = &image.pixels[3 * i];
    lum[i] = 0.2126 * px[0] + 0.7152 * px[1] + 0.0722 * px[2];
  }
  return lum;
}

double log_average_luminance(const RgbImage& image, double delta) {
  const auto lum = luminance(image);
  if (lum.empty()) return 0.0;
  double s = 0.0;
  for (double l : lum) s += std::log(delta + l);
  return std::exp(s / static_cast<double>(lum.size()));
}

std::vector<double> reinhard_scaled_luminance(const HdrImage& hdr, const ReinhardParams& p) {
  p.validate();
  validate(hdr);
  auto lum = luminance(hdr);
  const double scale = p.key / log_average_luminance(hdr, p.delta);
  for (double& l : lum) l *= scale;
  return lum;
}

LdrImage reinhard(const HdrImage& hdr, const ReinhardParams& p) {
  const auto lw = luminance(hdr);
  const auto lm = reinhard_scaled_luminance(hdr, p);
  LdrImage out(hdr.width, hdr.height);
  for (std::size_t i = 0; i < lm.size(); ++i) {
    if (lw[i] <= 0.0) continue;
    double ld = lm[i] / (1.0 + lm[i]);
    if (p.white) ld = lm[i] * (1.0 + lm[i] / (*p.white * *p.white)) / (1.0 + lm[i]);
    const double ratio = ld / lw[i];
    for (std::size_t c = 0; c < 3; ++c) {
      out.pixels[3 * i + c] = static_cast<float>(std::clamp(hdr.pixels[3 * i + c] * ratio, 0.0, 1.0));
    }
  }
  return out;
}

}  // namespace arthdr
