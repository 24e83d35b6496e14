// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <vector>

#include "arthdr/image.hpp"

namespace arthdr {

struct ReinhardParams {
  double key = 0.18;    // a
  double delta = 1e-6;
  std::optional<double> white;  // absent: simple L/(1+L) curve

  void validate() const;
};

/// Rec.709 luminance of each pixel.
std::vector<double> luminance(const RgbImage& image);

/// exp(mean log(delta + L_w)).
double log_average_luminance(const RgbImage& image, double delta);

/// L_m = (a / L_avg) L_w per pixel.
std::vector<double> reinhard_scaled_luminance(const HdrImage& hdr, const ReinhardParams& p = {});

/// Global photographic operator; chroma follows the luminance ratio and the
/// result is clipped to [0, 1].
LdrImage reinhard(const HdrImage& hdr, const ReinhardParams& p = {});

}  // namespace arthdr
