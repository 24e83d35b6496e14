// SPDX-License-Identifier: Apache-2.0
#include "arthdr/exposure.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace arthdr {

LdrImage synthesize_exposure(const LdrImage& ldr, float ev_shift, float gamma) {
  if (!std::isfinite(ev_shift)) throw ConfigError("exposure shift must be finite");
  if (!(gamma > 0.0f) || !std::isfinite(gamma)) {
    throw ConfigError("CRF gamma must be positive, got " + std::to_string(gamma));
  }
  if (ev_shift == 0.0f) return ldr;

  // ((v^g) 2^s)^(1/g) == v * 2^(s/g); evaluated in double, then clipped.
  const double gain = std::exp2(static_cast<double>(ev_shift) / static_cast<double>(gamma));
  LdrImage out = ldr;
  for (float& v : out.pixels) {
    v = static_cast<float>(std::clamp(static_cast<double>(v) * gain, 0.0, 1.0));
  }
  return out;
}

ExposureStack bracket(const LdrImage& ldr, float gamma) {
  return ExposureStack{synthesize_exposure(ldr, -2.0f, gamma), ldr,
                       synthesize_exposure(ldr, +2.0f, gamma), gamma};
}

}  // namespace arthdr
