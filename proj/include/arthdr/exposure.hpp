// SPDX-License-Identifier: Apache-2.0
//
// Transformation unit: synthesises the EV-2 / EV+2 siblings of an LDR frame
// that is assumed to sit at EV 0, using a gamma camera-response model.
#pragma once

#include "arthdr/image.hpp"

namespace arthdr {

inline constexpr float kDefaultCrfGamma = 2.2f;

struct ExposureStack {
  LdrImage ev_minus2;
  LdrImage ev_0;
  LdrImage ev_plus2;
  float gamma = kDefaultCrfGamma;
};

/// Per component: clip(((v^gamma) * 2^ev_shift)^(1/gamma), 0, 1).
LdrImage synthesize_exposure(const LdrImage& ldr, float ev_shift, float gamma = kDefaultCrfGamma);

/// {EV-2, EV0, EV+2}; the middle slot is the input, untouched.
ExposureStack bracket(const LdrImage& ldr, float gamma = kDefaultCrfGamma);

}  // namespace arthdr
