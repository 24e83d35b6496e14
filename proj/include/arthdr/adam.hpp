// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "arthdr/tensor.hpp"

namespace arthdr {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  friend bool operator==(const AdamHyper&, const AdamHyper&) = default;
};

/// First/second moments aligned with a ParameterSet by position.
template <std::floating_point T>
struct AdamState {
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  std::uint64_t step = 0;

  static AdamState zeros_like(const ParameterSet<T>& params);
};

/// Bias-corrected Adam update using params[i].grad; increments state.step.
/// A non-finite gradient throws NumericalError naming the parameter, before
/// anything is modified.
template <std::floating_point T>
void adam_step(ParameterSet<T>& params, AdamState<T>& state, double lr, const AdamHyper& hyper = {});

/// base_lr * factor^floor(epoch / period).
double lr_schedule(double base_lr, std::size_t epoch, double factor, std::size_t period);

}  // namespace arthdr
