// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "arthdr/tensor.hpp"

namespace arthdr {

/// Central differences (f(p + eps e_i) - f(p - eps e_i)) / (2 eps) for every
/// element of `param`. The parameter value is restored before returning.
Tensor<double> finite_diff_grad(const std::function<double()>& f, Parameter<double>& param,
                                double eps);

/// Same, for an arbitrary tensor the function reads (e.g. a network input).
Tensor<double> finite_diff_grad(const std::function<double()>& f, Tensor<double>& point,
                                double eps);

/// Elementwise error between an analytic and a numeric gradient:
/// |a - n| / max(|a|, |n|), with differences below `abs_floor` counted as zero.
double gradient_rel_error(const Tensor<double>& analytic, const Tensor<double>& numeric,
                          double abs_floor = 1e-8);

struct GradCheckEntry {
  std::string name;
  std::size_t elements = 0;
  double max_rel_error = 0.0;
  std::size_t kink_refinements = 0;  // elements re-measured with a smaller step
  double max_abs_diff = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  double max_abs_diff = 0.0;

  bool passed(double tolerance) const { return max_rel_error < tolerance; }
};

/// Checks every parameter of `params` against central differences of `loss`.
///
/// `loss_and_backward` must zero the gradients, evaluate the loss and run the
/// reverse sweep, leaving analytic gradients in params[i].grad. `loss` only
/// evaluates. Both see the current parameter values.
GradCheckReport check_parameter_gradients(ParameterSet<double>& params,
                                          const std::function<void()>& loss_and_backward,
                                          const std::function<double()>& loss, double eps = 1e-5,
                                          double abs_floor = 1e-8);

struct LossProbe {
  double value = 0.0;
  std::uint64_t kink_signature = 0;
};

/// As above, but an element whose +-eps stencil lands on a different
/// relu/abs sign pattern than the unperturbed point straddles a kink; it is
/// re-measured with eps / 10 until the patterns agree (down to min_eps).
GradCheckReport check_parameter_gradients(ParameterSet<double>& params,
                                          const std::function<void()>& loss_and_backward,
                                          const std::function<LossProbe()>& probe, double eps = 1e-5,
                                          double abs_floor = 1e-8, double min_eps = 1e-8);

}  // namespace arthdr
