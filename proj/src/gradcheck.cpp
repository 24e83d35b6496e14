// SPDX-License-Identifier: Apache-2.0
#include "arthdr/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace arthdr {

Tensor<double> finite_diff_grad(const std::function<double()>& f, Tensor<double>& point,
                                double eps) {
  if (!(eps > 0.0)) throw ConfigError("finite_diff_grad: eps must be positive");
  Tensor<double> grad(point.shape());
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + eps;
    const double plus = f();
    point[i] = saved - eps;
    const double minus = f();
    point[i] = saved;
    grad[i] = (plus - minus) / (2.0 * eps);
  }
  return grad;
}

Tensor<double> finite_diff_grad(const std::function<double()>& f, Parameter<double>& param,
                                double eps) {
  return finite_diff_grad(f, param.value, eps);
}

namespace {

double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace

double gradient_rel_error(const Tensor<double>& analytic, const Tensor<double>& numeric,
                          double abs_floor) {
  if (analytic.shape() != numeric.shape()) {
    throw ShapeError("gradient_rel_error: " + shape_str(analytic.shape()) + " vs " +
                     shape_str(numeric.shape()));
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double diff = std::abs(analytic[i] - numeric[i]);
    if (diff <= abs_floor) continue;
    const double scale = std::max(std::abs(analytic[i]), std::abs(numeric[i]));
    worst = std::max(worst, diff / scale);
  }
  return worst;
}

GradCheckReport check_parameter_gradients(ParameterSet<double>& params,
                                          const std::function<void()>& loss_and_backward,
                                          const std::function<double()>& loss, double eps,
                                          double abs_floor) {
  loss_and_backward();
  std::vector<Tensor<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(p.grad);

  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter<double>& p = params[k];
    const Tensor<double> numeric = finite_diff_grad(loss, p, eps);
    GradCheckEntry entry{p.name, p.value.size(), gradient_rel_error(analytic[k], numeric, abs_floor), 0,
                         max_abs_diff(analytic[k], numeric)};
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.max_abs_diff = std::max(report.max_abs_diff, entry.max_abs_diff);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

GradCheckReport check_parameter_gradients(ParameterSet<double>& params,
                                          const std::function<void()>& loss_and_backward,
                                          const std::function<LossProbe()>& probe, double eps,
                                          double abs_floor, double min_eps) {
  if (!(eps > 0.0) || !(min_eps > 0.0)) throw ConfigError("gradient check: eps must be positive");
  loss_and_backward();
  std::vector<Tensor<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(p.grad);
  const std::uint64_t base = probe().kink_signature;

  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter<double>& p = params[k];
    Tensor<double> numeric(p.value.shape());
    GradCheckEntry entry{p.name, p.value.size(), 0.0, 0};
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      for (double h = eps;; h /= 10.0) {
        p.value[i] = saved + h;
        const LossProbe plus = probe();
        p.value[i] = saved - h;
        const LossProbe minus = probe();
        p.value[i] = saved;
        numeric[i] = (plus.value - minus.value) / (2.0 * h);
        const bool smooth = plus.kink_signature == base && minus.kink_signature == base;
        if (smooth || h / 10.0 < min_eps) break;
        if (h == eps) ++entry.kink_refinements;
      }
    }
    entry.max_rel_error = gradient_rel_error(analytic[k], numeric, abs_floor);
    entry.max_abs_diff = max_abs_diff(analytic[k], numeric);
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.max_abs_diff = std::max(report.max_abs_diff, entry.max_abs_diff);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace arthdr
