// SPDX-License-Identifier: Apache-2.0
#include "arthdr/adam.hpp"

#include <cmath>
#include <string>

namespace arthdr {

template <std::floating_point T>
AdamState<T> AdamState<T>::zeros_like(const ParameterSet<T>& params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.emplace_back(p.value.shape());
    s.v.emplace_back(p.value.shape());
  }
  return s;
}

template <std::floating_point T>
void adam_step(ParameterSet<T>& params, AdamState<T>& state, double lr, const AdamHyper& hyper) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adam_step: optimizer state holds " + std::to_string(state.m.size()) +
                     " moments for " + std::to_string(params.size()) + " parameters");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Parameter<T>& p = params[k];
    if (p.grad.shape() != p.value.shape() || state.m[k].shape() != p.value.shape() ||
        state.v[k].shape() != p.value.shape()) {
      throw ShapeError("adam_step: misaligned shapes for '" + p.name + "'");
    }
    for (T g : p.grad.data()) {
      if (!std::isfinite(g)) throw NumericalError("non-finite gradient in parameter '" + p.name + "'");
    }
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(hyper.beta1, t);
  const double c2 = 1.0 - std::pow(hyper.beta2, t);
  const T b1 = static_cast<T>(hyper.beta1), b2 = static_cast<T>(hyper.beta2);
  const T step_size = static_cast<T>(lr / c1);
  const T sqrt_c2 = static_cast<T>(std::sqrt(c2));
  const T eps = static_cast<T>(hyper.epsilon);

  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter<T>& p = params[k];
    T* w = p.value.ptr();
    const T* g = p.grad.ptr();
    T* m = state.m[k].ptr();
    T* v = state.v[k].ptr();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      m[i] = b1 * m[i] + (T{1} - b1) * g[i];
      v[i] = b2 * v[i] + (T{1} - b2) * g[i] * g[i];
      // lr * m_hat / (sqrt(v_hat) + eps)
      w[i] -= step_size * m[i] / (std::sqrt(v[i]) / sqrt_c2 + eps);
    }
  }
}

double lr_schedule(double base_lr, std::size_t epoch, double factor, std::size_t period) {
  if (period == 0) return base_lr;
  return base_lr * std::pow(factor, static_cast<double>(epoch / period));
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step<float>(ParameterSet<float>&, AdamState<float>&, double, const AdamHyper&);
template void adam_step<double>(ParameterSet<double>&, AdamState<double>&, double, const AdamHyper&);

}  // namespace arthdr
