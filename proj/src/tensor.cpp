// SPDX-License-Identifier: Apache-2.0
#include "arthdr/tensor.hpp"

#include <numeric>

namespace arthdr {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <std::floating_point T>
Parameter<T>& ParameterSet<T>::add(std::string name, Tensor<T> value) {
  if (index_.contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  index_.emplace(name, params_.size());
  Parameter<T>& p = params_.emplace_back();
  p.name = std::move(name);
  p.value = std::move(value);
  p.zero_grad();
  return p;
}

template <std::floating_point T>
Parameter<T>& ParameterSet<T>::get(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ConfigError("unknown parameter '" + std::string(name) + "'");
  return params_[it->second];
}

template <std::floating_point T>
const Parameter<T>& ParameterSet<T>::get(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ConfigError("unknown parameter '" + std::string(name) + "'");
  return params_[it->second];
}

template <std::floating_point T>
std::size_t ParameterSet<T>::numel() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <std::floating_point T>
void ParameterSet<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template class Tensor<float>;
template class Tensor<double>;
template class ParameterSet<float>;
template class ParameterSet<double>;

}  // namespace arthdr
