// SPDX-License-Identifier: Apache-2.0
//
// Tape-based reverse-mode differentiation over whole-tensor operations.
//
// A Tape records nodes in creation order. Every node stores its forward
// value and, when it depends on something differentiable, a closure that
// pushes its output gradient to its inputs. backward() walks the tape in
// reverse, which is a valid topological order because inputs are always
// recorded before their consumers.
#pragma once

#include <concepts>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "arthdr/tensor.hpp"

namespace arthdr {

template <std::floating_point T>
class Tape;

/// Handle to a node on a Tape.
template <std::floating_point T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  bool valid() const noexcept { return tape_ != nullptr; }
  Tape<T>& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  // Gradient accumulated by the last backward(); zeros if unreached.
  const Tensor<T>& grad() const;

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Introspection record for one recorded operation.
struct NodeInfo {
  std::string op;            // "conv2d", "relu", "param", "input", ...
  std::vector<std::size_t> inputs;
  Shape shape;
  std::size_t dilation = 0;  // conv2d only
  std::size_t kernel = 0;    // conv2d only (square kernels)
  std::string param;         // "param" leaves only
};

template <std::floating_point T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Non-differentiable value.
  Var<T> constant(Tensor<T> value);
  /// Differentiable leaf whose gradient is read back through Var::grad().
  Var<T> input(Tensor<T> value);
  /// Leaf bound to a parameter; backward() accumulates into param.grad.
  Var<T> parameter(Parameter<T>& param);

  Var<T> record(Tensor<T> value, NodeInfo info, bool requires_grad, BackwardFn backward);

  /// Reverse sweep from a single-element loss.
  void backward(Var<T> loss);

  const Tensor<T>& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  const Tensor<T>& grad(std::size_t id);
  /// Gradient buffer for accumulation inside backward closures.
  Tensor<T>& grad_accumulator(std::size_t id);

  std::size_t size() const noexcept { return nodes_.size(); }
  const NodeInfo& info(std::size_t id) const { return nodes_.at(id).info; }

  /// Hash of the sign pattern at every relu / abs input. Two evaluations
  /// with equal patterns lie on the same smooth piece of the loss.
  std::uint64_t kink_signature() const;

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // empty until first accumulation
    NodeInfo info;
    bool requires_grad = false;
    Parameter<T>* param = nullptr;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
};

// ---- operations -------------------------------------------------------------

/// Stride-1 convolution with "same" zero padding. weight: out x in x k x k, bias: out.
template <std::floating_point T>
Var<T> conv2d(Var<T> input, Var<T> weight, Var<T> bias, std::size_t dilation);

template <std::floating_point T>
Var<T> relu(Var<T> x);

template <std::floating_point T>
Var<T> tanh(Var<T> x);

template <std::floating_point T>
Var<T> abs(Var<T> x);

template <std::floating_point T>
Var<T> add(Var<T> a, Var<T> b);

template <std::floating_point T>
Var<T> sub(Var<T> a, Var<T> b);

template <std::floating_point T>
Var<T> mul(Var<T> a, Var<T> b);

/// scale * x + shift.
template <std::floating_point T>
Var<T> affine(Var<T> x, T scale, T shift = T{0});

/// log(1 + mu * x) / log(1 + mu), elementwise.
template <std::floating_point T>
Var<T> mu_law(Var<T> x, T mu);

template <std::floating_point T>
Var<T> concat_channels(Var<T> a, Var<T> b);

/// Channels [begin, begin + count) of an NCHW tensor.
template <std::floating_point T>
Var<T> slice_channels(Var<T> x, std::size_t begin, std::size_t count);

/// Sum of all elements, shape {1}.
template <std::floating_point T>
Var<T> sum(Var<T> x);

/// Mean of all elements, shape {1}.
template <std::floating_point T>
Var<T> mean(Var<T> x);

/// mean(|a - b|), shape {1}.
template <std::floating_point T>
Var<T> mean_abs_error(Var<T> a, Var<T> b);

}  // namespace arthdr
