// SPDX-License-Identifier: Apache-2.0
#include "arthdr/autodiff.hpp"

#include <cmath>
#include <string>

#include "arthdr/kernels.hpp"

namespace arthdr {

// ---- Var --------------------------------------------------------------------

template <std::floating_point T>
const Tensor<T>& Var<T>::value() const {
  return tape_->value(id_);
}

template <std::floating_point T>
bool Var<T>::requires_grad() const {
  return tape_->requires_grad(id_);
}

template <std::floating_point T>
const Tensor<T>& Var<T>::grad() const {
  return tape_->grad(id_);
}

// ---- Tape -------------------------------------------------------------------

template <std::floating_point T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  NodeInfo info{.op = "constant", .inputs = {}, .shape = value.shape()};
  return record(std::move(value), std::move(info), false, nullptr);
}

template <std::floating_point T>
Var<T> Tape<T>::input(Tensor<T> value) {
  NodeInfo info{.op = "input", .inputs = {}, .shape = value.shape()};
  return record(std::move(value), std::move(info), true, nullptr);
}

template <std::floating_point T>
Var<T> Tape<T>::parameter(Parameter<T>& param) {
  NodeInfo info{.op = "param", .inputs = {}, .shape = param.value.shape()};
  info.param = param.name;
  Var<T> v = record(param.value, std::move(info), true, nullptr);
  nodes_.back().param = &param;
  return v;
}

template <std::floating_point T>
Var<T> Tape<T>::record(Tensor<T> value, NodeInfo info, bool requires_grad, BackwardFn backward) {
  Node& node = nodes_.emplace_back();
  node.value = std::move(value);
  node.info = std::move(info);
  node.requires_grad = requires_grad;
  if (requires_grad) node.backward = std::move(backward);
  return Var<T>(this, nodes_.size() - 1);
}

template <std::floating_point T>
const Tensor<T>& Tape<T>::grad(std::size_t id) {
  return grad_accumulator(id);
}

template <std::floating_point T>
Tensor<T>& Tape<T>::grad_accumulator(std::size_t id) {
  Node& node = nodes_.at(id);
  if (node.grad.shape() != node.value.shape()) node.grad = Tensor<T>(node.value.shape());
  return node.grad;
}

template <std::floating_point T>
void Tape<T>::backward(Var<T> loss) {
  if (&loss.tape() != this) throw ContractError("backward: loss was recorded on another tape");
  if (loss.value().size() != 1) {
    throw ContractError("backward: loss must be a single element, got shape " +
                        shape_str(loss.shape()));
  }
  for (Node& node : nodes_) node.grad = Tensor<T>();
  grad_accumulator(loss.id())[0] = T{1};

  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.requires_grad || node.grad.empty()) continue;
    if (node.backward) node.backward(*this, i);
    if (node.param) {
      auto dst = node.param->grad.data();
      auto src = node.grad.data();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }
}

template <std::floating_point T>
std::uint64_t Tape<T>::kink_signature() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const Node& node : nodes_) {
    if (node.info.op != "relu" && node.info.op != "abs") continue;
    for (T v : nodes_[node.info.inputs[0]].value.data()) {
      h = (h ^ static_cast<std::uint64_t>(v > T{0} ? 1 : v < T{0} ? 2 : 3)) * 0x100000001b3ULL;
    }
  }
  return h;
}

// ---- helpers ------------------------------------------------------------------

namespace {

template <std::floating_point T>
void require_same_shape(const char* op, Var<T> a, Var<T> b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

template <std::floating_point T>
void require_rank4(const char* op, Var<T> x) {
  if (x.value().rank() != 4) {
    throw ShapeError(std::string(op) + ": expected NCHW tensor, got " + shape_str(x.shape()));
  }
}

template <std::floating_point T>
Tape<T>& same_tape(Var<T> a, Var<T> b) {
  if (&a.tape() != &b.tape()) throw ContractError("operands recorded on different tapes");
  return a.tape();
}

// Shared shape for elementwise unary ops whose derivative depends on (x, y).
template <std::floating_point T, class Fwd, class Deriv>
Var<T> unary(const char* op, Var<T> x, Fwd fwd, Deriv deriv) {
  Tape<T>& tape = x.tape();
  const Tensor<T>& xv = x.value();
  Tensor<T> out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  const std::size_t xid = x.id();
  return tape.record(std::move(out), NodeInfo{.op = op, .inputs = {xid}, .shape = xv.shape()},
                     x.requires_grad(), [xid, deriv](Tape<T>& t, std::size_t self) {
                       const Tensor<T>& xin = t.value(xid);
                       const Tensor<T>& y = t.value(self);
                       const Tensor<T>& g = t.grad(self);
                       Tensor<T>& gx = t.grad_accumulator(xid);
                       for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(xin[i], y[i]);
                     });
}

template <std::floating_point T>
void accumulate(Tensor<T>& dst, const Tensor<T>& src, T scale) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
}

}  // namespace

// ---- operations -------------------------------------------------------------

template <std::floating_point T>
Var<T> conv2d(Var<T> input, Var<T> weight, Var<T> bias, std::size_t dilation) {
  if (dilation < 1) throw ConfigError("conv2d: dilation must be >= 1");
  require_rank4("conv2d", input);
  require_rank4("conv2d", weight);
  const Shape& xs = input.shape();
  const Shape& ws = weight.shape();
  if (ws[1] != xs[1]) {
    throw ShapeError("conv2d: input " + shape_str(xs) + " has " + std::to_string(xs[1]) +
                     " channels but weight " + shape_str(ws) + " expects " +
                     std::to_string(ws[1]));
  }
  if (bias.shape() != Shape{ws[0]}) {
    throw ShapeError("conv2d: bias " + shape_str(bias.shape()) + " does not match weight " +
                     shape_str(ws));
  }
  Tape<T>& tape = same_tape(input, weight);
  same_tape(input, bias);

  kernels::Conv2dGeometry g{.batch = xs[0],
                            .in_channels = xs[1],
                            .out_channels = ws[0],
                            .height = xs[2],
                            .width = xs[3],
                            .kernel_h = ws[2],
                            .kernel_w = ws[3],
                            .dilation = dilation};
  Tensor<T> out(Shape{xs[0], ws[0], xs[2], xs[3]});
  kernels::conv2d_forward(g, input.value().ptr(), weight.value().ptr(), bias.value().ptr(),
                          out.ptr());

  const std::size_t xid = input.id(), wid = weight.id(), bid = bias.id();
  const bool rg = input.requires_grad() || weight.requires_grad() || bias.requires_grad();
  NodeInfo info{.op = "conv2d", .inputs = {xid, wid, bid}, .shape = out.shape()};
  info.dilation = dilation;
  info.kernel = ws[2];
  return tape.record(std::move(out), std::move(info), rg, [g, xid, wid, bid](Tape<T>& t, std::size_t self) {
    const Tensor<T>& gout = t.grad(self);
    if (t.requires_grad(xid)) {
      kernels::conv2d_backward_input(g, gout.ptr(), t.value(wid).ptr(),
                                     t.grad_accumulator(xid).ptr());
    }
    const bool need_w = t.requires_grad(wid), need_b = t.requires_grad(bid);
    if (need_w || need_b) {
      // The kernel computes both; discard whichever side is not differentiable.
      Tensor<T> gw_scratch;
      T* gw = need_w ? t.grad_accumulator(wid).ptr()
                     : (gw_scratch = Tensor<T>(t.value(wid).shape())).ptr();
      T* gb = need_b ? t.grad_accumulator(bid).ptr() : nullptr;
      kernels::conv2d_backward_weight(g, gout.ptr(), t.value(xid).ptr(), gw, gb);
    }
  });
}

template <std::floating_point T>
Var<T> relu(Var<T> x) {
  return unary<T>("relu", x, [](T v) { return v < T{0} ? T{0} : v; },
                  [](T v, T) { return v > T{0} ? T{1} : T{0}; });
}

template <std::floating_point T>
Var<T> tanh(Var<T> x) {
  return unary<T>("tanh", x, [](T v) { return std::tanh(v); },
                  [](T, T y) { return T{1} - y * y; });
}

template <std::floating_point T>
Var<T> abs(Var<T> x) {
  return unary<T>("abs", x, [](T v) { return std::abs(v); },
                  [](T v, T) { return v > T{0} ? T{1} : (v < T{0} ? T{-1} : T{0}); });
}

template <std::floating_point T>
Var<T> affine(Var<T> x, T scale, T shift) {
  return unary<T>("affine", x, [scale, shift](T v) { return scale * v + shift; },
                  [scale](T, T) { return scale; });
}

template <std::floating_point T>
Var<T> mu_law(Var<T> x, T mu) {
  if (!(mu > T{0})) throw DomainError("mu_law: mu must be positive");
  for (T v : x.value().data()) {
    if (!(v >= T(-1e-6) && v <= T(1 + 1e-6))) {
      throw DomainError("mu_law: input " + std::to_string(v) + " outside [0, 1]");
    }
  }
  const T denom = std::log1p(mu);
  return unary<T>("mu_law", x, [mu, denom](T v) { return std::log1p(mu * v) / denom; },
                  [mu, denom](T v, T) { return mu / ((T{1} + mu * v) * denom); });
}

template <std::floating_point T>
Var<T> add(Var<T> a, Var<T> b) {
  require_same_shape("add", a, b);
  Tape<T>& tape = same_tape(a, b);
  Tensor<T> out = a.value();
  accumulate(out, b.value(), T{1});
  const std::size_t aid = a.id(), bid = b.id();
  return tape.record(std::move(out), NodeInfo{.op = "add", .inputs = {aid, bid}, .shape = a.shape()},
                     a.requires_grad() || b.requires_grad(), [aid, bid](Tape<T>& t, std::size_t self) {
                       const Tensor<T>& g = t.grad(self);
                       if (t.requires_grad(aid)) accumulate(t.grad_accumulator(aid), g, T{1});
                       if (t.requires_grad(bid)) accumulate(t.grad_accumulator(bid), g, T{1});
                     });
}

template <std::floating_point T>
Var<T> sub(Var<T> a, Var<T> b) {
  require_same_shape("sub", a, b);
  Tape<T>& tape = same_tape(a, b);
  Tensor<T> out = a.value();
  accumulate(out, b.value(), T{-1});
  const std::size_t aid = a.id(), bid = b.id();
  return tape.record(std::move(out), NodeInfo{.op = "sub", .inputs = {aid, bid}, .shape = a.shape()},
                     a.requires_grad() || b.requires_grad(), [aid, bid](Tape<T>& t, std::size_t self) {
                       const Tensor<T>& g = t.grad(self);
                       if (t.requires_grad(aid)) accumulate(t.grad_accumulator(aid), g, T{1});
                       if (t.requires_grad(bid)) accumulate(t.grad_accumulator(bid), g, T{-1});
                     });
}

template <std::floating_point T>
Var<T> mul(Var<T> a, Var<T> b) {
  require_same_shape("mul", a, b);
  Tape<T>& tape = same_tape(a, b);
  Tensor<T> out = a.value();
  const Tensor<T>& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const std::size_t aid = a.id(), bid = b.id();
  return tape.record(std::move(out), NodeInfo{.op = "mul", .inputs = {aid, bid}, .shape = a.shape()},
                     a.requires_grad() || b.requires_grad(), [aid, bid](Tape<T>& t, std::size_t self) {
                       const Tensor<T>& g = t.grad(self);
                       if (t.requires_grad(aid)) {
                         Tensor<T>& ga = t.grad_accumulator(aid);
                         const Tensor<T>& bv = t.value(bid);
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
                       }
                       if (t.requires_grad(bid)) {
                         Tensor<T>& gb = t.grad_accumulator(bid);
                         const Tensor<T>& av = t.value(aid);
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
                       }
                     });
}

template <std::floating_point T>
Var<T> concat_channels(Var<T> a, Var<T> b) {
  require_rank4("concat_channels", a);
  require_rank4("concat_channels", b);
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as[0] != bs[0] || as[2] != bs[2] || as[3] != bs[3]) {
    throw ShapeError("concat_channels: batch/spatial mismatch " + shape_str(as) + " vs " +
                     shape_str(bs));
  }
  Tape<T>& tape = same_tape(a, b);
  const std::size_t plane = as[2] * as[3];
  const std::size_t ca = as[1] * plane, cb = bs[1] * plane;
  Tensor<T> out(Shape{as[0], as[1] + bs[1], as[2], as[3]});
  for (std::size_t n = 0; n < as[0]; ++n) {
    std::copy_n(a.value().ptr() + n * ca, ca, out.ptr() + n * (ca + cb));
    std::copy_n(b.value().ptr() + n * cb, cb, out.ptr() + n * (ca + cb) + ca);
  }
  const std::size_t aid = a.id(), bid = b.id();
  return tape.record(std::move(out), NodeInfo{.op = "concat", .inputs = {aid, bid}, .shape = out.shape()},
                     a.requires_grad() || b.requires_grad(),
                     [aid, bid, ca, cb, batch = as[0]](Tape<T>& t, std::size_t self) {
                       const Tensor<T>& g = t.grad(self);
                       for (std::size_t n = 0; n < batch; ++n) {
                         const T* src = g.ptr() + n * (ca + cb);
                         if (t.requires_grad(aid)) {
                           T* dst = t.grad_accumulator(aid).ptr() + n * ca;
                           for (std::size_t i = 0; i < ca; ++i) dst[i] += src[i];
                         }
                         if (t.requires_grad(bid)) {
                           T* dst = t.grad_accumulator(bid).ptr() + n * cb;
                           for (std::size_t i = 0; i < cb; ++i) dst[i] += src[ca + i];
                         }
                       }
                     });
}

template <std::floating_point T>
Var<T> slice_channels(Var<T> x, std::size_t begin, std::size_t count) {
  require_rank4("slice_channels", x);
  const Shape& xs = x.shape();
  if (begin + count > xs[1]) {
    throw ShapeError("slice_channels: range [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") exceeds " + shape_str(xs));
  }
  const std::size_t plane = xs[2] * xs[3];
  Tensor<T> out(Shape{xs[0], count, xs[2], xs[3]});
  for (std::size_t n = 0; n < xs[0]; ++n) {
    std::copy_n(x.value().ptr() + (n * xs[1] + begin) * plane, count * plane,
                out.ptr() + n * count * plane);
  }
  const std::size_t xid = x.id();
  return x.tape().record(
      std::move(out), NodeInfo{.op = "slice", .inputs = {xid}, .shape = out.shape()}, x.requires_grad(),
      [xid, xs, begin, count, plane](Tape<T>& t, std::size_t self) {
        const Tensor<T>& g = t.grad(self);
        Tensor<T>& gx = t.grad_accumulator(xid);
        for (std::size_t n = 0; n < xs[0]; ++n) {
          const T* src = g.ptr() + n * count * plane;
          T* dst = gx.ptr() + (n * xs[1] + begin) * plane;
          for (std::size_t i = 0; i < count * plane; ++i) dst[i] += src[i];
        }
      });
}

template <std::floating_point T>
Var<T> sum(Var<T> x) {
  double s = 0.0;
  for (T v : x.value().data()) s += v;
  const std::size_t xid = x.id();
  return x.tape().record(Tensor<T>(Shape{1}, static_cast<T>(s)),
                         NodeInfo{.op = "sum", .inputs = {xid}, .shape = {1}}, x.requires_grad(),
                         [xid](Tape<T>& t, std::size_t self) {
                           const T g = t.grad(self)[0];
                           for (T& v : t.grad_accumulator(xid).data()) v += g;
                         });
}

template <std::floating_point T>
Var<T> mean(Var<T> x) {
  const T n = static_cast<T>(x.value().size());
  double s = 0.0;
  for (T v : x.value().data()) s += v;
  const std::size_t xid = x.id();
  return x.tape().record(Tensor<T>(Shape{1}, static_cast<T>(s / static_cast<double>(n))),
                         NodeInfo{.op = "mean", .inputs = {xid}, .shape = {1}}, x.requires_grad(),
                         [xid, n](Tape<T>& t, std::size_t self) {
                           const T g = t.grad(self)[0] / n;
                           for (T& v : t.grad_accumulator(xid).data()) v += g;
                         });
}

template <std::floating_point T>
Var<T> mean_abs_error(Var<T> a, Var<T> b) {
  return mean(abs(sub(a, b)));
}

// ---- instantiation ------------------------------------------------------------

#define ARTHDR_INSTANTIATE_OPS(T)                                           \
  template class Var<T>;                                                    \
  template class Tape<T>;                                                   \
  template Var<T> conv2d<T>(Var<T>, Var<T>, Var<T>, std::size_t);           \
  template Var<T> relu<T>(Var<T>);                                          \
  template Var<T> tanh<T>(Var<T>);                                          \
  template Var<T> abs<T>(Var<T>);                                           \
  template Var<T> add<T>(Var<T>, Var<T>);                                   \
  template Var<T> sub<T>(Var<T>, Var<T>);                                   \
  template Var<T> mul<T>(Var<T>, Var<T>);                                   \
  template Var<T> affine<T>(Var<T>, T, T);                                  \
  template Var<T> mu_law<T>(Var<T>, T);                                     \
  template Var<T> concat_channels<T>(Var<T>, Var<T>);                       \
  template Var<T> slice_channels<T>(Var<T>, std::size_t, std::size_t);      \
  template Var<T> sum<T>(Var<T>);                                           \
  template Var<T> mean<T>(Var<T>);                                          \
  template Var<T> mean_abs_error<T>(Var<T>, Var<T>);

ARTHDR_INSTANTIATE_OPS(float)
ARTHDR_INSTANTIATE_OPS(double)

#undef ARTHDR_INSTANTIATE_OPS

}  // namespace arthdr
