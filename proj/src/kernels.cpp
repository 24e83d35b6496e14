// SPDX-License-Identifier: Apache-2.0
#include "arthdr/kernels.hpp"

#include <algorithm>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace arthdr::kernels {
namespace {

using Index = std::ptrdiff_t;

// Valid output range [lo, hi) along an axis of `extent` for a tap offset `shift`.
struct Span {
  Index lo;
  Index hi;
};

inline Span valid_range(Index extent, Index shift) {
  return {std::max<Index>(0, -shift), std::min<Index>(extent, extent - shift)};
}

inline Index tap_offset(std::size_t k, const Conv2dGeometry& g, Index pad) {
  return static_cast<Index>(k * g.dilation) - pad;
}

}  // namespace

template <std::floating_point T>
void conv2d_forward(const Conv2dGeometry& g, const T* input, const T* weight, const T* bias,
                    T* output) {
  const Index batch = static_cast<Index>(g.batch);
  const Index cout = static_cast<Index>(g.out_channels);
  const Index cin = static_cast<Index>(g.in_channels);
  const Index H = static_cast<Index>(g.height);
  const Index W = static_cast<Index>(g.width);
  const Index plane = H * W;
  const Index taps = static_cast<Index>(g.taps());

#pragma omp parallel for collapse(2) schedule(static)
  for (Index n = 0; n < batch; ++n) {
    for (Index co = 0; co < cout; ++co) {
      T* out = output + (n * cout + co) * plane;
      std::fill(out, out + plane, bias ? bias[co] : T{0});
      for (Index ci = 0; ci < cin; ++ci) {
        const T* in = input + (n * cin + ci) * plane;
        const T* w = weight + (co * cin + ci) * taps;
        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
          const Index dy = tap_offset(ky, g, g.pad_top());
          const Span ys = valid_range(H, dy);
          for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
            const Index dx = tap_offset(kx, g, g.pad_left());
            const Span xs = valid_range(W, dx);
            const T wv = w[ky * g.kernel_w + kx];
            for (Index y = ys.lo; y < ys.hi; ++y) {
              T* orow = out + y * W;
              const T* irow = in + (y + dy) * W + dx;
              for (Index x = xs.lo; x < xs.hi; ++x) orow[x] += wv * irow[x];
            }
          }
        }
      }
    }
  }
}

template <std::floating_point T>
void conv2d_backward_input(const Conv2dGeometry& g, const T* grad_output, const T* weight,
                           T* grad_input) {
  const Index batch = static_cast<Index>(g.batch);
  const Index cout = static_cast<Index>(g.out_channels);
  const Index cin = static_cast<Index>(g.in_channels);
  const Index H = static_cast<Index>(g.height);
  const Index W = static_cast<Index>(g.width);
  const Index plane = H * W;
  const Index taps = static_cast<Index>(g.taps());

#pragma omp parallel for collapse(2) schedule(static)
  for (Index n = 0; n < batch; ++n) {
    for (Index ci = 0; ci < cin; ++ci) {
      T* gin = grad_input + (n * cin + ci) * plane;
      for (Index co = 0; co < cout; ++co) {
        const T* gout = grad_output + (n * cout + co) * plane;
        const T* w = weight + (co * cin + ci) * taps;
        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
          const Index dy = tap_offset(ky, g, g.pad_top());
          const Span ys = valid_range(H, dy);
          for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
            const Index dx = tap_offset(kx, g, g.pad_left());
            const Span xs = valid_range(W, dx);
            const T wv = w[ky * g.kernel_w + kx];
            for (Index y = ys.lo; y < ys.hi; ++y) {
              T* irow = gin + (y + dy) * W + dx;
              const T* orow = gout + y * W;
              for (Index x = xs.lo; x < xs.hi; ++x) irow[x] += wv * orow[x];
            }
          }
        }
      }
    }
  }
}

template <std::floating_point T>
void conv2d_backward_weight(const Conv2dGeometry& g, const T* grad_output, const T* input,
                            T* grad_weight, T* grad_bias) {
  const Index batch = static_cast<Index>(g.batch);
  const Index cout = static_cast<Index>(g.out_channels);
  const Index cin = static_cast<Index>(g.in_channels);
  const Index H = static_cast<Index>(g.height);
  const Index W = static_cast<Index>(g.width);
  const Index plane = H * W;
  const Index taps = static_cast<Index>(g.taps());

#pragma omp parallel
  {
    // Row accumulator: products are summed lane-wise, then reduced once per tap,
    // which keeps the inner loop vectorisable without reassociating across calls.
    std::vector<T> acc(static_cast<std::size_t>(W));

#pragma omp for schedule(static)
    for (Index co = 0; co < cout; ++co) {
      if (grad_bias) {
        T s{0};
        for (Index n = 0; n < batch; ++n) {
          const T* gout = grad_output + (n * cout + co) * plane;
          std::fill(acc.begin(), acc.end(), T{0});
          for (Index y = 0; y < H; ++y)
            for (Index x = 0; x < W; ++x) acc[x] += gout[y * W + x];
          for (Index x = 0; x < W; ++x) s += acc[x];
        }
        grad_bias[co] += s;
      }
      for (Index ci = 0; ci < cin; ++ci) {
        T* gw = grad_weight + (co * cin + ci) * taps;
        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
          const Index dy = tap_offset(ky, g, g.pad_top());
          const Span ys = valid_range(H, dy);
          for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
            const Index dx = tap_offset(kx, g, g.pad_left());
            const Span xs = valid_range(W, dx);
            std::fill(acc.begin(), acc.end(), T{0});
            for (Index n = 0; n < batch; ++n) {
              const T* gout = grad_output + (n * cout + co) * plane;
              const T* in = input + (n * cin + ci) * plane;
              for (Index y = ys.lo; y < ys.hi; ++y) {
                const T* orow = gout + y * W;
                const T* irow = in + (y + dy) * W + dx;
                for (Index x = xs.lo; x < xs.hi; ++x) acc[x] += orow[x] * irow[x];
              }
            }
            T s{0};
            for (Index x = xs.lo; x < xs.hi; ++x) s += acc[x];
            gw[ky * g.kernel_w + kx] += s;
          }
        }
      }
    }
  }
}

namespace reference {

template <std::floating_point T>
void conv2d_forward(const Conv2dGeometry& g, const T* input, const T* weight, const T* bias,
                    T* output) {
  const Index H = static_cast<Index>(g.height);
  const Index W = static_cast<Index>(g.width);
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t co = 0; co < g.out_channels; ++co)
      for (Index y = 0; y < H; ++y)
        for (Index x = 0; x < W; ++x) {
          T s = bias ? bias[co] : T{0};
          for (std::size_t ci = 0; ci < g.in_channels; ++ci)
            for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
              for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                const Index iy = y + tap_offset(ky, g, g.pad_top());
                const Index ix = x + tap_offset(kx, g, g.pad_left());
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                s += weight[((co * g.in_channels + ci) * g.kernel_h + ky) * g.kernel_w + kx] *
                     input[((n * g.in_channels + ci) * g.height + iy) * g.width + ix];
              }
          output[((n * g.out_channels + co) * g.height + y) * g.width + x] = s;
        }
}

template <std::floating_point T>
void conv2d_backward_input(const Conv2dGeometry& g, const T* grad_output, const T* weight,
                           T* grad_input) {
  const Index H = static_cast<Index>(g.height);
  const Index W = static_cast<Index>(g.width);
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t ci = 0; ci < g.in_channels; ++ci)
      for (Index iy = 0; iy < H; ++iy)
        for (Index ix = 0; ix < W; ++ix) {
          T s{0};
          for (std::size_t co = 0; co < g.out_channels; ++co)
            for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
              for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                const Index y = iy - tap_offset(ky, g, g.pad_top());
                const Index x = ix - tap_offset(kx, g, g.pad_left());
                if (y < 0 || y >= H || x < 0 || x >= W) continue;
                s += weight[((co * g.in_channels + ci) * g.kernel_h + ky) * g.kernel_w + kx] *
                     grad_output[((n * g.out_channels + co) * g.height + y) * g.width + x];
              }
          grad_input[((n * g.in_channels + ci) * g.height + iy) * g.width + ix] += s;
        }
}

template <std::floating_point T>
void conv2d_backward_weight(const Conv2dGeometry& g, const T* grad_output, const T* input,
                            T* grad_weight, T* grad_bias) {
  const Index H = static_cast<Index>(g.height);
  const Index W = static_cast<Index>(g.width);
  for (std::size_t co = 0; co < g.out_channels; ++co) {
    if (grad_bias) {
      T s{0};
      for (std::size_t n = 0; n < g.batch; ++n)
        for (std::size_t i = 0; i < g.plane(); ++i)
          s += grad_output[(n * g.out_channels + co) * g.plane() + i];
      grad_bias[co] += s;
    }
    for (std::size_t ci = 0; ci < g.in_channels; ++ci)
      for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
        for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
          T s{0};
          for (std::size_t n = 0; n < g.batch; ++n)
            for (Index y = 0; y < H; ++y)
              for (Index x = 0; x < W; ++x) {
                const Index iy = y + tap_offset(ky, g, g.pad_top());
                const Index ix = x + tap_offset(kx, g, g.pad_left());
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                s += grad_output[((n * g.out_channels + co) * g.height + y) * g.width + x] *
                     input[((n * g.in_channels + ci) * g.height + iy) * g.width + ix];
              }
          grad_weight[((co * g.in_channels + ci) * g.kernel_h + ky) * g.kernel_w + kx] += s;
        }
  }
}

}  // namespace reference

#define ARTHDR_INSTANTIATE_CONV(NS, T)                                                      \
  template void NS::conv2d_forward<T>(const Conv2dGeometry&, const T*, const T*, const T*, \
                                      T*);                                                  \
  template void NS::conv2d_backward_input<T>(const Conv2dGeometry&, const T*, const T*, T*); \
  template void NS::conv2d_backward_weight<T>(const Conv2dGeometry&, const T*, const T*, T*, \
                                              T*);

ARTHDR_INSTANTIATE_CONV(kernels, float)
ARTHDR_INSTANTIATE_CONV(kernels, double)
ARTHDR_INSTANTIATE_CONV(reference, float)
ARTHDR_INSTANTIATE_CONV(reference, double)

#undef ARTHDR_INSTANTIATE_CONV

}  // namespace arthdr::kernels
