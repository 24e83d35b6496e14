// SPDX-License-Identifier: Apache-2.0
//
// Stride-1 "same"-padded 2-D convolution kernels over NCHW buffers.
//
// Two implementations share one contract:
//   kernels::conv2d_*            OpenMP-parallel, row-vectorised production path
//   kernels::reference::conv2d_* naive serial loops kept as the test oracle
//
// Forward writes its output; both backward kernels accumulate (+=) into the
// gradient buffers so the autodiff tape can sum contributions in place.
#pragma once

#include <concepts>
#include <cstddef>

namespace arthdr::kernels {

struct Conv2dGeometry {
  std::size_t batch = 1;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t kernel_h = 3;
  std::size_t kernel_w = 3;
  std::size_t dilation = 1;

  // Zero padding keeping H x W; for even kernels the extra row/column goes after.
  std::ptrdiff_t pad_top() const noexcept {
    return static_cast<std::ptrdiff_t>(dilation * (kernel_h - 1) / 2);
  }
  std::ptrdiff_t pad_left() const noexcept {
    return static_cast<std::ptrdiff_t>(dilation * (kernel_w - 1) / 2);
  }
  std::size_t plane() const noexcept { return height * width; }
  std::size_t taps() const noexcept { return kernel_h * kernel_w; }
};

template <std::floating_point T>
void conv2d_forward(const Conv2dGeometry& g, const T* input, const T* weight, const T* bias,
                    T* output);

template <std::floating_point T>
void conv2d_backward_input(const Conv2dGeometry& g, const T* grad_output, const T* weight,
                           T* grad_input);

// grad_bias may be null.
template <std::floating_point T>
void conv2d_backward_weight(const Conv2dGeometry& g, const T* grad_output, const T* input,
                            T* grad_weight, T* grad_bias);

namespace reference {

template <std::floating_point T>
void conv2d_forward(const Conv2dGeometry& g, const T* input, const T* weight, const T* bias,
                    T* output);

template <std::floating_point T>
void conv2d_backward_input(const Conv2dGeometry& g, const T* grad_output, const T* weight,
                           T* grad_input);

template <std::floating_point T>
void conv2d_backward_weight(const Conv2dGeometry& g, const T* grad_output, const T* input,
                            T* grad_weight, T* grad_bias);

}  // namespace reference
}  // namespace arthdr::kernels
