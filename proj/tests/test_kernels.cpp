// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "arthdr/kernels.hpp"
#include "helpers.hpp"

using namespace arthdr;
namespace k = arthdr::kernels;

namespace {

template <class T>
double max_diff(const Tensor<T>& a, const Tensor<T>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
  return m;
}

// Direct summation oracle with explicit bounds checks.
double naive_output(const k::Conv2dGeometry& g, const Tensor<double>& x, const Tensor<double>& w,
                    const Tensor<double>& b, std::size_t n, std::size_t o, std::size_t y, std::size_t xx) {
  double acc = b[o];
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
        const auto iy = static_cast<std::ptrdiff_t>(y + ky * g.dilation) - g.pad_top();
        const auto ix = static_cast<std::ptrdiff_t>(xx + kx * g.dilation) - g.pad_left();
        if (iy < 0 || ix < 0 || iy >= std::ptrdiff_t(g.height) || ix >= std::ptrdiff_t(g.width)) continue;
        acc += w.at(o, c, ky, kx) * x.at(n, c, std::size_t(iy), std::size_t(ix));
      }
    }
  }
  return acc;
}

}  // namespace

TEST_CASE_TEMPLATE("parallel conv kernels match the serial reference", T, float, double) {
  std::mt19937_64 rng(21);
  const double tol = std::is_same_v<T, float> ? 1e-4 : 1e-11;
  for (std::size_t kernel : {1u, 3u}) {
    for (std::size_t dil : {1u, 2u, 3u, 5u}) {
      const k::Conv2dGeometry g{.batch = 2, .in_channels = 5, .out_channels = 7, .height = 9,
                                .width = 13, .kernel_h = kernel, .kernel_w = kernel, .dilation = dil};
      CAPTURE(kernel);
      CAPTURE(dil);
      const auto x = testutil::random_tensor<T>({2, 5, 9, 13}, rng);
      const auto w = testutil::random_tensor<T>({7, 5, kernel, kernel}, rng);
      const auto b = testutil::random_tensor<T>({7}, rng);
      const auto go = testutil::random_tensor<T>({2, 7, 9, 13}, rng);

      Tensor<T> y1({2, 7, 9, 13}), y2({2, 7, 9, 13});
      k::conv2d_forward(g, x.ptr(), w.ptr(), b.ptr(), y1.ptr());
      k::reference::conv2d_forward(g, x.ptr(), w.ptr(), b.ptr(), y2.ptr());
      CHECK(max_diff(y1, y2) < tol);

      // Backward kernels accumulate, so start both from the same nonzero buffer.
      auto gx1 = testutil::random_tensor<T>(x.shape(), rng), gx2 = gx1;
      k::conv2d_backward_input(g, go.ptr(), w.ptr(), gx1.ptr());
      k::reference::conv2d_backward_input(g, go.ptr(), w.ptr(), gx2.ptr());
      CHECK(max_diff(gx1, gx2) < tol * 10);

      auto gw1 = testutil::random_tensor<T>(w.shape(), rng), gw2 = gw1;
      auto gb1 = testutil::random_tensor<T>(b.shape(), rng), gb2 = gb1;
      k::conv2d_backward_weight(g, go.ptr(), x.ptr(), gw1.ptr(), gb1.ptr());
      k::reference::conv2d_backward_weight(g, go.ptr(), x.ptr(), gw2.ptr(), gb2.ptr());
      CHECK(max_diff(gw1, gw2) < tol * 100);
      CHECK(max_diff(gb1, gb2) < tol * 100);
    }
  }
}

TEST_CASE("reference forward matches direct summation") {
  std::mt19937_64 rng(22);
  const k::Conv2dGeometry g{.batch = 1, .in_channels = 2, .out_channels = 3, .height = 6,
                            .width = 5, .kernel_h = 3, .kernel_w = 3, .dilation = 2};
  const auto x = testutil::random_tensor<double>({1, 2, 6, 5}, rng);
  const auto w = testutil::random_tensor<double>({3, 2, 3, 3}, rng);
  const auto b = testutil::random_tensor<double>({3}, rng);
  Tensor<double> y({1, 3, 6, 5});
  k::reference::conv2d_forward(g, x.ptr(), w.ptr(), b.ptr(), y.ptr());
  for (std::size_t o = 0; o < 3; ++o)
    for (std::size_t yy = 0; yy < 6; ++yy)
      for (std::size_t xx = 0; xx < 5; ++xx) CHECK(y.at(0, o, yy, xx) == doctest::Approx(naive_output(g, x, w, b, 0, o, yy, xx)));
}

TEST_CASE("backward input is the adjoint of forward") {
  // <conv(x), g> == <x, conv^T(g)> with zero bias.
  std::mt19937_64 rng(23);
  const k::Conv2dGeometry g{.batch = 1, .in_channels = 4, .out_channels = 3, .height = 8,
                            .width = 8, .kernel_h = 3, .kernel_w = 3, .dilation = 3};
  const auto x = testutil::random_tensor<double>({1, 4, 8, 8}, rng);
  const auto w = testutil::random_tensor<double>({3, 4, 3, 3}, rng);
  const Tensor<double> zero({3});
  const auto go = testutil::random_tensor<double>({1, 3, 8, 8}, rng);
  Tensor<double> y({1, 3, 8, 8}), gx({1, 4, 8, 8});
  k::conv2d_forward(g, x.ptr(), w.ptr(), zero.ptr(), y.ptr());
  k::conv2d_backward_input(g, go.ptr(), w.ptr(), gx.ptr());
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) lhs += y[i] * go[i];
  for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * gx[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("dilation beyond the image only sees the centre tap") {
  std::mt19937_64 rng(24);
  const k::Conv2dGeometry g{.batch = 1, .in_channels = 1, .out_channels = 1, .height = 3,
                            .width = 3, .kernel_h = 3, .kernel_w = 3, .dilation = 5};
  const auto x = testutil::random_tensor<double>({1, 1, 3, 3}, rng);
  const auto w = testutil::random_tensor<double>({1, 1, 3, 3}, rng);
  const Tensor<double> b({1}, 0.25);
  Tensor<double> y({1, 1, 3, 3});
  k::conv2d_forward(g, x.ptr(), w.ptr(), b.ptr(), y.ptr());
  for (std::size_t i = 0; i < 9; ++i) CHECK(y[i] == doctest::Approx(0.25 + w[4] * x[i]));
}
