// SPDX-License-Identifier: Apache-2.0
#include "arthdr/metrics.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "arthdr/error.hpp"

namespace arthdr {

double psnr(std::span<const double> a, std::span<const double> b, double peak) {
  if (a.size() != b.size()) {
    throw ShapeError("psnr: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + " samples");
  }
  if (a.empty()) throw ShapeError("psnr: empty input");
  if (!(peak > 0.0)) throw DomainError("psnr: peak must be positive");
  double sse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i] >= 0.0 && a[i] <= peak && b[i] >= 0.0 && b[i] <= peak)) {
      throw DomainError("psnr: sample " + std::to_string(i) + " outside [0, peak]");
    }
    const double d = a[i] - b[i];
    sse += d * d;
  }
  if (sse == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = sse / static_cast<double>(a.size());
  return 10.0 * std::log10(peak * peak / mse);
}

double psnr(const RgbImage& a, const RgbImage& b, double peak) {
  if (a.width != b.width || a.height != b.height) {
    throw ShapeError("psnr: image sizes differ (" + std::to_string(a.width) + "x" + std::to_string(a.height) +
                     " vs " + std::to_string(b.width) + "x" + std::to_string(b.height) + ")");
  }
  std::vector<double> x(a.pixels.begin(), a.pixels.end());
  std::vector<double> y(b.pixels.begin(), b.pixels.end());
  return psnr(x, y, peak);
}

namespace {

std::vector<double> gaussian_1d() {
  std::vector<double> g(kSsimWindow);
  const double c = static_cast<double>(kSsimWindow / 2);
  double total = 0.0;
  for (std::size_t i = 0; i < kSsimWindow; ++i) {
    const double d = static_cast<double>(i) - c;
    g[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    total += g[i];
  }
  for (double& v : g) v /= total;
  return g;
}

// Valid-mode separable filter: (h - 10) x (w - 10) output.
std::vector<double> filter_valid(const std::vector<double>& src, std::size_t w, std::size_t h,
                                 const std::vector<double>& g) {
  const std::size_t k = g.size();
  const std::size_t ow = w - k + 1, oh = h - k + 1;
  std::vector<double> rows(h * ow, 0.0);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t i = 0; i < k; ++i) s += g[i] * src[y * w + x + i];
      rows[y * ow + x] = s;
    }
  }
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0.0;
      for (std::size_t i = 0; i < k; ++i) s += g[i] * rows[(y + i) * ow + x];
      out[y * ow + x] = s;
    }
  }
  return out;
}

}  // namespace

std::vector<double> ssim_window() {
  const auto g = gaussian_1d();
  std::vector<double> w(kSsimWindow * kSsimWindow);
  for (std::size_t i = 0; i < kSsimWindow; ++i) {
    for (std::size_t j = 0; j < kSsimWindow; ++j) w[i * kSsimWindow + j] = g[i] * g[j];
  }
  return w;
}

double ssim_plane(std::span<const double> a, std::span<const double> b, std::size_t width,
                  std::size_t height, double dynamic_range) {
  if (a.size() != width * height || b.size() != width * height) throw ShapeError("ssim: plane size mismatch");
  if (width < kSsimWindow || height < kSsimWindow) {
    throw ConfigError("ssim: image " + std::to_string(width) + "x" + std::to_string(height) +
                      " is smaller than the 11x11 window");
  }
  const double c1 = (kSsimK1 * dynamic_range) * (kSsimK1 * dynamic_range);
  const double c2 = (kSsimK2 * dynamic_range) * (kSsimK2 * dynamic_range);
  const auto g = gaussian_1d();
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mx = filter_valid(x, width, height, g);
  const auto my = filter_valid(y, width, height, g);
  const auto exx = filter_valid(xx, width, height, g);
  const auto eyy = filter_valid(yy, width, height, g);
  const auto exy = filter_valid(xy, width, height, g);
  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double sxx = exx[i] - mx[i] * mx[i];
    const double syy = eyy[i] - my[i] * my[i];
    const double sxy = exy[i] - mx[i] * my[i];
    const double num = (2.0 * mx[i] * my[i] + c1) * (2.0 * sxy + c2);
    const double den = (mx[i] * mx[i] + my[i] * my[i] + c1) * (sxx + syy + c2);
    total += num / den;
  }
  return total / static_cast<double>(mx.size());
}

double ssim(const RgbImage& a, const RgbImage& b) {
  if (a.width != b.width || a.height != b.height) throw ShapeError("ssim: image sizes differ");
  const std::size_t n = a.width * a.height;
  std::vector<double> la(n), lb(n);
  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double sa = 0.0, sb = 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      const double va = a.pixels[3 * i + c], vb = b.pixels[3 * i + c];
      sa += va;
      sb += vb;
      peak = std::max({peak, va, vb});
    }
    la[i] = sa / 3.0;
    lb[i] = sb / 3.0;
  }
  return ssim_plane(la, lb, a.width, a.height, std::max(peak, 1e-6));
}

double MetricsReport::mean_psnr() const {
  if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (const auto& r : rows) s += r.psnr_db;
  return s / static_cast<double>(rows.size());
}

double MetricsReport::mean_ssim() const {
  if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (const auto& r : rows) s += r.ssim;
  return s / static_cast<double>(rows.size());
}

void write_report_csv(std::ostream& os, const MetricsReport& report) {
  const auto old = os.precision(17);
  os << "path,psnr_db,ssim\n";
  for (const auto& r : report.rows) os << r.path << ',' << r.psnr_db << ',' << r.ssim << '\n';
  os << "mean," << report.mean_psnr() << ',' << report.mean_ssim() << '\n';
  os.precision(old);
}

}  // namespace arthdr
