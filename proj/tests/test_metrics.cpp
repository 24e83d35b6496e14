// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <sstream>

#include "arthdr/metrics.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace arthdr;

TEST_CASE("psnr and ssim match brute-force oracles") {
  std::mt19937_64 rng(61);
  for (int i = 0; i < 20; ++i) {
    const RgbImage a = testutil::random_image(16, 13, rng);
    RgbImage b = a;
    std::normal_distribution<double> noise(0.0, 0.05 * (i + 1));
    for (float& v : b.pixels) v = std::clamp(float(v + noise(rng)), 0.0f, 1.0f);
    CHECK(psnr(a, b) == doctest::Approx(oracle::psnr(a, b)).epsilon(1e-12));
    CHECK(std::abs(ssim(a, b) - oracle::ssim(a, b)) < 1e-9);
  }
}

TEST_CASE("psnr closed forms") {
  std::vector<double> a(100), b(100);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = 0.009 * double(i);
    b[i] = a[i] + 0.1;
  }
  CHECK(std::abs(psnr(a, b) - 20.0) < 1e-9);
  CHECK(std::isinf(psnr(a, a)));
  CHECK(psnr(std::vector<double>{0.0}, std::vector<double>{255.0}, 255.0) == doctest::Approx(0.0));
  CHECK_THROWS_AS(psnr(a, std::vector<double>(3)), ShapeError);
  b[0] = 1.5;
  CHECK_THROWS_AS(psnr(a, b), DomainError);
}

TEST_CASE("ssim properties") {
  std::mt19937_64 rng(62);
  const RgbImage a = testutil::random_image(14, 12, rng);
  const RgbImage b = testutil::random_image(14, 12, rng);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-12));
  CHECK(ssim(a, b) < 1.0);
  CHECK(ssim(a, b) >= -1.0);
  CHECK_THROWS_AS(ssim(testutil::random_image(10, 20, rng), testutil::random_image(10, 20, rng)), ConfigError);

  const auto w = ssim_window();
  double s = 0.0;
  for (double v : w) s += v;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(w[5 * 11 + 5] == *std::max_element(w.begin(), w.end()));
  CHECK(w[0] == doctest::Approx(w[120]));

  // Luminance SSIM ignores a channel swap that keeps the per-pixel mean.
  RgbImage swapped = a;
  for (std::size_t p = 0; p < a.width * a.height; ++p) std::swap(swapped.pixels[3 * p], swapped.pixels[3 * p + 2]);
  CHECK(ssim(a, swapped) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("report csv") {
  MetricsReport r;
  r.rows.push_back({"a.ppm", 30.0, 0.5});
  r.rows.push_back({"b.ppm", 40.0, 0.75});
  CHECK(r.mean_psnr() == 35.0);
  CHECK(r.mean_ssim() == 0.625);
  std::ostringstream os;
  write_report_csv(os, r);
  CHECK(os.str() == "path,psnr_db,ssim\na.ppm,30,0.5\nb.ppm,40,0.75\nmean,35,0.625\n");
  CHECK(std::isnan(MetricsReport{}.mean_psnr()));
}
