// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "arthdr/exposure.hpp"
#include "helpers.hpp"

using namespace arthdr;

namespace {

LdrImage random_ldr(std::mt19937_64& rng, std::size_t w, std::size_t h) {
  LdrImage img(w, h);
  static_cast<RgbImage&>(img) = testutil::random_image(w, h, rng);
  return img;
}

}  // namespace

TEST_CASE("bracket ordering and EV0 identity") {
  std::mt19937_64 rng(41);
  for (int i = 0; i < 100; ++i) {
    const LdrImage img = random_ldr(rng, 9, 7);
    const ExposureStack s = bracket(img);
    CHECK(s.ev_0.pixels == img.pixels);
    for (std::size_t k = 0; k < img.pixels.size(); ++k) {
      CHECK(s.ev_minus2.pixels[k] <= s.ev_0.pixels[k]);
      CHECK(s.ev_0.pixels[k] <= s.ev_plus2.pixels[k]);
    }
  }
}

TEST_CASE("exposure matches the gamma response model") {
  std::mt19937_64 rng(42);
  const LdrImage img = random_ldr(rng, 8, 8);
  for (float gamma : {1.0f, 2.2f, 3.0f}) {
    for (float ev : {-2.0f, -0.5f, 1.0f, 2.0f}) {
      const LdrImage out = synthesize_exposure(img, ev, gamma);
      for (std::size_t k = 0; k < img.pixels.size(); ++k) {
        const double lin = std::pow(double(img.pixels[k]), double(gamma)) * std::pow(2.0, double(ev));
        const double expect = std::min(1.0, std::pow(lin, 1.0 / gamma));
        CHECK(out.pixels[k] == doctest::Approx(expect).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("exposure clips and keeps black") {
  LdrImage img(2, 1);
  img.pixels = {0.0f, 1.0f, 0.9f, 0.5f, 0.2f, 0.0f};
  const LdrImage up = synthesize_exposure(img, 2.0f);
  CHECK(up.pixels[0] == 0.0f);
  CHECK(up.pixels[1] == 1.0f);
  CHECK(up.pixels[2] == 1.0f);
  for (float v : synthesize_exposure(img, -2.0f).pixels) CHECK(v <= 1.0f);
  CHECK_THROWS_AS(synthesize_exposure(img, 1.0f, 0.0f), ConfigError);
  CHECK_THROWS_AS(synthesize_exposure(img, std::nanf("")), ConfigError);
}
