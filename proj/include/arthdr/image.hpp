// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "arthdr/tensor.hpp"

namespace arthdr {

/// Interleaved RGB float raster, row-major from the top row.
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<float> pixels;  // height * width * 3

  RgbImage() = default;
  RgbImage(std::size_t w, std::size_t h, float fill = 0.0f)
      : width(w), height(h), pixels(w * h * 3, fill) {}

  float& at(std::size_t x, std::size_t y, std::size_t c) { return pixels[(y * width + x) * 3 + c]; }
  float at(std::size_t x, std::size_t y, std::size_t c) const {
    return pixels[(y * width + x) * 3 + c];
  }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Display-referred image, every component in [0, 1].
struct LdrImage : RgbImage {
  using RgbImage::RgbImage;
  int source_depth = 8;
};

/// Scene-referred linear radiance, every component finite and >= 0.
struct HdrImage : RgbImage {
  using RgbImage::RgbImage;
};

/// Throws ValidationError when an invariant of the image type is violated.
void validate(const LdrImage& image);
void validate(const HdrImage& image);

/// 1 x 3 x H x W planar tensor of an interleaved image.
template <std::floating_point T>
Tensor<T> to_tensor(const RgbImage& image);

/// Stacks same-sized images into an N x 3 x H x W batch.
template <std::floating_point T>
Tensor<T> to_batch(const std::vector<const RgbImage*>& images);

/// Batch item `n` of an N x 3 x H x W tensor as an interleaved image.
template <std::floating_point T>
RgbImage from_tensor(const Tensor<T>& t, std::size_t n = 0);

}  // namespace arthdr
