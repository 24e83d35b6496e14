// SPDX-License-Identifier: Apache-2.0
#include "arthdr/image.hpp"

#include <cmath>
#include <string>

namespace arthdr {
namespace {

void check_extent(const RgbImage& image) {
  if (image.width == 0 || image.height == 0) throw ValidationError("image extents must be positive");
  if (image.pixels.size() != image.width * image.height * 3) {
    throw ValidationError("image buffer holds " + std::to_string(image.pixels.size()) +
                          " values, expected " + std::to_string(image.width * image.height * 3));
  }
}

}  // namespace

void validate(const LdrImage& image) {
  check_extent(image);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    const float v = image.pixels[i];
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw ValidationError("LDR component " + std::to_string(i) + " = " + std::to_string(v) +
                            " outside [0, 1]");
    }
  }
}

void validate(const HdrImage& image) {
  check_extent(image);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    const float v = image.pixels[i];
    if (!std::isfinite(v) || v < 0.0f) {
      throw ValidationError("HDR component " + std::to_string(i) + " = " + std::to_string(v) +
                            " is not a finite non-negative radiance");
    }
  }
}

template <std::floating_point T>
Tensor<T> to_tensor(const RgbImage& image) {
  return to_batch<T>({&image});
}

template <std::floating_point T>
Tensor<T> to_batch(const std::vector<const RgbImage*>& images) {
  if (images.empty()) throw ShapeError("to_batch: no images");
  const std::size_t w = images.front()->width, h = images.front()->height;
  Tensor<T> out(Shape{images.size(), 3, h, w});
  for (std::size_t n = 0; n < images.size(); ++n) {
    const RgbImage& im = *images[n];
    if (im.width != w || im.height != h) {
      throw ShapeError("to_batch: image " + std::to_string(n) + " is " + std::to_string(im.width) +
                       "x" + std::to_string(im.height) + ", expected " + std::to_string(w) + "x" +
                       std::to_string(h));
    }
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        for (std::size_t c = 0; c < 3; ++c) out.at(n, c, y, x) = static_cast<T>(im.at(x, y, c));
  }
  return out;
}

template <std::floating_point T>
RgbImage from_tensor(const Tensor<T>& t, std::size_t n) {
  if (t.rank() != 4 || t.dim(1) != 3 || n >= t.dim(0)) {
    throw ShapeError("from_tensor: expected Nx3xHxW with batch index " + std::to_string(n) +
                     ", got " + shape_str(t.shape()));
  }
  RgbImage im(t.dim(3), t.dim(2));
  for (std::size_t y = 0; y < im.height; ++y)
    for (std::size_t x = 0; x < im.width; ++x)
      for (std::size_t c = 0; c < 3; ++c) im.at(x, y, c) = static_cast<float>(t.at(n, c, y, x));
  return im;
}

template Tensor<float> to_tensor<float>(const RgbImage&);
template Tensor<double> to_tensor<double>(const RgbImage&);
template Tensor<float> to_batch<float>(const std::vector<const RgbImage*>&);
template Tensor<double> to_batch<double>(const std::vector<const RgbImage*>&);
template RgbImage from_tensor<float>(const Tensor<float>&, std::size_t);
template RgbImage from_tensor<double>(const Tensor<double>&, std::size_t);

}  // namespace arthdr
