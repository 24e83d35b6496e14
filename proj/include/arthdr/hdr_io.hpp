// SPDX-License-Identifier: Apache-2.0
//
// Readers and writers for the three raster formats the pipeline touches.
//
//   PPM   binary P6, maxval 255. Byte v <-> v / 255.
//   RGBE  Radiance .hdr, "-Y h +X w" orientation only. Uses the
//         component/256 mantissa convention: a pixel is stored as
//         byte_c = floor(c / 2^(e-8)) where 2^(e-1) <= max(r,g,b) < 2^e, and
//         decoded as byte_c * 2^(e-8) with exponent byte e + 128. Exponent
//         byte 0 decodes to black. Scanlines of width 8..32767 are written
//         with adaptive run-length encoding, everything else flat.
//   PFM   "PF" colour only, rows stored bottom-up; negative scale means
//         little-endian (the writer always emits "-1.0").
//
// All readers take the whole file as bytes and throw FormatError with the
// byte offset of the first malformed field.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "arthdr/image.hpp"

namespace arthdr {

using Bytes = std::vector<std::uint8_t>;

LdrImage read_ppm(std::span<const std::uint8_t> bytes);
Bytes write_ppm(const LdrImage& image);

HdrImage read_rgbe(std::span<const std::uint8_t> bytes);
Bytes write_rgbe(const HdrImage& image);

/// Single-pixel codec used by the .hdr writer and reader.
std::array<std::uint8_t, 4> encode_rgbe_pixel(float r, float g, float b);
std::array<float, 3> decode_rgbe_pixel(std::array<std::uint8_t, 4> rgbe);

HdrImage read_pfm(std::span<const std::uint8_t> bytes);
Bytes write_pfm(const HdrImage& image);

/// Bilinear resampling with half-pixel-centred sample positions and edge clamping.
template <class Image>
Image resize_bilinear(const Image& image, std::size_t new_width, std::size_t new_height);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

LdrImage load_ppm(const std::filesystem::path& path);
void save_ppm(const std::filesystem::path& path, const LdrImage& image);
HdrImage load_rgbe(const std::filesystem::path& path);
void save_rgbe(const std::filesystem::path& path, const HdrImage& image);
HdrImage load_pfm(const std::filesystem::path& path);
void save_pfm(const std::filesystem::path& path, const HdrImage& image);

/// Dispatches on extension: .hdr / .pic -> RGBE, .pfm -> PFM.
HdrImage load_hdr(const std::filesystem::path& path);
void save_hdr(const std::filesystem::path& path, const HdrImage& image);

}  // namespace arthdr
