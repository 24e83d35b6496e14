// SPDX-License-Identifier: Apache-2.0
//
// Little-endian parameter container shared by network checkpoints ("AHDR")
// and the perceptual extractor fixture ("AHPX"):
//
//   char[4]  magic
//   u32      format version
//   u32      config block length L
//   u8[L]    config block (format specific)
//   u32      record count
//   record*: u32 name length, name bytes, u32 rank, u32 extents[rank],
//            f32 payload[prod(extents)]
//
// Readers reject trailing bytes, so the total size is validated too.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "arthdr/adam.hpp"
#include "arthdr/losses.hpp"
#include "arthdr/network.hpp"

namespace arthdr {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  void raw(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  void raw(std::span<const std::uint8_t> s) { out_.insert(out_.end(), s.begin(), s.end()); }

  std::vector<std::uint8_t>& bytes() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8(const char* what);
  std::uint32_t u32(const char* what);
  std::uint64_t u64(const char* what);
  float f32(const char* what);
  double f64(const char* what);
  std::span<const std::uint8_t> raw(std::size_t n, const char* what);

  std::size_t pos() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

struct ParamFile {
  std::string magic;
  std::uint32_t version = 0;
  std::vector<std::uint8_t> config;
  ParameterSet<float> params;
};

std::vector<std::uint8_t> encode_param_file(std::string_view magic, std::uint32_t version,
                                            std::span<const std::uint8_t> config,
                                            const ParameterSet<float>& params);
ParamFile decode_param_file(std::span<const std::uint8_t> bytes, std::string_view expected_magic);

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Everything needed to resume training or run inference.
struct Checkpoint {
  ArtHdrNetConfig net;
  double mu = kDefaultMu;
  std::uint32_t epochs_completed = 0;
  ParameterSet<float> params;
  std::optional<AdamState<float>> optimizer;
};

/// Checkpoint config block (after the generic header):
///   u32 channels, iterations, dilation, growth, num_blocks, layers_per_block
///   u8  skip_level1, skip_level2, has_optimizer_state, reserved
///   f64 mu
///   u64 adam_step
///   u32 epochs_completed
/// Records: the network namespace in canonical order, then, when optimizer
/// state is present, "adam.m.<name>" for every parameter followed by
/// "adam.v.<name>".
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace arthdr
