// SPDX-License-Identifier: Apache-2.0
#include "arthdr/param_file.hpp"

#include <bit>
#include <cstring>

#include "arthdr/hdr_io.hpp"

namespace arthdr {

// ---- primitive codecs ---------------------------------------------------------

void ByteWriter::u32(std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int k = 0; k < 8; ++k) out_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

std::span<const std::uint8_t> ByteReader::raw(std::size_t n, const char* what) {
  if (remaining() < n) {
    throw FormatError(std::string("truncated ") + what + ": need " + std::to_string(n) +
                          " bytes, have " + std::to_string(remaining()),
                      pos_);
  }
  auto s = bytes_.subspan(pos_, n);
  pos_ += n;
  return s;
}

std::uint8_t ByteReader::u8(const char* what) { return raw(1, what)[0]; }

std::uint32_t ByteReader::u32(const char* what) {
  auto s = raw(4, what);
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= std::uint32_t{s[k]} << (8 * k);
  return v;
}

std::uint64_t ByteReader::u64(const char* what) {
  auto s = raw(8, what);
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= std::uint64_t{s[k]} << (8 * k);
  return v;
}

float ByteReader::f32(const char* what) { return std::bit_cast<float>(u32(what)); }
double ByteReader::f64(const char* what) { return std::bit_cast<double>(u64(what)); }

// ---- generic container --------------------------------------------------------

std::vector<std::uint8_t> encode_param_file(std::string_view magic, std::uint32_t version,
                                            std::span<const std::uint8_t> config,
                                            const ParameterSet<float>& params) {
  if (magic.size() != 4) throw ConfigError("parameter file magic must be 4 bytes");
  ByteWriter w;
  w.raw(magic);
  w.u32(version);
  w.u32(static_cast<std::uint32_t>(config.size()));
  w.raw(config);
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.u32(static_cast<std::uint32_t>(p.name.size()));
    w.raw(p.name);
    w.u32(static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t e : p.value.shape()) w.u32(static_cast<std::uint32_t>(e));
    for (float v : p.value.data()) w.f32(v);
  }
  return std::move(w.bytes());
}

ParamFile decode_param_file(std::span<const std::uint8_t> bytes, std::string_view expected_magic) {
  ByteReader r(bytes);
  ParamFile file;
  auto magic = r.raw(4, "magic");
  file.magic.assign(magic.begin(), magic.end());
  if (file.magic != expected_magic) {
    throw FormatError("bad magic '" + file.magic + "', expected '" + std::string(expected_magic) + "'", 0);
  }
  file.version = r.u32("version");
  const std::uint32_t config_len = r.u32("config length");
  auto config = r.raw(config_len, "config block");
  file.config.assign(config.begin(), config.end());

  const std::uint32_t count = r.u32("record count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t at = r.pos();
    const std::uint32_t name_len = r.u32("name length");
    if (name_len == 0 || name_len > 256) throw FormatError("invalid parameter name length", at);
    auto name = r.raw(name_len, "parameter name");
    const std::uint32_t rank = r.u32("rank");
    if (rank == 0 || rank > 8) throw FormatError("invalid parameter rank " + std::to_string(rank), at);
    Shape shape;
    std::size_t numel = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      const std::uint32_t e = r.u32("extent");
      if (e == 0) throw FormatError("zero parameter extent", at);
      shape.push_back(e);
      numel *= e;
      if (numel > r.remaining() / 4 + 1) throw FormatError("parameter payload exceeds file size", at);
    }
    auto payload = r.raw(numel * 4, "parameter payload");
    std::vector<float> data(numel);
    for (std::size_t k = 0; k < numel; ++k) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= std::uint32_t{payload[4 * k + b]} << (8 * b);
      data[k] = std::bit_cast<float>(bits);
    }
    std::string pname(name.begin(), name.end());
    if (file.params.contains(pname)) throw FormatError("duplicate parameter '" + pname + "'", at);
    file.params.add(std::move(pname), Tensor<float>(std::move(shape), std::move(data)));
  }
  if (r.remaining() != 0) {
    throw FormatError(std::to_string(r.remaining()) + " trailing bytes after last record", r.pos());
  }
  return file;
}

// ---- checkpoints ----------------------------------------------------------------

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  ckpt.net.validate();
  ByteWriter c;
  c.u32(static_cast<std::uint32_t>(ckpt.net.channels));
  c.u32(static_cast<std::uint32_t>(ckpt.net.iterations));
  c.u32(static_cast<std::uint32_t>(ckpt.net.dilation));
  c.u32(static_cast<std::uint32_t>(ckpt.net.growth));
  c.u32(static_cast<std::uint32_t>(ArtHdrNetConfig::num_dilated_blocks));
  c.u32(static_cast<std::uint32_t>(ArtHdrNetConfig::layers_per_block));
  c.u8(ckpt.net.skip_level1 ? 1 : 0);
  c.u8(ckpt.net.skip_level2 ? 1 : 0);
  c.u8(ckpt.optimizer ? 1 : 0);
  c.u8(0);
  c.f64(ckpt.mu);
  c.u64(ckpt.optimizer ? ckpt.optimizer->step : 0);
  c.u32(ckpt.epochs_completed);

  ParameterSet<float> records;
  for (const auto& p : ckpt.params) records.add(p.name, p.value);
  if (ckpt.optimizer) {
    const auto& opt = *ckpt.optimizer;
    if (opt.m.size() != ckpt.params.size() || opt.v.size() != ckpt.params.size()) {
      throw ContractError("checkpoint optimizer state does not match parameter count");
    }
    for (std::size_t i = 0; i < ckpt.params.size(); ++i) records.add("adam.m." + ckpt.params[i].name, opt.m[i]);
    for (std::size_t i = 0; i < ckpt.params.size(); ++i) records.add("adam.v." + ckpt.params[i].name, opt.v[i]);
  }
  return encode_param_file("AHDR", kCheckpointVersion, c.bytes(), records);
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ParamFile file = decode_param_file(bytes, "AHDR");
  if (file.version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(file.version), 4);
  }
  constexpr std::size_t kConfigOffset = 12;
  ByteReader c(file.config);
  Checkpoint ckpt;
  ckpt.net.channels = c.u32("channels");
  ckpt.net.iterations = c.u32("iterations");
  ckpt.net.dilation = c.u32("dilation");
  ckpt.net.growth = c.u32("growth");
  const std::uint32_t blocks = c.u32("block count");
  const std::uint32_t layers = c.u32("layers per block");
  if (blocks != ArtHdrNetConfig::num_dilated_blocks || layers != ArtHdrNetConfig::layers_per_block) {
    throw FormatError("checkpoint block structure " + std::to_string(blocks) + "x" +
                          std::to_string(layers) + " is not 3x4",
                      kConfigOffset + 16);
  }
  ckpt.net.skip_level1 = c.u8("skip flag") != 0;
  ckpt.net.skip_level2 = c.u8("skip flag") != 0;
  const bool has_optimizer = c.u8("optimizer flag") != 0;
  c.u8("reserved");
  ckpt.mu = c.f64("mu");
  const std::uint64_t adam_step = c.u64("adam step");
  ckpt.epochs_completed = c.u32("epochs completed");
  if (c.remaining() != 0) throw FormatError("oversized checkpoint config block", kConfigOffset + c.pos());
  try {
    ckpt.net.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid network config: ") + e.what(), kConfigOffset);
  }
  if (!(ckpt.mu > 0.0)) throw FormatError("invalid mu in checkpoint", kConfigOffset + 28);

  const auto layout = param_layout(ckpt.net);
  const std::size_t expected = layout.size() * (has_optimizer ? 3 : 1);
  if (file.params.size() != expected) {
    throw FormatError("checkpoint holds " + std::to_string(file.params.size()) + " records, config implies " +
                          std::to_string(expected),
                      kConfigOffset + file.config.size());
  }
  auto check = [&](std::size_t idx, const std::string& name, const Shape& shape) {
    const Parameter<float>& p = file.params[idx];
    if (p.name != name || p.value.shape() != shape) {
      throw FormatError("record " + std::to_string(idx) + " is '" + p.name + "' " + shape_str(p.value.shape()) +
                            ", expected '" + name + "' " + shape_str(shape),
                        kConfigOffset + file.config.size());
    }
  };
  for (std::size_t i = 0; i < layout.size(); ++i) {
    check(i, layout[i].name, layout[i].shape);
    ckpt.params.add(layout[i].name, file.params[i].value);
  }
  if (has_optimizer) {
    AdamState<float> opt;
    opt.step = adam_step;
    for (std::size_t i = 0; i < layout.size(); ++i) {
      check(layout.size() + i, "adam.m." + layout[i].name, layout[i].shape);
      check(2 * layout.size() + i, "adam.v." + layout[i].name, layout[i].shape);
      opt.m.push_back(file.params[layout.size() + i].value);
      opt.v.push_back(file.params[2 * layout.size() + i].value);
    }
    ckpt.optimizer = std::move(opt);
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace arthdr
