// SPDX-License-Identifier: Apache-2.0
#include "arthdr/hdr_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <string_view>

namespace arthdr {
namespace {

// Upper bound on decoded pixel count; rejects absurd headers before allocating.
constexpr std::size_t kMaxPixels = std::size_t{1} << 28;

class Cursor {
 public:
  explicit Cursor(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t pos() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  bool done() const noexcept { return pos_ >= bytes_.size(); }
  std::uint8_t peek() const { return bytes_[pos_]; }

  std::uint8_t take(const char* what) {
    if (done()) throw FormatError(std::string("truncated ") + what, pos_);
    return bytes_[pos_++];
  }

  std::span<const std::uint8_t> take_n(std::size_t n, const char* what) {
    if (remaining() < n) {
      throw FormatError(std::string("truncated ") + what + ": need " + std::to_string(n) +
                            " bytes, have " + std::to_string(remaining()),
                        pos_);
    }
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  // Netpbm-style: whitespace and '#' comments between tokens.
  void skip_space_and_comments() {
    while (!done()) {
      const char c = static_cast<char>(peek());
      if (c == '#') {
        while (!done() && peek() != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::string token(const char* what) {
    const std::size_t start = pos_;
    while (!done() && !std::isspace(static_cast<unsigned char>(peek()))) ++pos_;
    if (pos_ == start) throw FormatError(std::string("missing ") + what, start);
    return std::string(reinterpret_cast<const char*>(bytes_.data() + start), pos_ - start);
  }

  std::size_t unsigned_token(const char* what) {
    const std::size_t start = pos_;
    const std::string t = token(what);
    if (t.size() > 9 || !std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      throw FormatError(std::string("invalid ") + what + " '" + t + "'", start);
    }
    return std::stoul(t);
  }

  // One line without the trailing '\n'.
  std::string line(const char* what) {
    const std::size_t start = pos_;
    while (!done() && peek() != '\n') ++pos_;
    if (done()) throw FormatError(std::string("unterminated ") + what, start);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + start), pos_ - start);
    ++pos_;
    return s;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void append(Bytes& out, std::string_view s) { out.insert(out.end(), s.begin(), s.end()); }

void check_dimensions(std::size_t w, std::size_t h, std::size_t offset) {
  if (w == 0 || h == 0) throw FormatError("image extents must be positive", offset);
  if (w > kMaxPixels / h) throw FormatError("image too large", offset);
}

// ---- RGBE run-length coding ---------------------------------------------------

constexpr std::size_t kMinRun = 4;

void rle_encode_channel(const std::uint8_t* data, std::size_t n, Bytes& out) {
  std::size_t cur = 0;
  while (cur < n) {
    std::size_t beg_run = cur;
    std::size_t run_count = 0;
    std::size_t old_run_count = 0;
    // Find the next run of at least kMinRun equal bytes.
    while (run_count < kMinRun && beg_run < n) {
      beg_run += run_count;
      old_run_count = run_count;
      run_count = 1;
      while (beg_run + run_count < n && run_count < 127 &&
             data[beg_run] == data[beg_run + run_count]) {
        ++run_count;
      }
    }
    // A short run directly before the long one is still cheaper as a run.
    if (old_run_count > 1 && old_run_count == beg_run - cur) {
      out.push_back(static_cast<std::uint8_t>(128 + old_run_count));
      out.push_back(data[cur]);
      cur = beg_run;
    }
    while (cur < beg_run) {
      const std::size_t literal = std::min<std::size_t>(beg_run - cur, 128);
      out.push_back(static_cast<std::uint8_t>(literal));
      out.insert(out.end(), data + cur, data + cur + literal);
      cur += literal;
    }
    if (run_count >= kMinRun) {
      out.push_back(static_cast<std::uint8_t>(128 + run_count));
      out.push_back(data[beg_run]);
      cur += run_count;
    }
  }
}

void rle_decode_channel(Cursor& in, std::uint8_t* dst, std::size_t n) {
  std::size_t i = 0;
  while (i < n) {
    const std::size_t at = in.pos();
    const std::size_t count = in.take("RLE code");
    if (count > 128) {
      const std::size_t run = count - 128;
      if (run > n - i) throw FormatError("RLE run overruns scanline", at);
      const std::uint8_t value = in.take("RLE run value");
      std::fill_n(dst + i, run, value);
      i += run;
    } else {
      if (count == 0) throw FormatError("zero-length RLE literal", at);
      if (count > n - i) throw FormatError("RLE literal overruns scanline", at);
      auto lit = in.take_n(count, "RLE literal");
      std::copy(lit.begin(), lit.end(), dst + i);
      i += count;
    }
  }
}

bool scanline_is_rle(const Cursor& in, std::span<const std::uint8_t> bytes, std::size_t width) {
  if (width < 8 || width > 32767 || in.remaining() < 4) return false;
  const std::size_t p = in.pos();
  return bytes[p] == 2 && bytes[p + 1] == 2 && (bytes[p + 2] & 0x80) == 0;
}

float load_float(const std::uint8_t* p, bool little_endian) {
  std::uint32_t bits;
  std::memcpy(&bits, p, 4);
  const bool swap = little_endian != (std::endian::native == std::endian::little);
  if (swap) bits = __builtin_bswap32(bits);
  return std::bit_cast<float>(bits);
}

void store_float_le(Bytes& out, float v) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(bits >> (8 * k)));
}

}  // namespace

// ---- PPM ---------------------------------------------------------------------

LdrImage read_ppm(std::span<const std::uint8_t> bytes) {
  Cursor in(bytes);
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
    throw FormatError("bad PPM magic, expected P6", 0);
  }
  in.take_n(2, "magic");
  in.skip_space_and_comments();
  const std::size_t at_w = in.pos();
  const std::size_t w = in.unsigned_token("width");
  in.skip_space_and_comments();
  const std::size_t h = in.unsigned_token("height");
  check_dimensions(w, h, at_w);
  in.skip_space_and_comments();
  const std::size_t at_max = in.pos();
  const std::size_t maxval = in.unsigned_token("maxval");
  if (maxval != 255) throw FormatError("unsupported PPM maxval " + std::to_string(maxval), at_max);
  const std::size_t at_sep = in.pos();
  if (in.done() || !std::isspace(in.take("separator"))) {
    throw FormatError("missing whitespace after maxval", at_sep);
  }
  auto payload = in.take_n(w * h * 3, "PPM payload");

  LdrImage image(w, h);
  for (std::size_t i = 0; i < payload.size(); ++i) image.pixels[i] = payload[i] / 255.0f;
  return image;
}

Bytes write_ppm(const LdrImage& image) {
  validate(image);
  Bytes out;
  append(out, "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n");
  out.reserve(out.size() + image.pixels.size());
  for (float v : image.pixels) out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0f)));
  return out;
}

// ---- RGBE --------------------------------------------------------------------

std::array<std::uint8_t, 4> encode_rgbe_pixel(float r, float g, float b) {
  const double v = std::max({static_cast<double>(r), static_cast<double>(g), static_cast<double>(b)});
  if (!(v > 0.0)) return {0, 0, 0, 0};
  int e = 0;
  std::frexp(v, &e);  // 2^(e-1) <= v < 2^e
  if (e + 128 < 1) return {0, 0, 0, 0};
  e = std::min(e, 127);
  auto mantissa = [e](float c) -> std::uint8_t {
    const double m = std::floor(std::ldexp(std::max(0.0, static_cast<double>(c)), 8 - e));
    return static_cast<std::uint8_t>(std::min(m, 255.0));
  };
  return {mantissa(r), mantissa(g), mantissa(b), static_cast<std::uint8_t>(e + 128)};
}

std::array<float, 3> decode_rgbe_pixel(std::array<std::uint8_t, 4> rgbe) {
  if (rgbe[3] == 0) return {0.0f, 0.0f, 0.0f};
  const double f = std::ldexp(1.0, static_cast<int>(rgbe[3]) - (128 + 8));
  return {static_cast<float>(rgbe[0] * f), static_cast<float>(rgbe[1] * f),
          static_cast<float>(rgbe[2] * f)};
}

HdrImage read_rgbe(std::span<const std::uint8_t> bytes) {
  Cursor in(bytes);
  const std::string first = in.line("header");
  if (!first.starts_with("#?RADIANCE") && !first.starts_with("#?RGBE")) {
    throw FormatError("missing #?RADIANCE / #?RGBE signature", 0);
  }
  bool have_format = false;
  for (;;) {
    const std::size_t at = in.pos();
    const std::string l = in.line("header");
    if (l.empty()) break;
    if (l.starts_with("FORMAT=")) {
      if (l != "FORMAT=32-bit_rle_rgbe") throw FormatError("unsupported " + l, at);
      have_format = true;
    }
  }
  if (!have_format) throw FormatError("missing FORMAT=32-bit_rle_rgbe line", in.pos());

  const std::size_t at_res = in.pos();
  const std::string res = in.line("resolution line");
  std::size_t w = 0, h = 0;
  {
    Bytes rb(res.begin(), res.end());
    rb.push_back('\n');
    Cursor rc(rb);
    const std::string y_axis = rc.token("resolution axis");
    if (y_axis != "-Y") throw FormatError("unsupported resolution orientation '" + res + "'", at_res);
    rc.skip_space_and_comments();
    h = rc.unsigned_token("height");
    rc.skip_space_and_comments();
    const std::string x_axis = rc.token("resolution axis");
    if (x_axis != "+X") throw FormatError("unsupported resolution orientation '" + res + "'", at_res);
    rc.skip_space_and_comments();
    w = rc.unsigned_token("width");
    rc.skip_space_and_comments();
    if (!rc.done()) throw FormatError("trailing data in resolution line", at_res);
  }
  check_dimensions(w, h, at_res);

  HdrImage image(w, h);
  std::vector<std::uint8_t> planes(w * 4);
  for (std::size_t y = 0; y < h; ++y) {
    if (scanline_is_rle(in, bytes, w)) {
      const std::size_t at = in.pos();
      auto head = in.take_n(4, "scanline header");
      const std::size_t encoded_width = (std::size_t{head[2]} << 8) | head[3];
      if (encoded_width != w) {
        throw FormatError("scanline width " + std::to_string(encoded_width) + " != " +
                              std::to_string(w),
                          at);
      }
      for (std::size_t c = 0; c < 4; ++c) rle_decode_channel(in, planes.data() + c * w, w);
      for (std::size_t x = 0; x < w; ++x) {
        const auto px = decode_rgbe_pixel({planes[x], planes[w + x], planes[2 * w + x], planes[3 * w + x]});
        for (std::size_t c = 0; c < 3; ++c) image.at(x, y, c) = px[c];
      }
    } else {
      auto flat = in.take_n(w * 4, "flat scanline");
      for (std::size_t x = 0; x < w; ++x) {
        const auto px = decode_rgbe_pixel({flat[4 * x], flat[4 * x + 1], flat[4 * x + 2], flat[4 * x + 3]});
        for (std::size_t c = 0; c < 3; ++c) image.at(x, y, c) = px[c];
      }
    }
  }
  return image;
}

Bytes write_rgbe(const HdrImage& image) {
  validate(image);
  const std::size_t w = image.width, h = image.height;
  Bytes out;
  append(out, "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y " + std::to_string(h) + " +X " +
                  std::to_string(w) + "\n");
  const bool rle = w >= 8 && w <= 32767;
  std::vector<std::uint8_t> planes(w * 4);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const auto px = encode_rgbe_pixel(image.at(x, y, 0), image.at(x, y, 1), image.at(x, y, 2));
      if (rle) {
        for (std::size_t c = 0; c < 4; ++c) planes[c * w + x] = px[c];
      } else {
        out.insert(out.end(), px.begin(), px.end());
      }
    }
    if (rle) {
      out.push_back(2);
      out.push_back(2);
      out.push_back(static_cast<std::uint8_t>(w >> 8));
      out.push_back(static_cast<std::uint8_t>(w & 0xff));
      for (std::size_t c = 0; c < 4; ++c) rle_encode_channel(planes.data() + c * w, w, out);
    }
  }
  return out;
}

// ---- PFM ---------------------------------------------------------------------

HdrImage read_pfm(std::span<const std::uint8_t> bytes) {
  Cursor in(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == 'f') {
    throw FormatError("grayscale PFM (Pf) is not supported", 0);
  }
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != 'F') {
    throw FormatError("bad PFM magic, expected PF", 0);
  }
  in.take_n(2, "magic");
  in.skip_space_and_comments();
  const std::size_t at_w = in.pos();
  const std::size_t w = in.unsigned_token("width");
  in.skip_space_and_comments();
  const std::size_t h = in.unsigned_token("height");
  check_dimensions(w, h, at_w);
  in.skip_space_and_comments();
  const std::size_t at_scale = in.pos();
  const std::string scale_tok = in.token("scale");
  double scale = 0.0;
  try {
    std::size_t used = 0;
    scale = std::stod(scale_tok, &used);
    if (used != scale_tok.size()) throw std::invalid_argument(scale_tok);
  } catch (const std::exception&) {
    throw FormatError("invalid PFM scale '" + scale_tok + "'", at_scale);
  }
  if (scale == 0.0 || !std::isfinite(scale)) throw FormatError("PFM scale must be non-zero", at_scale);
  const std::size_t at_sep = in.pos();
  if (in.done() || !std::isspace(in.take("separator"))) {
    throw FormatError("missing whitespace after scale", at_sep);
  }
  const bool little = scale < 0.0;
  const std::size_t at_payload = in.pos();
  auto payload = in.take_n(w * h * 3 * 4, "PFM payload");

  HdrImage image(w, h);
  for (std::size_t row = 0; row < h; ++row) {
    const std::size_t y = h - 1 - row;  // bottom row first
    for (std::size_t i = 0; i < w * 3; ++i) {
      const float v = load_float(payload.data() + (row * w * 3 + i) * 4, little);
      if (!std::isfinite(v) || v < 0.0f) {
        throw ValidationError("PFM sample at byte offset " +
                              std::to_string(at_payload + (row * w * 3 + i) * 4) + " is " +
                              std::to_string(v) + ", expected finite non-negative radiance");
      }
      image.pixels[y * w * 3 + i] = v;
    }
  }
  return image;
}

Bytes write_pfm(const HdrImage& image) {
  validate(image);
  Bytes out;
  append(out, "PF\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n-1.0\n");
  out.reserve(out.size() + image.pixels.size() * 4);
  for (std::size_t row = 0; row < image.height; ++row) {
    const std::size_t y = image.height - 1 - row;
    for (std::size_t i = 0; i < image.width * 3; ++i) store_float_le(out, image.pixels[y * image.width * 3 + i]);
  }
  return out;
}

// ---- resize ------------------------------------------------------------------

template <class Image>
Image resize_bilinear(const Image& image, std::size_t new_width, std::size_t new_height) {
  if (new_width == 0 || new_height == 0) throw ConfigError("resize target extents must be >= 1");
  if (image.width == 0 || image.height == 0) throw ConfigError("resize source is empty");
  Image out = image;
  out.width = new_width;
  out.height = new_height;
  out.pixels.assign(new_width * new_height * 3, 0.0f);

  struct Tap {
    std::size_t i0, i1;
    double frac;
  };
  auto taps = [](std::size_t in, std::size_t n) {
    std::vector<Tap> t(n);
    const double ratio = static_cast<double>(in) / static_cast<double>(n);
    for (std::size_t d = 0; d < n; ++d) {
      const double src = std::clamp((static_cast<double>(d) + 0.5) * ratio - 0.5, 0.0,
                                    static_cast<double>(in - 1));
      const auto i0 = static_cast<std::size_t>(std::floor(src));
      t[d] = {i0, std::min(i0 + 1, in - 1), src - static_cast<double>(i0)};
    }
    return t;
  };
  const auto xs = taps(image.width, new_width);
  const auto ys = taps(image.height, new_height);

  for (std::size_t y = 0; y < new_height; ++y) {
    const Tap ty = ys[y];
    for (std::size_t x = 0; x < new_width; ++x) {
      const Tap tx = xs[x];
      for (std::size_t c = 0; c < 3; ++c) {
        const double top = (1.0 - tx.frac) * image.at(tx.i0, ty.i0, c) + tx.frac * image.at(tx.i1, ty.i0, c);
        const double bot = (1.0 - tx.frac) * image.at(tx.i0, ty.i1, c) + tx.frac * image.at(tx.i1, ty.i1, c);
        out.at(x, y, c) = static_cast<float>((1.0 - ty.frac) * top + ty.frac * bot);
      }
    }
  }
  return out;
}

template LdrImage resize_bilinear<LdrImage>(const LdrImage&, std::size_t, std::size_t);
template HdrImage resize_bilinear<HdrImage>(const HdrImage&, std::size_t, std::size_t);
template RgbImage resize_bilinear<RgbImage>(const RgbImage&, std::size_t, std::size_t);

// ---- files -------------------------------------------------------------------

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path.string() + "' for reading");
  Bytes bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (f.bad()) throw IoError("read failed for '" + path.string() + "'");
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed for '" + path.string() + "'");
}

LdrImage load_ppm(const std::filesystem::path& path) { return read_ppm(read_file(path)); }
void save_ppm(const std::filesystem::path& path, const LdrImage& image) { write_file(path, write_ppm(image)); }
HdrImage load_rgbe(const std::filesystem::path& path) { return read_rgbe(read_file(path)); }
void save_rgbe(const std::filesystem::path& path, const HdrImage& image) { write_file(path, write_rgbe(image)); }
HdrImage load_pfm(const std::filesystem::path& path) { return read_pfm(read_file(path)); }
void save_pfm(const std::filesystem::path& path, const HdrImage& image) { write_file(path, write_pfm(image)); }

HdrImage load_hdr(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".pfm") return load_pfm(path);
  if (ext == ".hdr" || ext == ".pic") return load_rgbe(path);
  throw ConfigError("unrecognised HDR extension '" + ext + "' (expected .hdr, .pic or .pfm)");
}

void save_hdr(const std::filesystem::path& path, const HdrImage& image) {
  const std::string ext = path.extension().string();
  if (ext == ".pfm") return save_pfm(path, image);
  if (ext == ".hdr" || ext == ".pic") return save_rgbe(path, image);
  throw ConfigError("unrecognised HDR extension '" + ext + "' (expected .hdr, .pic or .pfm)");
}

}  // namespace arthdr
