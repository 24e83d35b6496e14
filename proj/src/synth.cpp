// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "arthdr/hdr_io.hpp"
#include "arthdr/trainer.hpp"

namespace arthdr {

namespace {

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit(rng); }

double smoothstep(double e0, double e1, double x) {
  const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

}  // namespace

SynthPair synth_pair(std::uint64_t seed, std::size_t width, std::size_t height) {
  if (width < 8 || height < 8) throw ConfigError("synthetic images need extents >= 8");
  std::mt19937_64 rng(seed);
  SynthPair out;
  out.exposure = uniform(rng, 2.0, 6.0);
  const double clip = 1.0 / out.exposure;

  const double gx = uniform(rng, -1.0, 1.0), gy = uniform(rng, -1.0, 1.0);
  const double freq = uniform(rng, 0.5, 1.5), phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  double tint[3];
  for (double& t : tint) t = uniform(rng, 0.7, 1.0);

  const double extent = static_cast<double>(std::min(width, height));
  const double radius = uniform(rng, 0.12, 0.2) * extent;
  const double cx = uniform(rng, radius + 1.0, static_cast<double>(width) - radius - 1.0);
  const double cy = uniform(rng, radius + 1.0, static_cast<double>(height) - radius - 1.0);
  const double glow = 0.15 * extent;

  const double dx = uniform(rng, 0.0, static_cast<double>(width));
  const double dy = uniform(rng, 0.0, static_cast<double>(height));
  const double dark_r = uniform(rng, 0.15, 0.3) * extent;

  out.hdr = HdrImage(width, height);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double u = static_cast<double>(x) / static_cast<double>(width - 1);
      const double v = static_cast<double>(y) / static_cast<double>(height - 1);
      const double ramp = 0.5 + 0.25 * (gx * (u - 0.5) + gy * (v - 0.5)) * 2.0;
      const double wave = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * freq * (u + v) + phase);
      double base = clip * (0.05 + 0.45 * ramp + 0.15 * wave);  // <= 0.65 clip

      const double dd = std::hypot(static_cast<double>(x) - dx, static_cast<double>(y) - dy);
      base *= 0.03 + 0.97 * smoothstep(0.6 * dark_r, dark_r, dd);

      const double d = std::hypot(static_cast<double>(x) + 0.5 - cx, static_cast<double>(y) + 0.5 - cy);
      for (std::size_t c = 0; c < 3; ++c) {
        double radiance = base * tint[c];
        if (d <= radius) {
          radiance = 1.0;
        } else {
          const double t = (d - radius) / glow;
          radiance += 0.3 * clip * std::exp(-t * t);
        }
        out.hdr.at(x, y, c) = static_cast<float>(radiance);
      }
    }
  }
  out.hdr = normalize_peak(std::move(out.hdr));

  out.ldr = LdrImage(width, height);
  for (std::size_t i = 0; i < out.hdr.pixels.size(); ++i) {
    const double exposed = std::clamp(out.exposure * out.hdr.pixels[i], 0.0, 1.0);
    const double encoded = std::pow(exposed, 1.0 / kDefaultCrfGamma);
    out.ldr.pixels[i] = static_cast<float>(std::round(encoded * 255.0) / 255.0);
  }
  return out;
}

std::vector<TrainingPair> synth_dataset(std::size_t count, std::uint64_t seed, std::size_t width,
                                        std::size_t height) {
  std::vector<TrainingPair> out;
  std::seed_seq seq{seed, std::uint64_t{0x5717}};
  std::vector<std::uint64_t> seeds(count);
  std::mt19937_64 rng(seq);
  for (auto& s : seeds) s = rng();
  for (std::size_t i = 0; i < count; ++i) {
    SynthPair p = synth_pair(seeds[i], width, height);
    out.push_back({"synth" + std::to_string(i), std::move(p.ldr), std::move(p.hdr)});
  }
  return out;
}

HdrImage normalize_peak(HdrImage hdr) {
  float peak = 0.0f;
  for (float v : hdr.pixels) peak = std::max(peak, v);
  if (peak > 0.0f) {
    for (float& v : hdr.pixels) v /= peak;
  }
  return hdr;
}

SplitIndices split_indices(std::size_t n, std::uint64_t seed) {
  if (n < 5) throw ConfigError("dataset split needs at least 5 pairs, got " + std::to_string(n));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng() % (i + 1)]);
  const std::size_t n_train = n * 4 / 5;
  SplitIndices split;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return split;
}

DatasetIndex split_dataset(std::vector<PairPaths> pairs, std::uint64_t seed) {
  const SplitIndices split = split_indices(pairs.size(), seed);
  DatasetIndex index;
  for (std::size_t i : split.train) index.train.push_back(pairs[i]);
  for (std::size_t i : split.test) index.test.push_back(pairs[i]);
  return index;
}

std::vector<PairPaths> scan_pair_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw IoError("not a directory: " + dir.string());
  std::map<std::string, PairPaths> by_stem;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (ext == ".ppm") by_stem[entry.path().stem().string()].ldr = entry.path();
    if (ext == ".hdr") by_stem[entry.path().stem().string()].hdr = entry.path();
  }
  std::vector<PairPaths> out;
  for (auto& [stem, p] : by_stem) {
    if (!p.ldr.empty() && !p.hdr.empty()) out.push_back(std::move(p));
  }
  return out;
}

std::vector<TrainingPair> load_pairs(const std::vector<PairPaths>& pairs, std::size_t resize,
                                     std::vector<std::string>* skipped) {
  std::vector<TrainingPair> out;
  for (const PairPaths& p : pairs) {
    try {
      LdrImage ldr = load_ppm(p.ldr);
      HdrImage hdr = load_rgbe(p.hdr);
      if (ldr.width != hdr.width || ldr.height != hdr.height) {
        throw ShapeError("LDR and HDR sizes differ");
      }
      if (resize != 0) {
        ldr = resize_bilinear(ldr, resize, resize);
        hdr = resize_bilinear(hdr, resize, resize);
      }
      out.push_back({p.ldr.string(), std::move(ldr), normalize_peak(std::move(hdr))});
    } catch (const Error& e) {
      if (!skipped) throw;
      skipped->push_back(p.ldr.string() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace arthdr
