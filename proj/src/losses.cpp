// SPDX-License-Identifier: Apache-2.0
#include "arthdr/losses.hpp"

#include <cmath>
#include <random>

#include "arthdr/hdr_io.hpp"
#include "arthdr/param_file.hpp"

namespace arthdr {

double mu_law(double h, double mu) {
  if (!(mu > 0.0)) throw DomainError("mu must be positive");
  if (!(h >= -1e-6 && h <= 1.0 + 1e-6)) {
    throw DomainError("mu-law input " + std::to_string(h) + " outside [0, 1]");
  }
  h = std::clamp(h, 0.0, 1.0);
  return std::log1p(mu * h) / std::log1p(mu);
}

double inverse_mu_law(double y, double mu) {
  if (!(mu > 0.0)) throw DomainError("mu must be positive");
  return std::expm1(y * std::log1p(mu)) / mu;
}

template <std::floating_point T>
Tensor<T> mu_law(const Tensor<T>& h, double mu) {
  Tensor<T> out(h.shape());
  for (std::size_t i = 0; i < h.size(); ++i) out.data()[i] = static_cast<T>(mu_law(static_cast<double>(h.data()[i]), mu));
  return out;
}

template <std::floating_point T>
Tensor<T> inverse_mu_law(const Tensor<T>& y, double mu) {
  Tensor<T> out(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    out.data()[i] = static_cast<T>(inverse_mu_law(static_cast<double>(y.data()[i]), mu));
  }
  return out;
}

void LossWeights::validate() const {
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw ConfigError("loss weights must be non-negative");
  if (lambda1 == 0.0 && lambda2 == 0.0) throw ConfigError("at least one loss term must be enabled");
}

template <std::floating_point T>
ToneMapped<T> ToneMapped<T>::from_prediction(Var<T> raw) {
  return ToneMapped(affine(raw, T{0.5}, T{0.5}));
}

template <std::floating_point T>
ToneMapped<T> ToneMapped<T>::from_linear(Var<T> hdr, double mu) {
  return ToneMapped(mu_law(hdr, static_cast<T>(mu)));
}

template <std::floating_point T>
Var<T> l1_loss(std::span<const ToneMapped<T>> predictions, const ToneMapped<T>& gt) {
  if (predictions.empty()) throw ContractError("l1_loss needs at least one prediction");
  Var<T> acc = mean_abs_error(predictions[0].var(), gt.var());
  for (std::size_t t = 1; t < predictions.size(); ++t) acc = add(acc, mean_abs_error(predictions[t].var(), gt.var()));
  return affine(acc, static_cast<T>(1.0 / static_cast<double>(predictions.size())));
}

void PerceptualExtractorSpec::validate() const {
  if (widths.empty()) throw ConfigError("perceptual extractor needs at least one layer");
  for (std::size_t w : widths) {
    if (w == 0) throw ConfigError("perceptual extractor layer width must be >= 1");
  }
  if (taps.empty()) throw ConfigError("perceptual extractor needs at least one tap");
  for (std::size_t i = 0; i < taps.size(); ++i) {
    if (taps[i] >= widths.size()) throw ConfigError("perceptual tap index out of range");
    if (i > 0 && taps[i] <= taps[i - 1]) throw ConfigError("perceptual taps must be strictly increasing");
  }
}

namespace {

std::string layer_name(std::size_t k) { return "layer" + std::to_string(k); }

void check_extractor_weights(const PerceptualExtractorSpec& spec, const ParameterSet<float>& w) {
  if (w.size() != 2 * spec.widths.size()) {
    throw FormatError("extractor holds " + std::to_string(w.size()) + " tensors, spec implies " +
                          std::to_string(2 * spec.widths.size()),
                      0);
  }
  std::size_t in = 3;
  for (std::size_t k = 0; k < spec.widths.size(); ++k) {
    const Shape ws{spec.widths[k], in, 3, 3};
    const Shape bs{spec.widths[k]};
    const auto& wp = w[2 * k];
    const auto& bp = w[2 * k + 1];
    if (wp.name != layer_name(k) + ".weight" || wp.value.shape() != ws || bp.name != layer_name(k) + ".bias" ||
        bp.value.shape() != bs) {
      throw FormatError("extractor layer " + std::to_string(k) + " does not match its spec", 0);
    }
    in = spec.widths[k];
  }
}

}  // namespace

template <std::floating_point T>
PerceptualExtractor<T>::PerceptualExtractor(PerceptualExtractorSpec spec, ParameterSet<float> weights)
    : spec_(std::move(spec)), weights_(std::move(weights)) {
  spec_.validate();
  check_extractor_weights(spec_, weights_);
  cast_ = weights_.template cast<T>();
}

template <std::floating_point T>
PerceptualExtractor<T> PerceptualExtractor<T>::generate(const PerceptualExtractorSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  ParameterSet<float> w;
  std::size_t in = 3;
  for (std::size_t k = 0; k < spec.widths.size(); ++k) {
    Tensor<float> weight({spec.widths[k], in, 3, 3});
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(in * 9)));
    for (float& v : weight.data()) v = static_cast<float>(dist(rng));
    w.add(layer_name(k) + ".weight", std::move(weight));
    w.add(layer_name(k) + ".bias", Tensor<float>({spec.widths[k]}));
    in = spec.widths[k];
  }
  return PerceptualExtractor(spec, std::move(w));
}

template <std::floating_point T>
std::vector<Var<T>> PerceptualExtractor<T>::features(Var<T> x) const {
  const Shape& s = x.shape();
  if (s.size() != 4 || s[1] != 3) throw ShapeError("perceptual extractor expects Nx3xHxW, got " + shape_str(s));
  if (s[2] < 3 || s[3] < 3) {
    throw ConfigError("perceptual extractor needs H, W >= 3, got " + shape_str(s));
  }
  Tape<T>& tape = x.tape();
  std::vector<Var<T>> out;
  Var<T> h = x;
  std::size_t next_tap = 0;
  for (std::size_t k = 0; k < spec_.widths.size() && next_tap < spec_.taps.size(); ++k) {
    h = relu(conv2d(h, tape.constant(cast_[2 * k].value), tape.constant(cast_[2 * k + 1].value), 1));
    if (spec_.taps[next_tap] == k) {
      out.push_back(h);
      ++next_tap;
    }
  }
  return out;
}

template <std::floating_point T>
Var<T> perceptual_loss(std::span<const ToneMapped<T>> predictions, const ToneMapped<T>& gt,
                       const PerceptualExtractor<T>& extractor) {
  if (predictions.empty()) throw ContractError("perceptual_loss needs at least one prediction");
  const std::vector<Var<T>> target = extractor.features(gt.var());
  std::optional<Var<T>> acc;
  for (const ToneMapped<T>& p : predictions) {
    const std::vector<Var<T>> f = extractor.features(p.var());
    for (std::size_t k = 0; k < f.size(); ++k) {
      Var<T> term = mean_abs_error(f[k], target[k]);
      acc = acc ? add(*acc, term) : term;
    }
  }
  const double norm = static_cast<double>(predictions.size() * target.size());
  return affine(*acc, static_cast<T>(1.0 / norm));
}

double total_loss(double l1, double per, const LossWeights& w) { return w.lambda1 * l1 + w.lambda2 * per; }

template <std::floating_point T>
Var<T> total_loss(std::optional<Var<T>> l1, std::optional<Var<T>> per, const LossWeights& w) {
  std::optional<Var<T>> out;
  if (l1 && w.lambda1 != 0.0) out = affine(*l1, static_cast<T>(w.lambda1));
  if (per && w.lambda2 != 0.0) {
    Var<T> term = affine(*per, static_cast<T>(w.lambda2));
    out = out ? add(*out, term) : term;
  }
  if (!out) throw ConfigError("total loss has no enabled terms");
  return *out;
}

inline constexpr std::uint32_t kExtractorVersion = 1;

std::vector<std::uint8_t> encode_extractor(const PerceptualExtractorSpec& spec,
                                           const ParameterSet<float>& weights) {
  spec.validate();
  check_extractor_weights(spec, weights);
  ByteWriter c;
  c.u32(static_cast<std::uint32_t>(spec.widths.size()));
  for (std::size_t w : spec.widths) c.u32(static_cast<std::uint32_t>(w));
  c.u32(static_cast<std::uint32_t>(spec.taps.size()));
  for (std::size_t t : spec.taps) c.u32(static_cast<std::uint32_t>(t));
  c.u64(spec.seed);
  return encode_param_file("AHPX", kExtractorVersion, c.bytes(), weights);
}

template <std::floating_point T>
PerceptualExtractor<T> decode_extractor(std::span<const std::uint8_t> bytes) {
  ParamFile file = decode_param_file(bytes, "AHPX");
  if (file.version != kExtractorVersion) {
    throw FormatError("unsupported extractor version " + std::to_string(file.version), 4);
  }
  ByteReader c(file.config);
  PerceptualExtractorSpec spec;
  const std::uint32_t layers = c.u32("layer count");
  if (layers == 0 || layers > 64) throw FormatError("invalid extractor layer count", 12);
  spec.widths.clear();
  for (std::uint32_t k = 0; k < layers; ++k) spec.widths.push_back(c.u32("layer width"));
  const std::uint32_t taps = c.u32("tap count");
  if (taps == 0 || taps > layers) throw FormatError("invalid extractor tap count", 12 + c.pos());
  spec.taps.clear();
  for (std::uint32_t k = 0; k < taps; ++k) spec.taps.push_back(c.u32("tap index"));
  spec.seed = c.u64("seed");
  if (c.remaining() != 0) throw FormatError("oversized extractor config block", 12 + c.pos());
  try {
    spec.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid extractor spec: ") + e.what(), 12);
  }
  return PerceptualExtractor<T>(std::move(spec), std::move(file.params));
}

template <std::floating_point T>
PerceptualExtractor<T> load_extractor(const std::filesystem::path& path) {
  return decode_extractor<T>(read_file(path));
}

#define ARTHDR_INSTANTIATE_LOSSES(T)                                                                   \
  template Tensor<T> mu_law<T>(const Tensor<T>&, double);                                              \
  template Tensor<T> inverse_mu_law<T>(const Tensor<T>&, double);                                      \
  template class ToneMapped<T>;                                                                        \
  template Var<T> l1_loss<T>(std::span<const ToneMapped<T>>, const ToneMapped<T>&);                    \
  template class PerceptualExtractor<T>;                                                               \
  template Var<T> perceptual_loss<T>(std::span<const ToneMapped<T>>, const ToneMapped<T>&,             \
                                     const PerceptualExtractor<T>&);                                   \
  template Var<T> total_loss<T>(std::optional<Var<T>>, std::optional<Var<T>>, const LossWeights&);     \
  template PerceptualExtractor<T> decode_extractor<T>(std::span<const std::uint8_t>);                  \
  template PerceptualExtractor<T> load_extractor<T>(const std::filesystem::path&);

ARTHDR_INSTANTIATE_LOSSES(float)
ARTHDR_INSTANTIATE_LOSSES(double)

#undef ARTHDR_INSTANTIATE_LOSSES

}  // namespace arthdr
