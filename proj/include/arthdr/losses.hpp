// SPDX-License-Identifier: Apache-2.0
//
// mu-law range compression and the training objective
//   L_final = lambda1 * L_l1 + lambda2 * L_per,
// with both terms averaged over the T supervised iterations and computed
// in the mu-law (tone-mapped) domain only.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "arthdr/autodiff.hpp"

namespace arthdr {

inline constexpr double kDefaultMu = 5000.0;

struct MuLawParams {
  double mu = kDefaultMu;
};

/// log(1 + mu h) / log(1 + mu) for h in [0, 1] (1e-6 slack), else DomainError.
double mu_law(double h, double mu = kDefaultMu);
/// ((1 + mu)^y - 1) / mu.
double inverse_mu_law(double y, double mu = kDefaultMu);

template <std::floating_point T>
Tensor<T> mu_law(const Tensor<T>& h, double mu = kDefaultMu);
template <std::floating_point T>
Tensor<T> inverse_mu_law(const Tensor<T>& y, double mu = kDefaultMu);

struct LossWeights {
  double lambda1 = 0.1;
  double lambda2 = 0.5;

  void validate() const;
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

/// A tensor known to live in the mu-law domain. The loss functions accept
/// nothing else, so raw radiance cannot reach them by accident.
template <std::floating_point T>
class ToneMapped {
 public:
  /// Network output in tanh range: (raw + 1) / 2.
  static ToneMapped from_prediction(Var<T> raw);
  /// Linear radiance normalised to [0, 1], compressed with mu-law.
  static ToneMapped from_linear(Var<T> hdr, double mu);

  const Var<T>& var() const noexcept { return var_; }

 private:
  explicit ToneMapped(Var<T> v) : var_(v) {}
  Var<T> var_;
};

/// (1/T) sum_t mean |pred_t - gt|.
template <std::floating_point T>
Var<T> l1_loss(std::span<const ToneMapped<T>> predictions, const ToneMapped<T>& gt);

struct PerceptualExtractorSpec {
  std::vector<std::size_t> widths{16, 32, 32, 64, 64};
  std::vector<std::size_t> taps{1, 3};  // 0-based layer indices: after layers 2 and 4
  std::uint64_t seed = 0x5eed'ab1e'f00dULL;

  void validate() const;
  friend bool operator==(const PerceptualExtractorSpec&, const PerceptualExtractorSpec&) = default;
};

/// Fixed-weight conv/ReLU feature stack standing in for a pretrained backbone.
/// Weights are stored as float32 and never updated.
template <std::floating_point T>
class PerceptualExtractor {
 public:
  PerceptualExtractor(PerceptualExtractorSpec spec, ParameterSet<float> weights);

  /// Fan-in scaled normal weights drawn from spec.seed.
  static PerceptualExtractor generate(const PerceptualExtractorSpec& spec);

  const PerceptualExtractorSpec& spec() const noexcept { return spec_; }
  const ParameterSet<float>& weights() const noexcept { return weights_; }

  /// Features at the tap layers; throws ConfigError if H or W < 3.
  std::vector<Var<T>> features(Var<T> x) const;

 private:
  PerceptualExtractorSpec spec_;
  ParameterSet<float> weights_;
  ParameterSet<T> cast_;
};

/// (1/T) sum_t mean_taps MAE(phi(pred_t), phi(gt)).
template <std::floating_point T>
Var<T> perceptual_loss(std::span<const ToneMapped<T>> predictions, const ToneMapped<T>& gt,
                       const PerceptualExtractor<T>& extractor);

/// lambda1 * l1 + lambda2 * per.
double total_loss(double l1, double per, const LossWeights& w);

/// Graph version; a term whose weight is zero may be omitted (std::nullopt).
template <std::floating_point T>
Var<T> total_loss(std::optional<Var<T>> l1, std::optional<Var<T>> per, const LossWeights& w);

/// AHPX extractor fixture (same record layout as network checkpoints).
std::vector<std::uint8_t> encode_extractor(const PerceptualExtractorSpec& spec,
                                           const ParameterSet<float>& weights);
template <std::floating_point T>
PerceptualExtractor<T> decode_extractor(std::span<const std::uint8_t> bytes);
template <std::floating_point T>
PerceptualExtractor<T> load_extractor(const std::filesystem::path& path);

}  // namespace arthdr
