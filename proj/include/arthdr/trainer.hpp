// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "arthdr/adam.hpp"
#include "arthdr/exposure.hpp"
#include "arthdr/gradcheck.hpp"
#include "arthdr/losses.hpp"
#include "arthdr/metrics.hpp"
#include "arthdr/network.hpp"
#include "arthdr/param_file.hpp"

namespace arthdr {

inline constexpr std::uint64_t kDefaultSeed = 20240501;

struct TrainConfig {
  double learning_rate = 2e-4;
  std::size_t batch_size = 2;
  std::size_t epochs = 10;
  double decay_factor = 0.5;
  std::size_t decay_period = 50;
  std::uint64_t seed = kDefaultSeed;
  ArtHdrNetConfig net;
  LossWeights loss;
  double mu = kDefaultMu;
  std::size_t resize = 64;
  AdamHyper adam;
  float gamma = kDefaultCrfGamma;
  std::size_t checkpoint_every = 0;  // epochs; 0 writes only the final checkpoint

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Keys accepted in a config file, in the order format_train_config writes them.
const std::vector<std::string>& train_config_keys();

/// key = value per line; '#' starts a comment. Unknown keys and malformed
/// values raise ConfigError naming the line.
TrainConfig parse_train_config(std::string_view text, TrainConfig base = {});
TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base = {});
std::string format_train_config(const TrainConfig& config);

// ---- data --------------------------------------------------------------------

struct PairPaths {
  std::filesystem::path ldr;
  std::filesystem::path hdr;
  friend bool operator==(const PairPaths&, const PairPaths&) = default;
};

struct DatasetIndex {
  std::vector<PairPaths> train;
  std::vector<PairPaths> test;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded shuffle of 0..n-1, then the first 80% (rounded down) train.
/// Needs n >= 5.
SplitIndices split_indices(std::size_t n, std::uint64_t seed);
DatasetIndex split_dataset(std::vector<PairPaths> pairs, std::uint64_t seed);

/// `<stem>.ppm` files with a matching `<stem>.hdr`, sorted by stem.
std::vector<PairPaths> scan_pair_directory(const std::filesystem::path& dir);

struct TrainingPair {
  std::string name;
  LdrImage ldr;
  HdrImage hdr;  // peak-normalised to 1
};

struct SynthPair {
  LdrImage ldr;
  HdrImage hdr;
  double exposure = 1.0;  // radiance scale before clipping
  double clip_level() const { return 1.0 / exposure; }
};

/// Procedural scene (gradients, a saturating light disk, dark patches)
/// pushed through exposure, clipping, a gamma 2.2 CRF and 8-bit quantisation.
SynthPair synth_pair(std::uint64_t seed, std::size_t width, std::size_t height);
std::vector<TrainingPair> synth_dataset(std::size_t count, std::uint64_t seed, std::size_t width,
                                        std::size_t height);

/// Scales radiance so the largest component is 1 (all-zero stays zero).
HdrImage normalize_peak(HdrImage hdr);

/// Loads, resizes to resize x resize (0 keeps size) and normalises each pair.
/// Failures are recorded in `skipped` as "path: reason" and the pair dropped.
std::vector<TrainingPair> load_pairs(const std::vector<PairPaths>& pairs, std::size_t resize,
                                     std::vector<std::string>* skipped = nullptr);

// ---- optimisation ------------------------------------------------------------

struct LossTerms {
  double l1 = 0.0;
  double per = 0.0;
  double total = 0.0;
};

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double lr = 0.0;
};

void write_loss_log(std::ostream& os, const std::vector<EpochLog>& log);

class Trainer {
 public:
  /// The extractor is required only when lambda2 > 0.
  Trainer(TrainConfig config, std::optional<PerceptualExtractor<float>> extractor);

  /// Continues from a checkpoint whose network config matches.
  void resume(const Checkpoint& ckpt);

  /// Loss of a batch at the current parameters.
  LossTerms loss(std::span<const TrainingPair* const> batch);
  /// One Adam update; throws NumericalError on a non-finite loss.
  LossTerms step(std::span<const TrainingPair* const> batch, double lr);

  /// Runs the remaining epochs. `on_epoch` is called after each one.
  std::vector<EpochLog> run(const std::vector<TrainingPair>& data,
                            const std::function<void(const Trainer&, const EpochLog&)>& on_epoch = {});

  Checkpoint checkpoint() const;

  const TrainConfig& config() const noexcept { return config_; }
  ParameterSet<float>& params() noexcept { return params_; }
  const ParameterSet<float>& params() const noexcept { return params_; }
  std::uint32_t epochs_completed() const noexcept { return epochs_completed_; }

  /// Multiplies every analytic gradient before the update (test hook).
  void set_gradient_scale(float s) { grad_scale_ = s; }

 private:
  LossTerms evaluate(std::span<const TrainingPair* const> batch, bool backward);

  TrainConfig config_;
  std::optional<PerceptualExtractor<float>> extractor_;
  ParameterSet<float> params_;
  AdamState<float> adam_;
  std::uint32_t epochs_completed_ = 0;
  std::size_t batch_in_epoch_ = 0;
  float grad_scale_ = 1.0f;
};

// ---- inference and evaluation ----------------------------------------------

/// Every iteration's output in the tone-mapped domain, (raw + 1) / 2.
std::vector<RgbImage> infer_tonemapped(const ParameterSet<float>& params, const ArtHdrNetConfig& net,
                                       const LdrImage& ldr, float gamma = kDefaultCrfGamma);

/// Final-iteration linear prediction.
HdrImage infer(const ParameterSet<float>& params, const ArtHdrNetConfig& net, double mu,
               const LdrImage& ldr, float gamma = kDefaultCrfGamma);

/// Maps an LDR frame to linear radiance normalised to [0, 1].
using Predictor = std::function<HdrImage(const LdrImage&)>;

/// PSNR on mu-law images and SSIM on linear ones, per pair.
MetricsReport evaluate(const Predictor& predict, const std::vector<TrainingPair>& pairs, double mu);

/// As above, loading each pair; unreadable pairs are listed in report.skipped.
MetricsReport evaluate(const Predictor& predict, const std::vector<PairPaths>& pairs, std::size_t resize,
                       double mu);

// ---- gradient verification -------------------------------------------------

struct NetworkGradCheckOptions {
  ArtHdrNetConfig net{.channels = 8, .iterations = 2, .dilation = 3, .growth = 4};
  std::size_t width = 8;
  std::size_t height = 8;
  std::uint64_t seed = kDefaultSeed;
  LossWeights loss;
  double mu = kDefaultMu;
  double eps = 1e-5;
  double gradient_scale = 1.0;  // != 1 corrupts the analytic gradients (negative control)
};

/// float64 central-difference check of the full network and training loss
/// on one synthetic pair, for every parameter element.
GradCheckReport gradcheck_network(const NetworkGradCheckOptions& options);

}  // namespace arthdr
