// SPDX-License-Identifier: Apache-2.0
//
// Reconstruction network: feature, feedback and reconstruction units.
//
//   LDR stack ──► FU (three 3-layer branches) ──► Fe_all = Fe-2 + Fe0 + Fe+2
//                                                    │
//              ┌─────────────── t = 1..T ────────────┤
//              │  FBU(Fe_all, Fb^{t-1}) ──► Fb^t      │
//              │  Frs^t = Fe0^1 + Fe0^2 + Fb^t        │
//              └─ RU(Frs^t) ──► tanh output t         │
//
// Parameter namespace (weights are out x in x k x k, biases are out):
//
//   fu.branch{0,1,2}.conv{1,2,3}   3x3, 3->C, C->C, C->C   (branch 0: EV-2, 1: EV0, 2: EV+2)
//   fbu.fusion                     1x1, 2C->C   concat(Fe_all, Fb^{t-1}) for t > 1
//   fbu.entry                      1x1, C->C
//   fbu.block{0,1,2}.compress_in   1x1, C->g
//   fbu.block{b}.dense{0..3}       3x3 dilated, (k+1)g->g, ReLU, dense concatenation
//   fbu.block{b}.compress_out      1x1, 5g->C, plus residual add of the block input
//   fbu.exit                       3x3, C->C
//   ru.conv{1,2,3}                 3x3, C->C ReLU, C->C ReLU, C->3 tanh
//
// FBU and RU weights are shared across iterations. Every name carries a
// ".weight" and ".bias" tensor.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "arthdr/autodiff.hpp"
#include "arthdr/exposure.hpp"
#include "arthdr/image.hpp"

namespace arthdr {

struct ArtHdrNetConfig {
  std::size_t channels = 32;   // C
  std::size_t iterations = 4;  // T
  std::size_t dilation = 3;
  std::size_t growth = 16;     // g
  static constexpr std::size_t num_dilated_blocks = 3;
  static constexpr std::size_t layers_per_block = 4;
  static constexpr std::size_t input_channels = 3;
  static constexpr std::size_t output_channels = 3;
  // Ablation switches for the two parameter-free skip connections.
  bool skip_level1 = true;
  bool skip_level2 = true;

  void validate() const;
  friend bool operator==(const ArtHdrNetConfig&, const ArtHdrNetConfig&) = default;
};

struct ParamSpec {
  std::string name;
  Shape shape;
};

/// Every parameter of the network in canonical order.
std::vector<ParamSpec> param_layout(const ArtHdrNetConfig& config);

/// Closed form; see docs/formats.md.
std::size_t param_count(const ArtHdrNetConfig& config);

/// Spatial radius (pixels) over which one output pixel depends on the input.
std::size_t receptive_field_radius(const ArtHdrNetConfig& config);

inline constexpr double kResidualInitScale = 0.1;
inline constexpr double kOutputInitScale = 0.1;

/// Fan-in scaled normal weights, zero biases: std = sqrt(2 / fan_in) for
/// convs followed by a ReLU, sqrt(1 / fan_in) for linear ones. Block
/// compress_out and the final RU conv are further scaled by
/// kResidualInitScale / kOutputInitScale.
template <std::floating_point T>
ParameterSet<T> init_params(const ArtHdrNetConfig& config, std::uint64_t seed);

/// Binds parameters to a tape lazily; each parameter becomes one leaf per tape,
/// so gradients from all iterations accumulate on it.
template <std::floating_point T>
class ParamBinding {
 public:
  ParamBinding(Tape<T>& tape, ParameterSet<T>& params) : tape_(&tape), params_(&params) {}

  Var<T> operator()(std::string_view name);
  Tape<T>& tape() const { return *tape_; }

 private:
  Tape<T>* tape_;
  ParameterSet<T>* params_;
  std::unordered_map<std::string, Var<T>> bound_;
};

template <std::floating_point T>
struct FeatureTaps {
  Var<T> level1;
  Var<T> level2;
  Var<T> level3;  // the branch output Fe
};

template <std::floating_point T>
struct ForwardTrace {
  Var<T> fe_minus2;
  Var<T> fe_0;
  Var<T> fe_plus2;
  Var<T> fe_all;
  Var<T> fe0_level1;
  Var<T> fe0_level2;
  std::vector<Var<T>> fb;
  std::vector<Var<T>> frs;
  std::vector<Var<T>> outputs;  // tanh range, 3 channels

  const Var<T>& final_output() const { return outputs.back(); }
};

/// conv + bias of layer `name` (expects name.weight / name.bias).
template <std::floating_point T>
Var<T> conv_layer(ParamBinding<T>& p, Var<T> x, const std::string& name, std::size_t dilation = 1);

/// Three conv+ReLU stages of one FU branch (branch 0: EV-2, 1: EV0, 2: EV+2).
template <std::floating_point T>
FeatureTaps<T> feature_unit(ParamBinding<T>& p, Var<T> branch_input, std::size_t branch);

template <std::floating_point T>
Var<T> fuse_features(Var<T> fe_minus2, Var<T> fe_0, Var<T> fe_plus2);

/// One dilated dense block `fbu.block{block}` including its residual add.
template <std::floating_point T>
Var<T> dilated_dense_block(ParamBinding<T>& p, Var<T> x, std::size_t block,
                           const ArtHdrNetConfig& config);

/// Fb^t. `fb_prev` must be absent exactly when t == 1 (1-based).
template <std::floating_point T>
Var<T> feedback_unit(ParamBinding<T>& p, Var<T> fe_all, std::optional<Var<T>> fb_prev,
                     std::size_t t, const ArtHdrNetConfig& config);

/// Frs^t = Fe0^1 + Fe0^2 + Fb^t; disabled skips contribute nothing.
template <std::floating_point T>
Var<T> skip_merge(Var<T> fe0_level1, Var<T> fe0_level2, Var<T> fb_t, const ArtHdrNetConfig& config);

template <std::floating_point T>
Var<T> reconstruction_unit(ParamBinding<T>& p, Var<T> frs_t);

/// Full pass over N x 3 x H x W exposure tensors.
template <std::floating_point T>
ForwardTrace<T> forward(ParamBinding<T>& p, const Tensor<T>& ev_minus2, const Tensor<T>& ev_0,
                        const Tensor<T>& ev_plus2, const ArtHdrNetConfig& config);

template <std::floating_point T>
ForwardTrace<T> forward(ParamBinding<T>& p, const ExposureStack& stack, const ArtHdrNetConfig& config);

/// (x + 1) / 2 read as mu-law compressed radiance, expanded to linear [0, 1].
template <std::floating_point T>
HdrImage map_to_hdr(const Tensor<T>& raw, double mu, std::size_t n = 0);

}  // namespace arthdr
