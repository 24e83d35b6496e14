// SPDX-License-Identifier: Apache-2.0
#include "arthdr/network.hpp"

#include <cmath>
#include <random>

#include "arthdr/losses.hpp"

namespace arthdr {

void ArtHdrNetConfig::validate() const {
  if (channels < 1) throw ConfigError("channels must be >= 1");
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (dilation < 1) throw ConfigError("dilation must be >= 1");
  if (growth < 1) throw ConfigError("growth rate must be >= 1");
}

namespace {

void add_conv(std::vector<ParamSpec>& out, const std::string& name, std::size_t in, std::size_t o,
              std::size_t k) {
  out.push_back({name + ".weight", {o, in, k, k}});
  out.push_back({name + ".bias", {o}});
}

std::string block_prefix(std::size_t b) { return "fbu.block" + std::to_string(b); }

}  // namespace

std::vector<ParamSpec> param_layout(const ArtHdrNetConfig& config) {
  config.validate();
  const std::size_t C = config.channels, g = config.growth;
  std::vector<ParamSpec> out;
  for (std::size_t b = 0; b < 3; ++b) {
    const std::string prefix = "fu.branch" + std::to_string(b);
    add_conv(out, prefix + ".conv1", ArtHdrNetConfig::input_channels, C, 3);
    add_conv(out, prefix + ".conv2", C, C, 3);
    add_conv(out, prefix + ".conv3", C, C, 3);
  }
  add_conv(out, "fbu.fusion", 2 * C, C, 1);
  add_conv(out, "fbu.entry", C, C, 1);
  for (std::size_t b = 0; b < ArtHdrNetConfig::num_dilated_blocks; ++b) {
    add_conv(out, block_prefix(b) + ".compress_in", C, g, 1);
    for (std::size_t k = 0; k < ArtHdrNetConfig::layers_per_block; ++k) {
      add_conv(out, block_prefix(b) + ".dense" + std::to_string(k), (k + 1) * g, g, 3);
    }
    add_conv(out, block_prefix(b) + ".compress_out", (ArtHdrNetConfig::layers_per_block + 1) * g, C, 1);
  }
  add_conv(out, "fbu.exit", C, C, 3);
  add_conv(out, "ru.conv1", C, C, 3);
  add_conv(out, "ru.conv2", C, C, 3);
  add_conv(out, "ru.conv3", C, ArtHdrNetConfig::output_channels, 3);
  return out;
}

std::size_t param_count(const ArtHdrNetConfig& config) {
  config.validate();
  const std::size_t C = config.channels, g = config.growth;
  const std::size_t fu = 3 * ((27 * C + C) + 2 * (9 * C * C + C));
  const std::size_t fusion = 2 * C * C + C;
  const std::size_t entry = C * C + C;
  // compress_in + four dense layers (sum_{k=1..4} 9 k g^2 + g) + compress_out
  const std::size_t block = (C * g + g) + (90 * g * g + 4 * g) + (5 * g * C + C);
  const std::size_t exit = 9 * C * C + C;
  const std::size_t ru = 2 * (9 * C * C + C) + (27 * C + 3);
  return fu + fusion + entry + 3 * block + exit + ru;
}

std::size_t receptive_field_radius(const ArtHdrNetConfig& config) {
  const std::size_t fbu = ArtHdrNetConfig::num_dilated_blocks * ArtHdrNetConfig::layers_per_block *
                              config.dilation +
                          1;
  return 3 + config.iterations * fbu + 3;
}

namespace {

double init_std(const std::string& name, double fan_in) {
  const auto has = [&](std::string_view part) { return name.find(part) != std::string::npos; };
  const bool rectified = has("fu.branch") || has(".dense") || has("ru.conv1") || has("ru.conv2");
  double std = std::sqrt((rectified ? 2.0 : 1.0) / fan_in);
  if (has("compress_out")) std *= kResidualInitScale;
  if (has("ru.conv3")) std *= kOutputInitScale;
  return std;
}

}  // namespace

template <std::floating_point T>
ParameterSet<T> init_params(const ArtHdrNetConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParameterSet<T> params;
  for (const ParamSpec& spec : param_layout(config)) {
    Tensor<T> value(spec.shape);
    if (spec.shape.size() == 4) {
      const double fan_in = static_cast<double>(spec.shape[1] * spec.shape[2] * spec.shape[3]);
      std::normal_distribution<double> dist(0.0, init_std(spec.name, fan_in));
      for (T& v : value.data()) v = static_cast<T>(dist(rng));
    }
    params.add(spec.name, std::move(value));
  }
  return params;
}

template <std::floating_point T>
Var<T> ParamBinding<T>::operator()(std::string_view name) {
  auto it = bound_.find(std::string(name));
  if (it != bound_.end()) return it->second;
  Var<T> v = tape_->parameter(params_->get(name));
  bound_.emplace(std::string(name), v);
  return v;
}

template <std::floating_point T>
Var<T> conv_layer(ParamBinding<T>& p, Var<T> x, const std::string& name, std::size_t dilation) {
  return conv2d(x, p(name + ".weight"), p(name + ".bias"), dilation);
}

template <std::floating_point T>
FeatureTaps<T> feature_unit(ParamBinding<T>& p, Var<T> branch_input, std::size_t branch) {
  if (branch > 2) throw ConfigError("feature unit has branches 0..2");
  if (branch_input.value().rank() != 4 || branch_input.shape()[1] != ArtHdrNetConfig::input_channels) {
    throw ShapeError("feature unit expects an Nx3xHxW input, got " + shape_str(branch_input.shape()));
  }
  const std::string prefix = "fu.branch" + std::to_string(branch);
  FeatureTaps<T> taps;
  taps.level1 = relu(conv_layer(p, branch_input, prefix + ".conv1"));
  taps.level2 = relu(conv_layer(p, taps.level1, prefix + ".conv2"));
  taps.level3 = relu(conv_layer(p, taps.level2, prefix + ".conv3"));
  return taps;
}

template <std::floating_point T>
Var<T> fuse_features(Var<T> fe_minus2, Var<T> fe_0, Var<T> fe_plus2) {
  return add(add(fe_minus2, fe_0), fe_plus2);
}

template <std::floating_point T>
Var<T> dilated_dense_block(ParamBinding<T>& p, Var<T> x, std::size_t block,
                           const ArtHdrNetConfig& config) {
  const std::string prefix = block_prefix(block);
  Var<T> features = conv_layer(p, x, prefix + ".compress_in");
  for (std::size_t k = 0; k < ArtHdrNetConfig::layers_per_block; ++k) {
    Var<T> grown = relu(conv_layer(p, features, prefix + ".dense" + std::to_string(k), config.dilation));
    features = concat_channels(features, grown);
  }
  return add(conv_layer(p, features, prefix + ".compress_out"), x);
}

template <std::floating_point T>
Var<T> feedback_unit(ParamBinding<T>& p, Var<T> fe_all, std::optional<Var<T>> fb_prev,
                     std::size_t t, const ArtHdrNetConfig& config) {
  if (t < 1) throw ContractError("feedback iterations are numbered from 1");
  if (t == 1 && fb_prev) {
    throw ContractError("feedback unit: hidden state at t = 1 must be Fe_all only, got a previous state");
  }
  if (t > 1 && !fb_prev) {
    throw ContractError("feedback unit: t = " + std::to_string(t) + " requires the previous hidden state");
  }
  if (fe_all.shape()[1] != config.channels) {
    throw ShapeError("feedback unit expects " + std::to_string(config.channels) + " channels, got " +
                     shape_str(fe_all.shape()));
  }
  Var<T> state = fb_prev ? conv_layer(p, concat_channels(fe_all, *fb_prev), "fbu.fusion") : fe_all;
  state = conv_layer(p, state, "fbu.entry");
  for (std::size_t b = 0; b < ArtHdrNetConfig::num_dilated_blocks; ++b) {
    state = dilated_dense_block(p, state, b, config);
  }
  return conv_layer(p, state, "fbu.exit");
}

template <std::floating_point T>
Var<T> skip_merge(Var<T> fe0_level1, Var<T> fe0_level2, Var<T> fb_t, const ArtHdrNetConfig& config) {
  Var<T> out = fb_t;
  if (config.skip_level1) out = add(fe0_level1, out);
  if (config.skip_level2) out = add(fe0_level2, out);
  return out;
}

template <std::floating_point T>
Var<T> reconstruction_unit(ParamBinding<T>& p, Var<T> frs_t) {
  Var<T> h = relu(conv_layer(p, frs_t, "ru.conv1"));
  h = relu(conv_layer(p, h, "ru.conv2"));
  return tanh(conv_layer(p, h, "ru.conv3"));
}

template <std::floating_point T>
ForwardTrace<T> forward(ParamBinding<T>& p, const Tensor<T>& ev_minus2, const Tensor<T>& ev_0,
                        const Tensor<T>& ev_plus2, const ArtHdrNetConfig& config) {
  config.validate();
  if (ev_minus2.shape() != ev_0.shape() || ev_plus2.shape() != ev_0.shape()) {
    throw ShapeError("exposure stack tensors differ in shape: " + shape_str(ev_minus2.shape()) + ", " +
                     shape_str(ev_0.shape()) + ", " + shape_str(ev_plus2.shape()));
  }
  Tape<T>& tape = p.tape();
  ForwardTrace<T> trace;
  const FeatureTaps<T> m2 = feature_unit(p, tape.constant(ev_minus2), 0);
  const FeatureTaps<T> e0 = feature_unit(p, tape.constant(ev_0), 1);
  const FeatureTaps<T> p2 = feature_unit(p, tape.constant(ev_plus2), 2);
  trace.fe_minus2 = m2.level3;
  trace.fe_0 = e0.level3;
  trace.fe_plus2 = p2.level3;
  trace.fe0_level1 = e0.level1;
  trace.fe0_level2 = e0.level2;
  trace.fe_all = fuse_features(m2.level3, e0.level3, p2.level3);

  std::optional<Var<T>> hidden;
  for (std::size_t t = 1; t <= config.iterations; ++t) {
    Var<T> fb = feedback_unit(p, trace.fe_all, hidden, t, config);
    Var<T> frs = skip_merge(trace.fe0_level1, trace.fe0_level2, fb, config);
    trace.fb.push_back(fb);
    trace.frs.push_back(frs);
    trace.outputs.push_back(reconstruction_unit(p, frs));
    hidden = fb;
  }
  return trace;
}

template <std::floating_point T>
ForwardTrace<T> forward(ParamBinding<T>& p, const ExposureStack& stack, const ArtHdrNetConfig& config) {
  return forward(p, to_tensor<T>(stack.ev_minus2), to_tensor<T>(stack.ev_0), to_tensor<T>(stack.ev_plus2),
                 config);
}

template <std::floating_point T>
HdrImage map_to_hdr(const Tensor<T>& raw, double mu, std::size_t n) {
  RgbImage compressed = from_tensor(raw, n);
  HdrImage out(compressed.width, compressed.height);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    const double y = (std::clamp(static_cast<double>(compressed.pixels[i]), -1.0, 1.0) + 1.0) / 2.0;
    out.pixels[i] = static_cast<float>(inverse_mu_law(y, mu));
  }
  return out;
}

#define ARTHDR_INSTANTIATE_NET(T)                                                                  \
  template ParameterSet<T> init_params<T>(const ArtHdrNetConfig&, std::uint64_t);                  \
  template class ParamBinding<T>;                                                                  \
  template Var<T> conv_layer<T>(ParamBinding<T>&, Var<T>, const std::string&, std::size_t);        \
  template FeatureTaps<T> feature_unit<T>(ParamBinding<T>&, Var<T>, std::size_t);                  \
  template Var<T> fuse_features<T>(Var<T>, Var<T>, Var<T>);                                        \
  template Var<T> dilated_dense_block<T>(ParamBinding<T>&, Var<T>, std::size_t, const ArtHdrNetConfig&); \
  template Var<T> feedback_unit<T>(ParamBinding<T>&, Var<T>, std::optional<Var<T>>, std::size_t,  \
                                   const ArtHdrNetConfig&);                                        \
  template Var<T> skip_merge<T>(Var<T>, Var<T>, Var<T>, const ArtHdrNetConfig&);                   \
  template Var<T> reconstruction_unit<T>(ParamBinding<T>&, Var<T>);                                \
  template ForwardTrace<T> forward<T>(ParamBinding<T>&, const Tensor<T>&, const Tensor<T>&,        \
                                      const Tensor<T>&, const ArtHdrNetConfig&);                   \
  template ForwardTrace<T> forward<T>(ParamBinding<T>&, const ExposureStack&, const ArtHdrNetConfig&); \
  template HdrImage map_to_hdr<T>(const Tensor<T>&, double, std::size_t);

ARTHDR_INSTANTIATE_NET(float)
ARTHDR_INSTANTIATE_NET(double)

#undef ARTHDR_INSTANTIATE_NET

}  // namespace arthdr
