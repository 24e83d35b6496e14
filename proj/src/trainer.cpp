// SPDX-License-Identifier: Apache-2.0
#include "arthdr/trainer.hpp"

#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "arthdr/hdr_io.hpp"

namespace arthdr {

void write_loss_log(std::ostream& os, const std::vector<EpochLog>& log) {
  const auto old = os.precision(17);
  os << "epoch,mean_loss,lr\n";
  for (const EpochLog& e : log) os << e.epoch << ',' << e.mean_loss << ',' << e.lr << '\n';
  os.precision(old);
}

namespace {

struct BatchTensors {
  Tensor<float> ev_minus2, ev_0, ev_plus2, gt;
};

BatchTensors prepare_batch(std::span<const TrainingPair* const> batch, float gamma) {
  if (batch.empty()) throw ContractError("empty batch");
  std::vector<ExposureStack> stacks;
  stacks.reserve(batch.size());
  for (const TrainingPair* p : batch) stacks.push_back(bracket(p->ldr, gamma));
  std::vector<const RgbImage*> m2, e0, p2, gt;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    m2.push_back(&stacks[i].ev_minus2);
    e0.push_back(&stacks[i].ev_0);
    p2.push_back(&stacks[i].ev_plus2);
    gt.push_back(&batch[i]->hdr);
  }
  return {to_batch<float>(m2), to_batch<float>(e0), to_batch<float>(p2), to_batch<float>(gt)};
}

std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (epoch + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

RgbImage mu_law_image(const RgbImage& linear, double mu) {
  RgbImage out(linear.width, linear.height);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    out.pixels[i] = static_cast<float>(mu_law(static_cast<double>(linear.pixels[i]), mu));
  }
  return out;
}

}  // namespace

Trainer::Trainer(TrainConfig config, std::optional<PerceptualExtractor<float>> extractor)
    : config_(std::move(config)), extractor_(std::move(extractor)) {
  config_.validate();
  if (config_.loss.lambda2 > 0.0 && !extractor_) {
    throw ConfigError("perceptual loss enabled but no feature extractor supplied");
  }
  params_ = init_params<float>(config_.net, config_.seed);
  adam_ = AdamState<float>::zeros_like(params_);
}

void Trainer::resume(const Checkpoint& ckpt) {
  if (!(ckpt.net == config_.net)) throw ConfigError("checkpoint network config differs from the training config");
  params_ = ParameterSet<float>();
  for (const auto& p : ckpt.params) params_.add(p.name, p.value);
  adam_ = ckpt.optimizer ? *ckpt.optimizer : AdamState<float>::zeros_like(params_);
  epochs_completed_ = ckpt.epochs_completed;
}

LossTerms Trainer::evaluate(std::span<const TrainingPair* const> batch, bool backward) {
  const BatchTensors b = prepare_batch(batch, config_.gamma);
  Tape<float> tape;
  ParamBinding<float> bind(tape, params_);
  const ForwardTrace<float> trace = forward(bind, b.ev_minus2, b.ev_0, b.ev_plus2, config_.net);
  const auto gt = ToneMapped<float>::from_linear(tape.constant(b.gt), config_.mu);
  std::vector<ToneMapped<float>> preds;
  for (const Var<float>& out : trace.outputs) preds.push_back(ToneMapped<float>::from_prediction(out));

  std::optional<Var<float>> l1, per;
  if (config_.loss.lambda1 > 0.0) l1 = l1_loss<float>(preds, gt);
  if (config_.loss.lambda2 > 0.0) per = perceptual_loss<float>(preds, gt, *extractor_);
  const Var<float> total = total_loss(l1, per, config_.loss);

  LossTerms terms;
  terms.l1 = l1 ? static_cast<double>(l1->value()[0]) : 0.0;
  terms.per = per ? static_cast<double>(per->value()[0]) : 0.0;
  terms.total = static_cast<double>(total.value()[0]);
  if (!std::isfinite(terms.total)) {
    std::ostringstream msg;
    msg << "non-finite loss at epoch " << epochs_completed_ << ", batch " << batch_in_epoch_
        << " (l1 = " << terms.l1 << ", per = " << terms.per << ", total = " << terms.total << ")";
    throw NumericalError(msg.str());
  }
  if (backward) {
    params_.zero_grad();
    tape.backward(total);
    if (grad_scale_ != 1.0f) {
      for (auto& p : params_) {
        for (float& g : p.grad.data()) g *= grad_scale_;
      }
    }
  }
  return terms;
}

LossTerms Trainer::loss(std::span<const TrainingPair* const> batch) { return evaluate(batch, false); }

LossTerms Trainer::step(std::span<const TrainingPair* const> batch, double lr) {
  const LossTerms terms = evaluate(batch, true);
  adam_step(params_, adam_, lr, config_.adam);
  return terms;
}

std::vector<EpochLog> Trainer::run(const std::vector<TrainingPair>& data,
                                   const std::function<void(const Trainer&, const EpochLog&)>& on_epoch) {
  if (data.empty()) throw ConfigError("training set is empty");
  std::vector<EpochLog> log;
  for (std::size_t epoch = epochs_completed_; epoch < config_.epochs; ++epoch) {
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(epoch_seed(config_.seed, epoch));
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng() % (i + 1)]);

    const double lr = lr_schedule(config_.learning_rate, epoch, config_.decay_factor, config_.decay_period);
    double sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
      std::vector<const TrainingPair*> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + config_.batch_size); ++i) {
        batch.push_back(&data[order[i]]);
      }
      batch_in_epoch_ = batches;
      sum += step(batch, lr).total;
      ++batches;
    }
    epochs_completed_ = static_cast<std::uint32_t>(epoch + 1);
    log.push_back({epoch, sum / static_cast<double>(batches), lr});
    if (on_epoch) on_epoch(*this, log.back());
  }
  return log;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ckpt;
  ckpt.net = config_.net;
  ckpt.mu = config_.mu;
  ckpt.epochs_completed = epochs_completed_;
  for (const auto& p : params_) ckpt.params.add(p.name, p.value);
  ckpt.optimizer = adam_;
  return ckpt;
}

std::vector<RgbImage> infer_tonemapped(const ParameterSet<float>& params, const ArtHdrNetConfig& net,
                                       const LdrImage& ldr, float gamma) {
  validate(ldr);
  ParameterSet<float> local;
  for (const auto& p : params) local.add(p.name, p.value);
  const ExposureStack stack = bracket(ldr, gamma);
  Tape<float> tape;
  ParamBinding<float> bind(tape, local);
  const ForwardTrace<float> trace = forward(bind, stack, net);
  std::vector<RgbImage> out;
  for (const Var<float>& raw : trace.outputs) {
    RgbImage img = from_tensor(raw.value());
    for (float& v : img.pixels) v = std::clamp(0.5f * v + 0.5f, 0.0f, 1.0f);
    out.push_back(std::move(img));
  }
  return out;
}

HdrImage infer(const ParameterSet<float>& params, const ArtHdrNetConfig& net, double mu, const LdrImage& ldr,
               float gamma) {
  const RgbImage tm = infer_tonemapped(params, net, ldr, gamma).back();
  HdrImage out(tm.width, tm.height);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    out.pixels[i] = static_cast<float>(inverse_mu_law(static_cast<double>(tm.pixels[i]), mu));
  }
  return out;
}

MetricsReport evaluate(const Predictor& predict, const std::vector<TrainingPair>& pairs, double mu) {
  MetricsReport report;
  for (const TrainingPair& p : pairs) {
    const HdrImage pred = predict(p.ldr);
    MetricsRow row;
    row.path = p.name;
    row.psnr_db = psnr(mu_law_image(pred, mu), mu_law_image(p.hdr, mu));
    row.ssim = ssim(pred, p.hdr);
    report.rows.push_back(std::move(row));
  }
  return report;
}

MetricsReport evaluate(const Predictor& predict, const std::vector<PairPaths>& pairs, std::size_t resize,
                       double mu) {
  std::vector<std::string> skipped;
  std::vector<TrainingPair> loaded = load_pairs(pairs, resize, &skipped);
  MetricsReport report = evaluate(predict, loaded, mu);
  report.skipped = std::move(skipped);
  return report;
}

}  // namespace arthdr

namespace arthdr {

GradCheckReport gradcheck_network(const NetworkGradCheckOptions& o) {
  o.net.validate();
  const SynthPair pair = synth_pair(o.seed, o.width, o.height);
  const ExposureStack stack = bracket(pair.ldr, kDefaultCrfGamma);
  const Tensor<double> m2 = to_tensor<double>(stack.ev_minus2);
  const Tensor<double> e0 = to_tensor<double>(stack.ev_0);
  const Tensor<double> p2 = to_tensor<double>(stack.ev_plus2);
  const Tensor<double> gt_linear = to_tensor<double>(pair.hdr);
  const auto extractor = PerceptualExtractor<double>::generate(PerceptualExtractorSpec{});
  ParameterSet<double> params = init_params<double>(o.net, o.seed);

  auto run = [&](bool backward) -> LossProbe {
    Tape<double> tape;
    ParamBinding<double> bind(tape, params);
    const ForwardTrace<double> trace = forward(bind, m2, e0, p2, o.net);
    const auto gt = ToneMapped<double>::from_linear(tape.constant(gt_linear), o.mu);
    std::vector<ToneMapped<double>> preds;
    for (const Var<double>& out : trace.outputs) preds.push_back(ToneMapped<double>::from_prediction(out));
    std::optional<Var<double>> l1, per;
    if (o.loss.lambda1 > 0.0) l1 = l1_loss<double>(preds, gt);
    if (o.loss.lambda2 > 0.0) per = perceptual_loss<double>(preds, gt, extractor);
    const Var<double> total = total_loss(l1, per, o.loss);
    if (backward) {
      params.zero_grad();
      tape.backward(total);
      for (auto& p : params) {
        for (double& g : p.grad.data()) g *= o.gradient_scale;
      }
    }
    return {total.value()[0], tape.kink_signature()};
  };
  return check_parameter_gradients(
      params, [&] { run(true); }, std::function<LossProbe()>([&] { return run(false); }), o.eps);
}

}  // namespace arthdr
