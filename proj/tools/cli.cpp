// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "arthdr/hdr_io.hpp"
#include "arthdr/tonemap.hpp"
#include "arthdr/trainer.hpp"

namespace arthdr::cli {

namespace fs = std::filesystem;

struct Options {
  // shared
  std::uint64_t seed = kDefaultSeed;
  float gamma = kDefaultCrfGamma;
  std::string extractor;

  // train
  std::string config;
  std::string data;
  std::size_t synth = 0;
  std::string out;
  std::string log;
  std::string resume;
  std::size_t nan_after_epoch = 0;

  // infer / eval
  std::string ckpt;
  std::string input;
  std::string trace_dir;
  std::string report;
  std::size_t resize = 64;
  bool all = false;

  // bracket / tonemap / convert
  std::string prefix;
  double key = 0.18;
  double delta = 1e-6;
  double white = 0.0;

  // gradcheck
  std::string size = "8x8";
  std::size_t channels = 8;
  std::size_t iters = 2;
  std::size_t growth = 4;
  double corrupt_backward = 1.0;

  // ablate
  bool no_skip1 = false;
  bool no_skip2 = false;
  bool no_l1 = false;
  bool no_lper = false;
  std::string manifest;
  bool step = false;
  std::size_t step_size = 16;

  // synth
  std::size_t count = 10;
};

namespace {

std::uint64_t default_seed() {
  if (const char* env = std::getenv("ARTHDR_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw ConfigError(std::string("ARTHDR_SEED is not an unsigned integer: ") + env);
    }
  }
  return kDefaultSeed;
}

PerceptualExtractor<float> extractor_for(const Options& o) {
  if (o.extractor.empty()) return PerceptualExtractor<float>::generate(PerceptualExtractorSpec{});
  return load_extractor<float>(o.extractor);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

std::vector<TrainingPair> select(const std::vector<TrainingPair>& all, const std::vector<std::size_t>& idx) {
  std::vector<TrainingPair> out;
  for (std::size_t i : idx) out.push_back(all[i]);
  return out;
}

std::vector<TrainingPair> synth_split(std::size_t n, std::uint64_t seed, std::size_t extent, bool train) {
  std::vector<TrainingPair> all = synth_dataset(n, seed, extent, extent);
  if (n < 5) return all;
  const SplitIndices split = split_indices(n, seed);
  return select(all, train ? split.train : split.test);
}

int cmd_train(const Options& o, bool seed_given, std::ostream& out, std::ostream& err) {
  TrainConfig base;
  base.seed = default_seed();
  TrainConfig cfg = load_train_config(o.config, base);
  if (seed_given) cfg.seed = o.seed;
  if (o.data.empty() == (o.synth == 0)) {
    throw ConfigError("train needs exactly one of --data DIR or --synth N");
  }

  std::vector<TrainingPair> train_set;
  if (o.synth > 0) {
    train_set = synth_split(o.synth, cfg.seed, cfg.resize == 0 ? 64 : cfg.resize, true);
  } else {
    const std::vector<PairPaths> pairs = scan_pair_directory(o.data);
    const DatasetIndex index = split_dataset(pairs, cfg.seed);
    std::vector<std::string> skipped;
    train_set = load_pairs(index.train, cfg.resize, &skipped);
    for (const std::string& s : skipped) err << "skipped " << s << '\n';
    if (train_set.empty()) throw IoError("no readable training pairs in " + o.data);
  }

  std::optional<PerceptualExtractor<float>> extractor;
  if (cfg.loss.lambda2 > 0.0) extractor = extractor_for(o);
  Trainer trainer(cfg, std::move(extractor));
  if (!o.resume.empty()) trainer.resume(load_checkpoint(o.resume));

  const fs::path ckpt_path = o.out;
  const fs::path log_path = o.log.empty() ? fs::path(o.out + ".loss.csv") : fs::path(o.log);
  auto on_epoch = [&](const Trainer& t, const EpochLog& e) {
    out << "epoch " << e.epoch << " loss " << std::setprecision(8) << e.mean_loss << " lr " << e.lr << '\n';
    if (cfg.checkpoint_every > 0 && t.epochs_completed() % cfg.checkpoint_every == 0) {
      save_checkpoint(ckpt_path, t.checkpoint());
    }
    if (o.nan_after_epoch > 0 && t.epochs_completed() == o.nan_after_epoch) {
      auto& p = const_cast<Trainer&>(t).params()[0];
      p.value.data()[0] = std::numeric_limits<float>::quiet_NaN();
    }
  };
  const std::vector<EpochLog> log = trainer.run(train_set, on_epoch);
  save_checkpoint(ckpt_path, trainer.checkpoint());
  std::ostringstream csv;
  write_loss_log(csv, log);
  write_text(log_path, csv.str());
  out << "wrote " << ckpt_path.string() << " and " << log_path.string() << '\n';
  return kOk;
}

int cmd_infer(const Options& o, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(o.ckpt);
  const LdrImage ldr = load_ppm(o.input);
  const std::vector<RgbImage> tms = infer_tonemapped(ckpt.params, ckpt.net, ldr, o.gamma);
  auto expand = [&](const RgbImage& tm) {
    HdrImage hdr(tm.width, tm.height);
    for (std::size_t i = 0; i < hdr.pixels.size(); ++i) {
      hdr.pixels[i] = static_cast<float>(inverse_mu_law(static_cast<double>(tm.pixels[i]), ckpt.mu));
    }
    return hdr;
  };
  save_hdr(o.out, expand(tms.back()));
  if (!o.trace_dir.empty()) {
    fs::create_directories(o.trace_dir);
    for (std::size_t t = 0; t < tms.size(); ++t) {
      save_rgbe(fs::path(o.trace_dir) / ("iter" + std::to_string(t + 1) + ".hdr"), expand(tms[t]));
    }
  }
  out << "wrote " << o.out << '\n';
  return kOk;
}

int cmd_eval(const Options& o, bool seed_given, std::ostream& out, std::ostream& err) {
  const Checkpoint ckpt = load_checkpoint(o.ckpt);
  const std::uint64_t seed = seed_given ? o.seed : default_seed();
  if (o.data.empty() == (o.synth == 0)) throw ConfigError("eval needs exactly one of --data DIR or --synth N");
  Predictor predict = [&](const LdrImage& ldr) { return infer(ckpt.params, ckpt.net, ckpt.mu, ldr, o.gamma); };

  MetricsReport report;
  if (o.synth > 0) {
    const auto pairs = o.all ? synth_dataset(o.synth, seed, o.resize, o.resize)
                             : synth_split(o.synth, seed, o.resize, false);
    report = evaluate(predict, pairs, ckpt.mu);
  } else {
    std::vector<PairPaths> pairs = scan_pair_directory(o.data);
    if (!o.all) pairs = split_dataset(pairs, seed).test;
    report = evaluate(predict, pairs, o.resize, ckpt.mu);
  }
  std::ostringstream csv;
  write_report_csv(csv, report);
  if (o.report.empty()) {
    out << csv.str();
  } else {
    write_text(o.report, csv.str());
  }
  if (!report.skipped.empty()) {
    err << report.skipped.size() << " pair(s) skipped:\n";
    for (const std::string& s : report.skipped) err << "  " << s << '\n';
    return kData;
  }
  return kOk;
}

int cmd_bracket(const Options& o, std::ostream& out) {
  const ExposureStack s = bracket(load_ppm(o.input), o.gamma);
  save_ppm(o.prefix + "m2.ppm", s.ev_minus2);
  save_ppm(o.prefix + "0.ppm", s.ev_0);
  save_ppm(o.prefix + "p2.ppm", s.ev_plus2);
  out << "wrote " << o.prefix << "{m2,0,p2}.ppm\n";
  return kOk;
}

int cmd_tonemap(const Options& o, std::ostream& out) {
  ReinhardParams p;
  p.key = o.key;
  p.delta = o.delta;
  if (o.white > 0.0) p.white = o.white;
  save_ppm(o.out, reinhard(load_hdr(o.input), p));
  out << "wrote " << o.out << '\n';
  return kOk;
}

int cmd_convert(const Options& o, std::ostream& out) {
  save_hdr(o.out, load_hdr(o.input));
  out << "wrote " << o.out << '\n';
  return kOk;
}

std::pair<std::size_t, std::size_t> parse_size(const std::string& s) {
  const auto x = s.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    std::size_t used = 0;
    const std::size_t h = std::stoul(s.substr(0, x), &used);
    if (used != x) throw std::invalid_argument(s);
    const std::string rest = s.substr(x + 1);
    const std::size_t w = std::stoul(rest, &used);
    if (used != rest.size()) throw std::invalid_argument(s);
    return {h, w};
  } catch (const std::logic_error&) {
    throw ConfigError("--size expects HxW, got '" + s + "'");
  }
}

int cmd_gradcheck(const Options& o, bool seed_given, std::ostream& out) {
  NetworkGradCheckOptions g;
  std::tie(g.height, g.width) = parse_size(o.size);
  if (g.height < 8 || g.width < 8) throw ConfigError("gradcheck needs extents >= 8");
  g.net.channels = o.channels;
  g.net.iterations = o.iters;
  g.net.growth = o.growth;
  g.seed = seed_given ? o.seed : default_seed();
  g.gradient_scale = o.corrupt_backward;
  const GradCheckReport report = gradcheck_network(g);
  out << std::setprecision(3) << std::scientific;
  for (const GradCheckEntry& e : report.entries) {
    out << e.name << ' ' << e.elements << ' ' << e.max_rel_error << '\n';
  }
  out << "max relative error " << report.max_rel_error << '\n';
  out << "max absolute difference " << report.max_abs_diff << '\n';
  if (!report.passed(1e-4)) {
    out << "FAIL\n";
    return kNumerical;
  }
  out << "PASS\n";
  return kOk;
}

int cmd_ablate(const Options& o, bool seed_given, std::ostream& out) {
  TrainConfig base;
  base.seed = default_seed();
  TrainConfig cfg = o.config.empty() ? base : load_train_config(o.config, base);
  if (seed_given) cfg.seed = o.seed;
  if (o.no_skip1) cfg.net.skip_level1 = false;
  if (o.no_skip2) cfg.net.skip_level2 = false;
  if (o.no_l1) cfg.loss.lambda1 = 0.0;
  if (o.no_lper) cfg.loss.lambda2 = 0.0;
  if (cfg.loss.lambda1 == 0.0 && cfg.loss.lambda2 == 0.0) {
    throw ConfigError("--no-l1 and --no-lper together leave no loss term");
  }
  cfg.validate();

  std::ostringstream m;
  m << "skip_connections = " << (cfg.net.skip_level1 ? "level1" : "")
    << (cfg.net.skip_level1 && cfg.net.skip_level2 ? "+" : "") << (cfg.net.skip_level2 ? "level2" : "")
    << (!cfg.net.skip_level1 && !cfg.net.skip_level2 ? "none" : "") << '\n';
  m << "loss_terms = " << (cfg.loss.lambda1 > 0.0 ? "l1" : "")
    << (cfg.loss.lambda1 > 0.0 && cfg.loss.lambda2 > 0.0 ? "+" : "") << (cfg.loss.lambda2 > 0.0 ? "perceptual" : "")
    << '\n';
  m << format_train_config(cfg);
  if (o.step) {
    std::optional<PerceptualExtractor<float>> extractor;
    if (cfg.loss.lambda2 > 0.0) extractor = extractor_for(o);
    Trainer trainer(cfg, std::move(extractor));
    const SynthPair sp = synth_pair(cfg.seed, o.step_size, o.step_size);
    const TrainingPair pair{"synth", sp.ldr, sp.hdr};
    const TrainingPair* batch[] = {&pair};
    const LossTerms before = trainer.step(batch, cfg.learning_rate);
    const LossTerms after = trainer.loss(batch);
    m << std::setprecision(17);
    m << "step_loss_l1 = " << before.l1 << '\n'
      << "step_loss_per = " << before.per << '\n'
      << "step_loss_total = " << before.total << '\n'
      << "after_step_loss_total = " << after.total << '\n';
  }
  if (o.manifest.empty()) {
    out << m.str();
  } else {
    write_text(o.manifest, m.str());
    out << "wrote " << o.manifest << '\n';
  }
  return kOk;
}

int cmd_synth(const Options& o, bool seed_given, std::ostream& out) {
  const std::uint64_t seed = seed_given ? o.seed : default_seed();
  fs::create_directories(o.out);
  const auto pairs = synth_dataset(o.count, seed, o.resize, o.resize);
  for (const TrainingPair& p : pairs) {
    save_ppm(fs::path(o.out) / (p.name + ".ppm"), p.ldr);
    save_rgbe(fs::path(o.out) / (p.name + ".hdr"), p.hdr);
  }
  out << "wrote " << pairs.size() << " pairs to " << o.out << '\n';
  return kOk;
}

int exit_code_for(const Error& e) {
  if (dynamic_cast<const NumericalError*>(&e)) return kNumerical;
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ContractError*>(&e)) return kUsage;
  return kData;
}

}  // namespace

Cli::Cli() : app_(std::make_unique<CLI::App>("HDR reconstruction from a single LDR frame", "arthdr")),
             opts_(std::make_unique<Options>()) {
  CLI::App& app = *app_;
  Options& o = *opts_;
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand help for every subcommand");

  auto seed_opt = [&o](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "Random seed (default: $ARTHDR_SEED or built-in)");
  };

  CLI::App* train = app.add_subcommand("train", "Train a network and write a checkpoint plus loss log");
  train->add_option("--config", o.config, "key = value training config file")
      ->required()
      ->check(CLI::ExistingFile);
  train->add_option("--data", o.data, "Directory of <stem>.ppm / <stem>.hdr pairs");
  train->add_option("--synth", o.synth, "Train on N synthetic pairs instead of --data");
  train->add_option("--out", o.out, "Checkpoint output path")->required();
  train->add_option("--log", o.log, "Loss log CSV (default: <out>.loss.csv)");
  train->add_option("--resume", o.resume, "Continue from this checkpoint");
  train->add_option("--extractor", o.extractor, "Perceptual extractor weights (.ahpx)");
  train->add_option("--nan-after-epoch", o.nan_after_epoch, "Poison a weight after epoch N (fault injection)");
  seed_opt(train);

  CLI::App* infer = app.add_subcommand("infer", "Reconstruct an HDR image from an LDR PPM");
  infer->add_option("--ckpt", o.ckpt, "Checkpoint")->required();
  infer->add_option("--in", o.input, "Input LDR (.ppm)")->required();
  infer->add_option("--out", o.out, "Output HDR (.hdr or .pfm)")->required();
  infer->add_option("--trace-dir", o.trace_dir, "Write every iteration's output here");
  infer->add_option("--gamma", o.gamma, "Camera response gamma for bracketing");

  CLI::App* eval = app.add_subcommand("eval", "PSNR (mu-law) and SSIM (linear) over a dataset");
  eval->add_option("--ckpt", o.ckpt, "Checkpoint")->required();
  eval->add_option("--data", o.data, "Directory of <stem>.ppm / <stem>.hdr pairs");
  eval->add_option("--synth", o.synth, "Evaluate on N synthetic pairs instead of --data");
  eval->add_option("--report", o.report, "CSV report path (default: stdout)");
  eval->add_option("--resize", o.resize, "Square resize target (0 keeps size)");
  eval->add_flag("--all", o.all, "Evaluate every pair, not only the test split");
  eval->add_option("--gamma", o.gamma, "Camera response gamma for bracketing");
  seed_opt(eval);

  CLI::App* br = app.add_subcommand("bracket", "Write EV-2 / EV0 / EV+2 versions of an LDR PPM");
  br->add_option("input", o.input, "Input LDR (.ppm)")->required();
  br->add_option("prefix", o.prefix, "Output prefix; writes <prefix>m2.ppm, <prefix>0.ppm, <prefix>p2.ppm")
      ->required();
  br->add_option("--gamma", o.gamma, "Camera response gamma");

  CLI::App* tm = app.add_subcommand("tonemap", "Reinhard global operator (key 0.18, simple curve by default)");
  tm->add_option("input", o.input, "Input HDR (.hdr or .pfm)")->required();
  tm->add_option("output", o.out, "Output LDR (.ppm)")->required();
  tm->add_option("--key", o.key, "Key value a");
  tm->add_option("--delta", o.delta, "Log-average offset");
  tm->add_option("--white", o.white, "White point; enables the extended curve");

  CLI::App* conv = app.add_subcommand("convert", "Convert between PFM and Radiance RGBE");
  conv->add_option("input", o.input, "Input (.hdr or .pfm)")->required();
  conv->add_option("output", o.out, "Output (.hdr or .pfm)")->required();

  CLI::App* gc = app.add_subcommand("gradcheck", "float64 finite-difference check of network and loss");
  gc->add_option("--size", o.size, "Input size HxW");
  gc->add_option("--channels", o.channels, "Feature channels C");
  gc->add_option("--iters", o.iters, "Feedback iterations T");
  gc->add_option("--growth", o.growth, "Dense block growth rate");
  gc->add_option("--corrupt-backward", o.corrupt_backward, "Scale analytic gradients (negative control)");
  seed_opt(gc);

  CLI::App* ab = app.add_subcommand("ablate", "Write a run manifest for a skip/loss ablation");
  ab->add_flag("--no-skip1", o.no_skip1, "Drop the level-1 skip connection");
  ab->add_flag("--no-skip2", o.no_skip2, "Drop the level-2 skip connection");
  ab->add_flag("--no-l1", o.no_l1, "Disable the L1 term (lambda1 = 0)");
  ab->add_flag("--no-lper", o.no_lper, "Disable the perceptual term (lambda2 = 0)");
  ab->add_option("--config", o.config, "Base training config");
  ab->add_option("--manifest", o.manifest, "Manifest path (default: stdout)");
  ab->add_flag("--step", o.step, "Run one training step on a synthetic pair and record its loss");
  ab->add_option("--step-size", o.step_size, "Synthetic image extent for --step");
  ab->add_option("--extractor", o.extractor, "Perceptual extractor weights (.ahpx)");
  seed_opt(ab);

  CLI::App* sy = app.add_subcommand("synth", "Write synthetic LDR/HDR training pairs");
  sy->add_option("--out", o.out, "Output directory")->required();
  sy->add_option("--count", o.count, "Number of pairs");
  sy->add_option("--size", o.resize, "Square extent");
  seed_opt(sy);
}

Cli::~Cli() = default;

CLI::App& Cli::app() { return *app_; }

int Cli::run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  std::reverse(args.begin(), args.end());
  try {
    app_->parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app_->help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app_->help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app_->get_subcommands();
    err << (subs.empty() ? app_->help() : subs.front()->help());
    return kUsage;
  }

  const Options& o = *opts_;
  CLI::App* sub = app_->get_subcommands().front();
  const bool seed_given = sub->get_option_no_throw("--seed") && sub->count("--seed") > 0;
  const std::string name = sub->get_name();
  try {
    if (name == "train") return cmd_train(o, seed_given, out, err);
    if (name == "infer") return cmd_infer(o, out);
    if (name == "eval") return cmd_eval(o, seed_given, out, err);
    if (name == "bracket") return cmd_bracket(o, out);
    if (name == "tonemap") return cmd_tonemap(o, out);
    if (name == "convert") return cmd_convert(o, out);
    if (name == "gradcheck") return cmd_gradcheck(o, seed_given, out);
    if (name == "ablate") return cmd_ablate(o, seed_given, out);
    if (name == "synth") return cmd_synth(o, seed_given, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    const int code = exit_code_for(e);
    if (code == kUsage) err << '\n' << sub->help();
    return code;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  }
  err << "unknown subcommand " << name << '\n';
  return kUsage;
}

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  Cli cli;
  return cli.run(std::move(args), out, err);
}

}  // namespace arthdr::cli
