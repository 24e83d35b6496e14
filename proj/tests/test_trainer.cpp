// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <set>
#include <sstream>

#include "arthdr/hdr_io.hpp"
#include "arthdr/trainer.hpp"
#include "helpers.hpp"

using namespace arthdr;

namespace {

TrainConfig tiny_config() {
  TrainConfig c;
  c.net = ArtHdrNetConfig{.channels = 4, .iterations = 2, .dilation = 2, .growth = 2};
  c.epochs = 2;
  c.batch_size = 2;
  c.resize = 12;
  c.learning_rate = 1e-3;
  c.loss = LossWeights{1.0, 0.0};
  return c;
}

std::vector<const TrainingPair*> all_of(const std::vector<TrainingPair>& d) {
  std::vector<const TrainingPair*> out;
  for (const auto& p : d) out.push_back(&p);
  return out;
}

}  // namespace

TEST_CASE("train config parsing") {
  const TrainConfig c = parse_train_config(
      "# comment\n"
      "learning_rate = 1e-3\n"
      "batch_size=4  # trailing\n"
      "\n"
      "channels = 8\n"
      "skip2 = off\n"
      "lambda2 = 0\n");
  CHECK(c.learning_rate == 1e-3);
  CHECK(c.batch_size == 4);
  CHECK(c.net.channels == 8);
  CHECK_FALSE(c.net.skip_level2);
  CHECK(c.net.skip_level1);
  CHECK(c.loss.lambda2 == 0.0);
  CHECK(c.epochs == TrainConfig{}.epochs);

  CHECK(parse_train_config(format_train_config(c)) == c);
  CHECK(parse_train_config(format_train_config(TrainConfig{})) == TrainConfig{});

  const std::string text = format_train_config(TrainConfig{});
  std::size_t pos = 0;
  for (const std::string& key : train_config_keys()) {
    const auto at = text.find(key + " = ", pos);
    CHECK(at != std::string::npos);
    pos = at;
  }

  try {
    parse_train_config("epochs = 3\nwarmup = 2\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_train_config("epochs = three\n"), ConfigError);
  CHECK_THROWS_AS(parse_train_config("epochs\n"), ConfigError);
  CHECK_THROWS_AS(parse_train_config("batch_size = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_train_config("lambda1 = 0\nlambda2 = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_train_config("dilation = 0\n"), ConfigError);
}

TEST_CASE("defaults follow the training protocol") {
  const TrainConfig c;
  CHECK(c.learning_rate == 2e-4);
  CHECK(c.net.iterations == 4);
  CHECK(c.decay_factor == 0.5);
  CHECK(c.decay_period == 50);
  CHECK(c.adam.beta1 == 0.9);
  CHECK(c.adam.beta2 == 0.999);
  CHECK(c.adam.epsilon == 1e-8);
  CHECK(c.loss.lambda1 == 0.1);
  CHECK(c.loss.lambda2 == 0.5);
  CHECK(c.mu == 5000.0);
}

TEST_CASE("dataset split") {
  for (std::size_t n : {5u, 10u, 23u, 100u}) {
    const SplitIndices s = split_indices(n, 99);
    CHECK(s.train.size() == n * 4 / 5);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    for (std::size_t i : s.test) CHECK(all.insert(i).second);
    CHECK(all.size() == n);
    CHECK(*all.rbegin() == n - 1);
    const SplitIndices again = split_indices(n, 99);
    CHECK(again.train == s.train);
    CHECK(again.test == s.test);
  }
  CHECK_FALSE(split_indices(50, 1).train == split_indices(50, 2).train);
  CHECK_THROWS_AS(split_indices(4, 1), ConfigError);
}

TEST_CASE("synthetic pairs follow the capture model") {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    const SynthPair p = synth_pair(seed, 24, 20);
    CHECK(p.hdr.width == 24);
    CHECK(p.ldr.height == 20);
    CHECK_NOTHROW(validate(p.hdr));
    CHECK_NOTHROW(validate(p.ldr));
    CHECK(*std::max_element(p.hdr.pixels.begin(), p.hdr.pixels.end()) == 1.0f);
    CHECK(p.exposure >= 2.0);
    CHECK(p.exposure <= 6.0);
    std::size_t saturated = 0;
    for (std::size_t i = 0; i < p.hdr.pixels.size(); ++i) {
      const double exposed = std::min(1.0, p.exposure * p.hdr.pixels[i]);
      const double code = std::round(std::pow(exposed, 1.0 / 2.2) * 255.0);
      CHECK(p.ldr.pixels[i] * 255.0f == doctest::Approx(code).epsilon(1e-4));
      if (p.hdr.pixels[i] > p.clip_level()) ++saturated;
    }
    CHECK(saturated > 0);
    CHECK(synth_pair(seed, 24, 20).hdr == p.hdr);
  }
  CHECK_THROWS_AS(synth_pair(1, 4, 20), ConfigError);

  const auto d = synth_dataset(3, 7, 10, 10);
  CHECK(d.size() == 3);
  CHECK(d[2].name == "synth2");
  CHECK_FALSE(d[0].hdr == d[1].hdr);
}

TEST_CASE("pair directory scanning and loading") {
  testutil::TempDir dir("pairs");
  const auto d = synth_dataset(3, 5, 16, 16);
  for (const auto& p : d) {
    save_ppm(dir / (p.name + ".ppm"), p.ldr);
    save_rgbe(dir / (p.name + ".hdr"), p.hdr);
  }
  save_ppm(dir / "orphan.ppm", d[0].ldr);
  write_file(dir / "broken.ppm", Bytes{'P', '6'});
  write_file(dir / "broken.hdr", Bytes{'#'});

  const auto pairs = scan_pair_directory(dir.path());
  REQUIRE(pairs.size() == 4);
  CHECK(pairs[0].ldr.stem() == "broken");
  CHECK(pairs[1].hdr.stem() == "synth0");

  std::vector<std::string> skipped;
  const auto loaded = load_pairs(pairs, 8, &skipped);
  CHECK(loaded.size() == 3);
  REQUIRE(skipped.size() == 1);
  CHECK(skipped[0].find("broken.ppm") != std::string::npos);
  CHECK(loaded[0].ldr.width == 8);
  CHECK(*std::max_element(loaded[0].hdr.pixels.begin(), loaded[0].hdr.pixels.end()) == doctest::Approx(1.0f));
  CHECK_THROWS_AS(load_pairs(pairs, 8), Error);
  CHECK_THROWS_AS(scan_pair_directory(dir / "nope"), IoError);

  HdrImage zeros(2, 2);
  CHECK(normalize_peak(zeros) == zeros);
}

TEST_CASE("trainer reduces the loss and logs epochs") {
  TrainConfig c = tiny_config();
  c.epochs = 8;
  const auto data = synth_dataset(2, 3, 12, 12);
  Trainer t(c, std::nullopt);
  const auto batch = all_of(data);
  const double before = t.loss(batch).total;
  std::size_t calls = 0;
  const auto log = t.run(data, [&](const Trainer&, const EpochLog&) { ++calls; });
  CHECK(calls == 8);
  CHECK(log.size() == 8);
  CHECK(log[7].epoch == 7);
  CHECK(t.epochs_completed() == 8);
  CHECK(t.loss(batch).total < before);

  std::ostringstream os;
  write_loss_log(os, log);
  CHECK(os.str().rfind("epoch,mean_loss,lr\n0,", 0) == 0);
}

TEST_CASE("perceptual loss needs an extractor") {
  TrainConfig c = tiny_config();
  c.loss = LossWeights{};
  CHECK_THROWS_AS(Trainer(c, std::nullopt), ConfigError);
  const PerceptualExtractorSpec spec{.widths = {4, 4}, .taps = {1}, .seed = 1};
  Trainer t(c, PerceptualExtractor<float>::generate(spec));
  const auto data = synth_dataset(1, 3, 12, 12);
  const LossTerms l = t.loss(all_of(data));
  CHECK(l.per > 0.0);
  CHECK(l.total == doctest::Approx(0.1 * l.l1 + 0.5 * l.per).epsilon(1e-5));
}

TEST_CASE("training is deterministic and resumable") {
  const TrainConfig c = tiny_config();
  const auto data = synth_dataset(3, 11, 12, 12);

  Trainer a(c, std::nullopt), b(c, std::nullopt);
  a.run(data);
  b.run(data);
  CHECK(encode_checkpoint(a.checkpoint()) == encode_checkpoint(b.checkpoint()));

  TrainConfig first = c;
  first.epochs = 1;
  Trainer half(first, std::nullopt);
  half.run(data);
  const Checkpoint mid = decode_checkpoint(encode_checkpoint(half.checkpoint()));
  Trainer rest(c, std::nullopt);
  rest.resume(mid);
  CHECK(rest.epochs_completed() == 1);
  const auto log = rest.run(data);
  CHECK(log.size() == 1);
  CHECK(encode_checkpoint(rest.checkpoint()) == encode_checkpoint(a.checkpoint()));

  TrainConfig other = c;
  other.net.channels = 5;
  Trainer mismatch(other, std::nullopt);
  CHECK_THROWS_AS(mismatch.resume(mid), ConfigError);
}

TEST_CASE("non-finite loss aborts with diagnostics") {
  const auto data = synth_dataset(2, 3, 12, 12);
  Trainer t(tiny_config(), std::nullopt);
  t.params().get("ru.conv3.bias").value[0] = std::numeric_limits<float>::quiet_NaN();
  try {
    t.run(data);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("epoch 0") != std::string::npos);
    CHECK(msg.find("batch 0") != std::string::npos);
    CHECK(msg.find("l1 =") != std::string::npos);
  }
}

TEST_CASE("inference and evaluation") {
  const TrainConfig c = tiny_config();
  Trainer t(c, std::nullopt);
  const auto data = synth_dataset(2, 4, 12, 12);
  const auto tms = infer_tonemapped(t.params(), c.net, data[0].ldr);
  CHECK(tms.size() == 2);
  for (float v : tms[1].pixels) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
  const HdrImage h = infer(t.params(), c.net, c.mu, data[0].ldr);
  for (std::size_t i = 0; i < h.pixels.size(); ++i) {
    CHECK(h.pixels[i] == doctest::Approx(inverse_mu_law(tms[1].pixels[i], c.mu)).epsilon(1e-5));
  }

  // A perfect predictor scores infinite PSNR and unit SSIM.
  const MetricsReport perfect = evaluate(
      [&](const LdrImage& ldr) { return ldr == data[0].ldr ? data[0].hdr : data[1].hdr; }, data, c.mu);
  REQUIRE(perfect.rows.size() == 2);
  CHECK(std::isinf(perfect.rows[0].psnr_db));
  CHECK(perfect.rows[1].ssim == doctest::Approx(1.0));

  const MetricsReport model = evaluate(
      [&](const LdrImage& ldr) { return infer(t.params(), c.net, c.mu, ldr); }, data, c.mu);
  CHECK(std::isfinite(model.mean_psnr()));
  CHECK(model.rows[0].path == "synth0");
}

TEST_CASE("network gradient check on a small configuration") {
  NetworkGradCheckOptions o;
  o.net = ArtHdrNetConfig{.channels = 2, .iterations = 2, .dilation = 1, .growth = 1};
  o.loss = LossWeights{0.1, 0.5};
  const GradCheckReport r = gradcheck_network(o);
  CHECK(r.entries.size() == param_layout(o.net).size());
  CHECK(r.passed(1e-4));
  CHECK(r.max_abs_diff < 1e-8);

  o.gradient_scale = 1.01;
  const GradCheckReport bad = gradcheck_network(o);
  CHECK_FALSE(bad.passed(1e-4));
  CHECK(bad.max_abs_diff > r.max_abs_diff);
}
