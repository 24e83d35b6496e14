// SPDX-License-Identifier: Apache-2.0
#include <charconv>
#include <fstream>
#include <sstream>

#include "arthdr/trainer.hpp"

namespace arthdr {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw ConfigError("decay_factor must lie in (0, 1]");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(mu > 0.0)) throw ConfigError("mu must be > 0");
  if (resize != 0 && resize < 8) throw ConfigError("resize must be 0 or >= 8");
  if (!(gamma > 0.0f)) throw ConfigError("gamma must be > 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(adam.epsilon > 0.0)) throw ConfigError("adam_eps must be > 0");
  net.validate();
  loss.validate();
}

const std::vector<std::string>& train_config_keys() {
  static const std::vector<std::string> keys{
      "learning_rate", "batch_size", "epochs",     "decay_factor", "decay_period", "seed",
      "channels",      "iterations", "dilation",   "growth",       "skip1",        "skip2",
      "lambda1",       "lambda2",    "mu",         "resize",       "adam_beta1",   "adam_beta2",
      "adam_eps",      "gamma",      "checkpoint_every"};
  return keys;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class V>
V parse_number(std::string_view text, const std::string& where) {
  V v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ConfigError(where + ": cannot parse '" + std::string(text) + "'");
  }
  return v;
}

bool parse_bool(std::string_view text, const std::string& where) {
  if (text == "1" || text == "true" || text == "on") return true;
  if (text == "0" || text == "false" || text == "off") return false;
  throw ConfigError(where + ": expected a boolean, got '" + std::string(text) + "'");
}

template <class V>
std::string fmt(V v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

TrainConfig parse_train_config(std::string_view text, TrainConfig cfg) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "config line " + std::to_string(line_no);
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    const std::string at = where + " (" + key + ")";

    auto size = [&] { return parse_number<std::size_t>(value, at); };
    auto real = [&] { return parse_number<double>(value, at); };
    if (key == "learning_rate") cfg.learning_rate = real();
    else if (key == "batch_size") cfg.batch_size = size();
    else if (key == "epochs") cfg.epochs = size();
    else if (key == "decay_factor") cfg.decay_factor = real();
    else if (key == "decay_period") cfg.decay_period = size();
    else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(value, at);
    else if (key == "channels") cfg.net.channels = size();
    else if (key == "iterations") cfg.net.iterations = size();
    else if (key == "dilation") cfg.net.dilation = size();
    else if (key == "growth") cfg.net.growth = size();
    else if (key == "skip1") cfg.net.skip_level1 = parse_bool(value, at);
    else if (key == "skip2") cfg.net.skip_level2 = parse_bool(value, at);
    else if (key == "lambda1") cfg.loss.lambda1 = real();
    else if (key == "lambda2") cfg.loss.lambda2 = real();
    else if (key == "mu") cfg.mu = real();
    else if (key == "resize") cfg.resize = size();
    else if (key == "adam_beta1") cfg.adam.beta1 = real();
    else if (key == "adam_beta2") cfg.adam.beta2 = real();
    else if (key == "adam_eps") cfg.adam.epsilon = real();
    else if (key == "gamma") cfg.gamma = static_cast<float>(real());
    else if (key == "checkpoint_every") cfg.checkpoint_every = size();
    else throw ConfigError(where + ": unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_train_config(ss.str(), std::move(base));
}

std::string format_train_config(const TrainConfig& c) {
  std::ostringstream os;
  os << "learning_rate = " << fmt(c.learning_rate) << '\n'
     << "batch_size = " << c.batch_size << '\n'
     << "epochs = " << c.epochs << '\n'
     << "decay_factor = " << fmt(c.decay_factor) << '\n'
     << "decay_period = " << c.decay_period << '\n'
     << "seed = " << c.seed << '\n'
     << "channels = " << c.net.channels << '\n'
     << "iterations = " << c.net.iterations << '\n'
     << "dilation = " << c.net.dilation << '\n'
     << "growth = " << c.net.growth << '\n'
     << "skip1 = " << (c.net.skip_level1 ? "true" : "false") << '\n'
     << "skip2 = " << (c.net.skip_level2 ? "true" : "false") << '\n'
     << "lambda1 = " << fmt(c.loss.lambda1) << '\n'
     << "lambda2 = " << fmt(c.loss.lambda2) << '\n'
     << "mu = " << fmt(c.mu) << '\n'
     << "resize = " << c.resize << '\n'
     << "adam_beta1 = " << fmt(c.adam.beta1) << '\n'
     << "adam_beta2 = " << fmt(c.adam.beta2) << '\n'
     << "adam_eps = " << fmt(c.adam.epsilon) << '\n'
     << "gamma = " << fmt(c.gamma) << '\n'
     << "checkpoint_every = " << c.checkpoint_every << '\n';
  return os.str();
}

}  // namespace arthdr
