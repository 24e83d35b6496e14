// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "arthdr/autodiff.hpp"
#include "arthdr/gradcheck.hpp"
#include "arthdr/image.hpp"

namespace testutil {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(ARTHDR_FIXTURES) / name;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("arthdr_" + tag + "_" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

template <class T>
arthdr::Tensor<T> random_tensor(arthdr::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  arthdr::Tensor<T> t(std::move(shape));
  for (T& v : t.data()) v = static_cast<T>(d(rng));
  return t;
}

/// Values with |v| in [margin, 1], keeping relu/abs away from their kinks.
inline arthdr::Tensor<double> away_from_zero(arthdr::Shape shape, std::mt19937_64& rng, double margin = 0.1) {
  std::uniform_real_distribution<double> d(margin, 1.0);
  std::bernoulli_distribution sign(0.5);
  arthdr::Tensor<double> t(std::move(shape));
  for (double& v : t.data()) v = sign(rng) ? d(rng) : -d(rng);
  return t;
}

inline arthdr::RgbImage random_image(std::size_t w, std::size_t h, std::mt19937_64& rng, double lo = 0.0,
                                     double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  arthdr::RgbImage img(w, h);
  for (float& v : img.pixels) v = static_cast<float>(d(rng));
  return img;
}

using OpBuilder = std::function<arthdr::Var<double>(std::vector<arthdr::Var<double>>&)>;

/// Largest relative error between the analytic input gradients of
/// sum(op(inputs) * probe) and central differences, over every input.
inline double op_gradient_error(std::vector<arthdr::Tensor<double>> inputs, const OpBuilder& op,
                                std::uint64_t seed = 1, double eps = 1e-6) {
  using namespace arthdr;
  Tensor<double> probe;
  auto evaluate = [&](bool backward, std::vector<Tensor<double>>* grads) {
    Tape<double> tape;
    std::vector<Var<double>> vars;
    for (const auto& in : inputs) vars.push_back(tape.input(in));
    Var<double> out = op(vars);
    if (probe.empty()) {
      std::mt19937_64 rng(seed);
      probe = random_tensor<double>(out.shape(), rng, 0.5, 1.5);
    }
    Var<double> loss = sum(mul(out, tape.constant(probe)));
    if (backward) {
      tape.backward(loss);
      for (const auto& v : vars) grads->push_back(v.grad());
    }
    return loss.value()[0];
  };
  std::vector<Tensor<double>> analytic;
  evaluate(true, &analytic);
  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Tensor<double> numeric = finite_diff_grad([&] { return evaluate(false, nullptr); }, inputs[i], eps);
    worst = std::max(worst, gradient_rel_error(analytic[i], numeric));
  }
  return worst;
}

}  // namespace testutil
