#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "mfm/autograd.hpp"
#include "mfm/ops.hpp"
#include "mfm/rng.hpp"

namespace mfm::testing {

// Compares the analytic gradient of a scalar function against central
// differences on every entry of `inputs`. Returns the worst relative error.
// Entries far below the largest gradient of their input are compared against
// 1e-3 of that largest gradient (or `floor`), since central differences carry
// an absolute rounding error that would swamp them.
inline double gradcheck(const std::function<ad::Var()>& f, std::vector<ad::Var> inputs, double h = 1e-6,
                        double floor = 1e-9) {
  for (auto& in : inputs) in.zero_grad();
  ad::backward(f());
  std::vector<std::vector<double>> analytic;
  for (auto& in : inputs) analytic.push_back(in.grad());
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    double largest = 0.0;
    for (double g : analytic[k]) largest = std::max(largest, std::abs(g));
    const double input_floor = std::max(floor, 1e-3 * largest);
    auto values = inputs[k].mutable_value();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = f().item();
      values[i] = saved - h;
      const double down = f().item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[k][i];
      const double scale = std::max({std::abs(a), std::abs(numeric), input_floor});
      worst = std::max(worst, std::abs(a - numeric) / scale);
    }
  }
  return worst;
}

inline std::vector<double> random_values(std::size_t n, Rng& rng, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * standard_normal(rng);
  return v;
}

// Weighted sum with fixed random weights, so every output element affects the loss.
inline ad::Var probe_loss(const ad::Var& y, std::uint64_t seed = 99) {
  Rng rng(seed);
  std::vector<double> w = random_values(y.size(), rng);
  return ad::mean(ad::mul(ad::reshape(y, {y.size()}), ad::Var::constant({y.size()}, w)));
}

}  // namespace mfm::testing
