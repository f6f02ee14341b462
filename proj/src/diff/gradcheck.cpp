#include "gridsizer/diff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace gridsizer::ad {

GradCheckResult gradcheck(const std::function<Tensor()>& f, const std::vector<Tensor>& inputs, double h,
                          std::size_t samples, std::uint64_t seed, double floor) {
  return gradcheck_sweep(f, inputs, {h}, samples, seed, floor);
}

GradCheckResult gradcheck_sweep(const std::function<Tensor()>& f, const std::vector<Tensor>& inputs,
                                const std::vector<double>& steps, std::size_t samples, std::uint64_t seed,
                                double floor) {
  for (auto t : inputs) t.zero_grad();
  f().backward();
  std::vector<std::vector<double>> analytic;
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto g = inputs[i].grad();
    if (g.empty()) g.assign(inputs[i].size(), 0.0);
    analytic.push_back(std::move(g));
    for (std::size_t j = 0; j < inputs[i].size(); ++j) coords.emplace_back(i, j);
  }
  if (samples != 0 && samples < coords.size()) {
    std::mt19937_64 rng(seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(samples);
  }

  GradCheckResult res;
  NoGradGuard guard;
  for (const auto& [i, j] : coords) {
    auto t = inputs[i];
    double& x = t.mutable_values()[j];
    const double x0 = x;
    const double a = analytic[i][j];
    double err = HUGE_VAL;
    for (double h : steps) {
      x = x0 + h;
      const double fp = f().item();
      x = x0 - h;
      const double fm = f().item();
      x = x0;
      const double numeric = (fp - fm) / (2.0 * h);
      err = std::min(err, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor}));
    }
    res.max_error = std::max(res.max_error, err);
    ++res.checked;
  }
  return res;
}

}  // namespace gridsizer::ad
