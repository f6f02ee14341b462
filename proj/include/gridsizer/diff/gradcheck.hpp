#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "gridsizer/diff/tensor.hpp"

namespace gridsizer::ad {

struct GradCheckResult {
  double max_error = 0.0;  // max over checked coordinates
  std::size_t checked = 0;
};

// Compares the reverse-mode gradient of the scalar `f()` with respect to each
// input against central differences. Error per coordinate is
// |analytic - numeric| / max(|analytic|, |numeric|, floor). When `samples` is
// nonzero only that many randomly chosen coordinates are perturbed.
GradCheckResult gradcheck(const std::function<Tensor()>& f, const std::vector<Tensor>& inputs, double h = 1e-6,
                          std::size_t samples = 0, std::uint64_t seed = 0, double floor = 1e-7);

// Per coordinate the smallest error over `steps`. Large steps can straddle
// a kink of leaky_relu or max, small ones drown tiny gradients in roundoff;
// a wrong analytic gradient disagrees at every step.
GradCheckResult gradcheck_sweep(const std::function<Tensor()>& f, const std::vector<Tensor>& inputs,
                                const std::vector<double>& steps, std::size_t samples = 0, std::uint64_t seed = 0,
                                double floor = 1e-7);

}  // namespace gridsizer::ad
