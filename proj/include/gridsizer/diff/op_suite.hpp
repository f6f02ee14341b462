#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace gridsizer::ad {

// Finite-difference sweep over every differentiable op on `trials` random
// shapes (1..6 per dimension). Returns the worst relative error per op.
std::map<std::string, double> op_gradcheck_suite(int trials, std::uint64_t seed);

}  // namespace gridsizer::ad
