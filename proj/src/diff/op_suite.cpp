#include "gridsizer/diff/op_suite.hpp"

#include <algorithm>
#include <functional>
#include <random>
#include <vector>

#include "gridsizer/diff/gradcheck.hpp"
#include "gridsizer/diff/ops.hpp"

namespace gridsizer::ad {

namespace {

// Values kept away from the kinks of abs/leaky_relu/max so central
// differences are valid.
Tensor away_from_zero(int r, int c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  std::bernoulli_distribution sign(0.5);
  std::vector<double> v(static_cast<std::size_t>(r) * c);
  for (auto& x : v) x = sign(rng) ? u(rng) : -u(rng);
  return Tensor::from(std::move(v), r, c, true);
}

// Contracts an output of any shape to a scalar with fixed random weights.
Tensor contract(const Tensor& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> w(y.size());
  for (auto& x : w) x = u(rng);
  return sum(mul(y, Tensor::from(std::move(w), y.rows(), y.cols())));
}

}  // namespace

std::map<std::string, double> op_gradcheck_suite(int trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dim(1, 6);
  const double slope = 0.01;
  struct Case {
    const char* name;
    std::function<Tensor(const std::vector<Tensor>&)> f;
    int arity;
    double h = 1e-6;
  };
  std::map<std::string, double> worst;
  for (int trial = 0; trial < trials; ++trial) {
    const int r = dim(rng), c = dim(rng), k = dim(rng);
    const int groups = std::min(r, 3);
    std::vector<int> seg(static_cast<std::size_t>(r));
    for (int i = 0; i < r; ++i) seg[static_cast<std::size_t>(i)] = i % groups;
    std::vector<int> idx{0, r - 1, r / 2, 0};
    std::vector<double> row_w(static_cast<std::size_t>(r));
    for (int i = 0; i < r; ++i) row_w[static_cast<std::size_t>(i)] = 1.0 / (i + 2.0);
    const std::uint64_t noise_seed = rng();
    std::vector<Case> cases{
        {"matmul", [&](const auto& in) { return matmul(in[0], in[1]); }, 2},
        {"add", [&](const auto& in) { return add(in[0], in[2]); }, 3},
        {"add_row", [&](const auto& in) { return add(in[0], in[3]); }, 4},
        {"sub", [&](const auto& in) { return sub(in[0], in[2]); }, 3},
        {"mul", [&](const auto& in) { return mul(in[0], in[2]); }, 3},
        {"mul_row", [&](const auto& in) { return mul(in[0], in[3]); }, 4},
        {"scale", [&](const auto& in) { return scale(in[0], -2.5); }, 1},
        {"add_scalar", [&](const auto& in) { return add_scalar(in[0], 0.7); }, 1},
        {"dropout", [&](const auto& in) {
           std::mt19937_64 mask(noise_seed);
           return dropout(in[0], 0.3, mask, true);
         }, 1},
        {"concat_cols", [&](const auto& in) { return concat_cols({in[0], in[2], in[0]}); }, 3},
        {"concat_rows", [&](const auto& in) { return concat_rows({in[0], in[2]}); }, 3},
        {"gather_rows", [&](const auto& in) { return gather_rows(in[0], idx); }, 1},
        {"slice_cols", [&](const auto& in) { return slice_cols(in[0], 0, (c + 1) / 2); }, 1},
        {"scale_rows", [&](const auto& in) { return scale_rows(in[0], row_w); }, 1},
        {"segment_mean", [&](const auto& in) { return segment_mean(in[0], seg, groups); }, 1},
        {"segment_max", [&](const auto& in) { return segment_max(in[0], seg, groups); }, 1},
        {"leaky_relu", [&](const auto& in) { return leaky_relu(in[0], slope); }, 1},
        {"sigmoid", [&](const auto& in) { return sigmoid(in[0]); }, 1},
        {"softmax", [&](const auto& in) { return softmax_rows(in[0]); }, 1},
        {"log", [&](const auto& in) { return log(abs(in[0])); }, 1},
        {"abs", [&](const auto& in) { return abs(in[0]); }, 1},
        {"sum", [&](const auto& in) { return sum(in[0]); }, 1},
        {"mean", [&](const auto& in) { return mean(in[0]); }, 1},
        {"column_mean", [&](const auto& in) { return column_mean(in[0]); }, 1},
        {"top_k_sum", [&](const auto& in) { return top_k_sum(in[0], 2); }, 1},
        {"l1_loss", [&](const auto& in) { return l1_loss(in[0], in[2]); }, 3},
        {"bce_loss", [&](const auto& in) { return bce_loss(sigmoid(in[0]), in[4]); }, 5},
        {"softmax_entropy", [&](const auto& in) { return softmax_entropy(in[0]); }, 1},
        {"gumbel_softmax", [&](const auto& in) {
           std::mt19937_64 noise(noise_seed);  // same noise every evaluation
           return gumbel_softmax(in[0], 0.8, noise, false).y;
         }, 1, 1e-4},
    };
    for (const auto& cs : cases) {
      std::vector<Tensor> in{away_from_zero(r, c, rng), away_from_zero(c, k, rng), away_from_zero(r, c, rng),
                             away_from_zero(1, c, rng)};
      std::vector<double> labels(static_cast<std::size_t>(r) * c);
      for (auto& l : labels) l = std::bernoulli_distribution(0.5)(rng) ? 1.0 : 0.0;
      in.push_back(Tensor::from(labels, r, c));
      const std::vector<Tensor> used(in.begin(), in.begin() + std::min(cs.arity, 4));
      const auto res = gradcheck([&] { return contract(cs.f(in), 99); }, used, cs.h);
      auto& w = worst[cs.name];
      w = std::max(w, res.max_error);
    }
  }
  return worst;
}

}  // namespace gridsizer::ad
