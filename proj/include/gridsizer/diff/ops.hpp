#pragma once

#include <random>
#include <vector>

#include "gridsizer/diff/tensor.hpp"

namespace gridsizer::ad {

using Rng = std::mt19937_64;

Tensor matmul(const Tensor& a, const Tensor& b);

// Elementwise with broadcasting of b when it is 1x1 or a 1xC row.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor gather_rows(const Tensor& a, const std::vector<int>& index);
Tensor slice_cols(const Tensor& a, int begin, int end);
// Row r multiplied by the constant w[r].
Tensor scale_rows(const Tensor& a, const std::vector<double>& w);

// Row-group reductions: row r of `a` belongs to group segment[r]; groups
// without rows are an error.
Tensor segment_mean(const Tensor& a, const std::vector<int>& segment, int groups);
Tensor segment_max(const Tensor& a, const std::vector<int>& segment, int groups);

Tensor leaky_relu(const Tensor& a, double slope = 0.01);
Tensor sigmoid(const Tensor& a);
Tensor softmax_rows(const Tensor& a);
Tensor log(const Tensor& a);
Tensor abs(const Tensor& a);

// Inverted dropout: kept entries scaled by 1/(1-p); identity when !training or p == 0.
Tensor dropout(const Tensor& a, double p, Rng& rng, bool training);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor column_mean(const Tensor& a);  // R x C -> 1 x C
// Sum of the k largest entries of a (ties broken by index).
Tensor top_k_sum(const Tensor& a, int k);

Tensor l1_loss(const Tensor& pred, const Tensor& target);
// Mean binary cross-entropy of probabilities against {0,1} targets; inputs
// are clamped to [eps, 1-eps].
Tensor bce_loss(const Tensor& prob, const Tensor& target, double eps = 1e-12);

// Row-wise categorical sampling. Forward returns exact one-hot rows at
// argmax((logits + g) / tau); backward uses the Jacobian of the soft sample
// softmax((logits + g) / tau). `soft` returns the soft sample itself.
struct GumbelSample {
  Tensor y;              // one-hot (hard) or soft sample
  std::vector<int> index;  // argmax per row
};
GumbelSample gumbel_softmax(const Tensor& logits, double tau, Rng& rng, bool hard = true);

// Per-row entropy (natural log) of softmax(logits): R x C -> R x 1.
Tensor softmax_entropy(const Tensor& logits);

}  // namespace gridsizer::ad
