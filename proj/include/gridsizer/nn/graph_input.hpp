#pragma once

#include <string>
#include <vector>

#include "gridsizer/diff/params.hpp"
#include "gridsizer/diff/tensor.hpp"
#include "gridsizer/structure/graph.hpp"

namespace gridsizer::nn {

// Raw features are in ft / ft^2; the networks see coordinates scaled by 1/100
// and tributary areas by 1/1000. The ground row stays at -1.
inline constexpr double kCoordScale = 0.01;
inline constexpr double kAreaScale = 1e-3;

// Index structure of a structural graph, precomputed once per graph.
struct GraphInput {
  int nodes = 0;
  int stories = 0;
  int ground = 0;
  int feature_width = 0;
  std::vector<int> edge_target;  // directed edges, both orientations
  std::vector<int> edge_source;
  std::vector<int> bar_nodes;    // every node except the ground, ascending
  std::vector<int> bar_story;    // 0-based story of each bar node
  std::vector<double> bar_length;   // ft
  std::vector<bool> bar_is_column;
  std::vector<std::vector<int>> adjacency;
  ad::Tensor features;  // scaled, nodes x feature_width
};

GraphInput prepare_graph(const skel::StructuralGraph& g);

// Fingerprint of the feature layout and scaling a model was trained with.
std::string layout_hash(int feature_width);

// Leaky-ReLU single-layer perceptron and plain affine map over params
// "<prefix>.w" / "<prefix>.b".
ad::Tensor linear(const ad::ModelParams& p, const std::string& prefix, const ad::Tensor& x);
ad::Tensor slp(const ad::ModelParams& p, const std::string& prefix, const ad::Tensor& x);
void add_linear(ad::ModelParams& p, const std::string& prefix, int in, int out, std::mt19937_64& rng);

// Mean-aggregated neighbour message: SLP over [v_i, v_j] with the weight split
// into self/neighbour halves, averaged over j in Ne(i).
ad::Tensor neighbour_message(const ad::ModelParams& p, const std::string& prefix, const ad::Tensor& v,
                             const GraphInput& g);
void add_message(ad::ModelParams& p, const std::string& prefix, int dim, std::mt19937_64& rng);

// Copy whose tensors are constant leaves (no gradients accumulate).
ad::ModelParams frozen_copy(const ad::ModelParams& p);

}  // namespace gridsizer::nn
