#include "gridsizer/nn/graph_input.hpp"

#include <cmath>

#include "gridsizer/diff/ops.hpp"
#include "gridsizer/util/hash.hpp"

namespace gridsizer::nn {

GraphInput prepare_graph(const skel::StructuralGraph& g) {
  GraphInput in;
  in.nodes = g.node_count();
  in.stories = g.story_count();
  in.ground = g.ground_index;
  in.feature_width = g.feature_width;
  in.adjacency = g.adjacency();
  for (int i = 0; i < in.nodes; ++i) {
    const auto& nb = in.adjacency[static_cast<std::size_t>(i)];
    if (nb.empty()) throw skel::SkeletonError("graph node " + std::to_string(i) + " has no neighbours");
    for (int j : nb) {
      in.edge_target.push_back(i);
      in.edge_source.push_back(j);
    }
  }
  const int aux = skel::aux_offset(g.feature_width);
  std::vector<double> x(g.node_features);
  for (int n = 0; n < in.nodes; ++n) {
    if (n == in.ground) continue;
    const auto f = g.features(n);
    in.bar_nodes.push_back(n);
    in.bar_story.push_back(g.story_of[static_cast<std::size_t>(n)] - 1);
    in.bar_length.push_back(std::hypot(f[3] - f[0], f[4] - f[1], f[5] - f[2]));
    in.bar_is_column.push_back(f[6] < 0.5);
    double* row = x.data() + static_cast<std::size_t>(n) * g.feature_width;
    for (int c = 0; c < 6; ++c) row[c] *= kCoordScale;
    row[aux + 2] *= kAreaScale;
  }
  in.features = ad::Tensor::from(std::move(x), in.nodes, g.feature_width);
  return in;
}

std::string layout_hash(int feature_width) {
  return hash_hex(skel::feature_layout_descriptor(feature_width) + "|coord*0.01|area*0.001|ground=-1");
}

ad::Tensor linear(const ad::ModelParams& p, const std::string& prefix, const ad::Tensor& x) {
  return ad::add(ad::matmul(x, p.get(prefix + ".w")), p.get(prefix + ".b"));
}

ad::Tensor slp(const ad::ModelParams& p, const std::string& prefix, const ad::Tensor& x) {
  return ad::leaky_relu(linear(p, prefix, x), 0.01);
}

void add_linear(ad::ModelParams& p, const std::string& prefix, int in, int out, std::mt19937_64& rng) {
  p.add_xavier(prefix + ".w", in, out, rng);
  p.add_zeros(prefix + ".b", 1, out);
}

ad::Tensor neighbour_message(const ad::ModelParams& p, const std::string& prefix, const ad::Tensor& v,
                             const GraphInput& g) {
  const auto self = ad::matmul(v, p.get(prefix + ".w_self"));
  const auto other = ad::matmul(v, p.get(prefix + ".w_nb"));
  const auto pre = ad::add(ad::add(ad::gather_rows(self, g.edge_target), ad::gather_rows(other, g.edge_source)),
                           p.get(prefix + ".b"));
  return ad::segment_mean(ad::leaky_relu(pre, 0.01), g.edge_target, g.nodes);
}

void add_message(ad::ModelParams& p, const std::string& prefix, int dim, std::mt19937_64& rng) {
  // Xavier bounds of the joint [2*dim -> dim] weight, stored as two halves.
  const double bound = std::sqrt(6.0 / (3.0 * dim));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (const char* half : {".w_self", ".w_nb"}) {
    std::vector<double> w(static_cast<std::size_t>(dim) * dim);
    for (auto& x : w) x = u(rng);
    p.add(prefix + half, ad::Tensor::from(std::move(w), dim, dim, true));
  }
  p.add_zeros(prefix + ".b", 1, dim);
}

ad::ModelParams frozen_copy(const ad::ModelParams& p) {
  ad::ModelParams out = p.clone();
  for (const auto& name : out.names()) out.get(name).node()->requires_grad = false;
  return out;
}

}  // namespace gridsizer::nn
