#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "gridsizer/frame/oracle.hpp"
#include "gridsizer/nn/graph_input.hpp"
#include "gridsizer/nn/neural_sim.hpp"
#include "gridsizer/structure/graph.hpp"
#include "gridsizer/structure/skeleton.hpp"

namespace fixtures {

using namespace gridsizer;

inline skel::SkeletonConfig small_config(int stories_min, int stories_max) {
  skel::SkeletonConfig cfg;
  cfg.base_min = 60;
  cfg.base_max = 110;
  cfg.stories_min = stories_min;
  cfg.stories_max = stories_max;
  return cfg;
}

// Hand-built graph with random features: nodes 0..n-2 are bars split over
// `stories` stories, node n-1 is the ground tied to the first-story bars.
inline skel::StructuralGraph toy_graph(int n, int stories, int width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  skel::StructuralGraph g;
  g.feature_width = width;
  g.ground_index = n - 1;
  const int bars = n - 1;
  for (int i = 0; i < bars; ++i) g.story_of.push_back(1 + i * stories / bars);
  g.story_of.push_back(0);
  g.node_features.resize(static_cast<std::size_t>(n) * width);
  for (int i = 0; i < bars; ++i) {
    for (int c = 0; c < width; ++c) g.node_features[static_cast<std::size_t>(i * width + c)] = u(rng);
    g.node_features[static_cast<std::size_t>(i * width + 6)] = i % 2;
    if (width == skel::kFeatureWidthSized) {
      for (int s = 0; s < skel::kSectionSlots; ++s)
        g.node_features[static_cast<std::size_t>(i * width + skel::kSectionOffset + s)] = s == i % 5;
    }
  }
  std::fill_n(g.node_features.begin() + static_cast<std::ptrdiff_t>(bars) * width, width, -1.0);
  for (int i = 0; i + 1 < bars; ++i) g.edges.emplace_back(i, i + 1);
  g.edges.emplace_back(0, bars - 1);
  for (int i = 0; i < bars; ++i)
    if (g.story_of[static_cast<std::size_t>(i)] == 1) g.edges.emplace_back(i, n - 1);
  return g;
}

// Relabels nodes: new index of old node i is perm[i].
inline skel::StructuralGraph permute(const skel::StructuralGraph& g, const std::vector<int>& perm) {
  skel::StructuralGraph out;
  out.feature_width = g.feature_width;
  out.ground_index = perm[static_cast<std::size_t>(g.ground_index)];
  out.story_of.resize(g.story_of.size());
  out.node_features.resize(g.node_features.size());
  for (int i = 0; i < g.node_count(); ++i) {
    const auto p = static_cast<std::size_t>(perm[static_cast<std::size_t>(i)]);
    out.story_of[p] = g.story_of[static_cast<std::size_t>(i)];
    const auto f = g.features(i);
    std::copy(f.begin(), f.end(), out.node_features.begin() + static_cast<std::ptrdiff_t>(p * g.feature_width));
  }
  for (auto [a, b] : g.edges) {
    int x = perm[static_cast<std::size_t>(a)], y = perm[static_cast<std::size_t>(b)];
    out.edges.emplace_back(std::min(x, y), std::max(x, y));
  }
  std::reverse(out.edges.begin(), out.edges.end());
  return out;
}

struct OracleSample {
  skel::Skeleton skeleton;
  std::vector<int> sections;
  frame::SimResult result;
};

inline std::vector<OracleSample> oracle_samples(int count, int stories_min, int stories_max, std::uint64_t seed) {
  std::vector<OracleSample> out;
  const auto cfg = small_config(stories_min, stories_max);
  for (int i = 0; i < count; ++i) {
    OracleSample s;
    s.skeleton = skel::sample_skeleton(seed + static_cast<std::uint64_t>(i), cfg);
    s.sections = skel::assign_random_sections(s.skeleton, seed * 7919 + static_cast<std::uint64_t>(i));
    s.result = frame::solve(s.skeleton, s.sections);
    out.push_back(std::move(s));
  }
  return out;
}

inline double max_abs_drift(const std::vector<OracleSample>& samples) {
  double m = 0.0;
  for (const auto& s : samples) {
    for (double d : s.result.drift_x) m = std::max(m, std::abs(d));
    for (double d : s.result.drift_y) m = std::max(m, std::abs(d));
  }
  return m;
}

inline nn::SimExample to_example(const OracleSample& s, double scale) {
  nn::SimExample ex;
  ex.graph = nn::prepare_graph(skel::to_graph(s.skeleton, s.sections));
  for (std::size_t k = 0; k < s.result.drift_x.size(); ++k) {
    ex.drift.push_back(s.result.drift_x[k] / scale);
    ex.drift.push_back(s.result.drift_y[k] / scale);
  }
  return ex;
}

}  // namespace fixtures
