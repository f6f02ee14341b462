#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gridsizer/structure/skeleton.hpp"

namespace gridsizer::skel {

// Node feature layout: [p1(3), p2(3), B(1), T(9, sized graphs only), L(3)]
// with L = [on_roof, on_boundary, tributary_area].
inline constexpr int kFeatureWidthSized = 19;
inline constexpr int kFeatureWidthUnsized = 10;
inline constexpr int kSectionOffset = 7;

inline constexpr int aux_offset(int width) { return width - 3; }

// Canonical description of the feature layout; hashed into weight files so a
// model is never fed a graph built with a different layout.
std::string feature_layout_descriptor(int width);

struct StructuralGraph {
  int feature_width = kFeatureWidthUnsized;
  std::vector<double> node_features;  // row-major, node_count() x feature_width
  std::vector<std::pair<int, int>> edges;  // undirected, first < second
  std::vector<int> story_of;               // 0 for the ground node
  int ground_index = 0;

  int node_count() const { return static_cast<int>(story_of.size()); }
  int bar_count() const { return node_count() - 1; }
  int story_count() const;
  std::span<const double> features(int node) const {
    return {node_features.data() + static_cast<std::size_t>(node) * feature_width,
            static_cast<std::size_t>(feature_width)};
  }
  std::vector<std::vector<int>> adjacency() const;
};

// Bars become nodes 0..B-1 in skeleton order; the pseudo ground node is B.
// Throws SkeletonError when the skeleton is not connected to the ground.
StructuralGraph to_graph(const Skeleton& sk,
                         const std::optional<std::vector<int>>& sections = std::nullopt);

// Reads p1/p2/B (and T when present) back out of the feature matrix.
std::vector<Bar> bars_from_graph(const StructuralGraph& g);

// Rebuilds the grid skeleton a graph was made from: lattice from the bar
// coordinates, a cell wherever all four first-story edge beams exist. Bars
// come back in graph node order. Throws SkeletonError when the graph is not
// a lattice skeleton or its load features disagree with the rebuilt layout
// (e.g. enclosed holes, which the topology alone cannot distinguish).
Skeleton skeleton_from_graph(const StructuralGraph& g);

// Copy of a sized graph with the T block removed (width 19 -> 10).
StructuralGraph strip_sections(const StructuralGraph& g);

// Hop distances from `source`; unreachable nodes get -1.
std::vector<int> bfs_distances(const std::vector<std::vector<int>>& adjacency, int source);

}  // namespace gridsizer::skel
