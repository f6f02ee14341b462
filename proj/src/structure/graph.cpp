#include "gridsizer/structure/graph.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>
#include <tuple>

#include "gridsizer/structure/load_transfer.hpp"

namespace gridsizer::skel {

std::string feature_layout_descriptor(int width) {
  if (width == kFeatureWidthSized) return "p1:3|p2:3|B:1|T:9|L:roof,boundary,tributary_ft2";
  if (width == kFeatureWidthUnsized) return "p1:3|p2:3|B:1|L:roof,boundary,tributary_ft2";
  throw SkeletonError("unsupported feature width " + std::to_string(width));
}

int StructuralGraph::story_count() const {
  return story_of.empty() ? 0 : *std::max_element(story_of.begin(), story_of.end());
}

std::vector<std::vector<int>> StructuralGraph::adjacency() const {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(node_count()));
  for (const auto& [a, b] : edges) {
    adj[static_cast<std::size_t>(a)].push_back(b);
    adj[static_cast<std::size_t>(b)].push_back(a);
  }
  return adj;
}

std::vector<int> bfs_distances(const std::vector<std::vector<int>>& adjacency, int source) {
  std::vector<int> dist(adjacency.size(), -1);
  std::deque<int> queue{source};
  dist[static_cast<std::size_t>(source)] = 0;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (int v : adjacency[static_cast<std::size_t>(u)]) {
      if (dist[static_cast<std::size_t>(v)] >= 0) continue;
      dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
      queue.push_back(v);
    }
  }
  return dist;
}

StructuralGraph to_graph(const Skeleton& sk, const std::optional<std::vector<int>>& sections) {
  if (sections) {
    Skeleton check = sk;
    apply_sections(check, *sections);  // validates count and per-kind range
  }
  const int bars = static_cast<int>(sk.bars.size());
  StructuralGraph g;
  g.feature_width = sections ? kFeatureWidthSized : kFeatureWidthUnsized;
  g.ground_index = bars;
  g.story_of.resize(static_cast<std::size_t>(bars) + 1, 0);
  g.node_features.assign(static_cast<std::size_t>(bars + 1) * g.feature_width, 0.0);

  const auto tributary = tributary_areas(sk);
  const auto boundary = boundary_flags(sk);
  const int aux = aux_offset(g.feature_width);
  for (int b = 0; b < bars; ++b) {
    const auto& bar = sk.bars[static_cast<std::size_t>(b)];
    double* row = g.node_features.data() + static_cast<std::size_t>(b) * g.feature_width;
    row[0] = bar.p1.x;
    row[1] = bar.p1.y;
    row[2] = bar.p1.z;
    row[3] = bar.p2.x;
    row[4] = bar.p2.y;
    row[5] = bar.p2.z;
    row[6] = bar.kind == BarKind::beam ? 1.0 : 0.0;
    if (sections) row[kSectionOffset + (*sections)[static_cast<std::size_t>(b)]] = 1.0;
    row[aux + 0] = bar.story == sk.stories ? 1.0 : 0.0;
    row[aux + 1] = boundary[static_cast<std::size_t>(b)] ? 1.0 : 0.0;
    row[aux + 2] = tributary[static_cast<std::size_t>(b)];
    g.story_of[static_cast<std::size_t>(b)] = bar.story;
  }
  std::fill_n(g.node_features.data() + static_cast<std::size_t>(bars) * g.feature_width,
              g.feature_width, -1.0);

  // Bars sharing a joint are adjacent.
  std::map<std::tuple<double, double, double>, std::vector<int>> at_joint;
  for (int b = 0; b < bars; ++b) {
    const auto& bar = sk.bars[static_cast<std::size_t>(b)];
    at_joint[{bar.p1.x, bar.p1.y, bar.p1.z}].push_back(b);
    at_joint[{bar.p2.x, bar.p2.y, bar.p2.z}].push_back(b);
  }
  std::set<std::pair<int, int>> edges;
  for (const auto& [joint, members] : at_joint) {
    for (std::size_t a = 0; a < members.size(); ++a)
      for (std::size_t c = a + 1; c < members.size(); ++c)
        edges.insert(std::minmax(members[a], members[c]));
  }
  for (int b = 0; b < bars; ++b) {
    const auto& bar = sk.bars[static_cast<std::size_t>(b)];
    if (bar.kind == BarKind::column && bar.story == 1 && std::min(bar.p1.z, bar.p2.z) == 0.0)
      edges.insert({b, bars});
  }
  g.edges.assign(edges.begin(), edges.end());

  const auto dist = bfs_distances(g.adjacency(), g.ground_index);
  const auto unreachable = std::count(dist.begin(), dist.end(), -1);
  if (unreachable > 0)
    throw SkeletonError("skeleton is disconnected: " + std::to_string(unreachable) +
                        " bar(s) have no path to the ground");
  return g;
}

std::vector<Bar> bars_from_graph(const StructuralGraph& g) {
  std::vector<Bar> out;
  for (int n = 0; n < g.node_count(); ++n) {
    if (n == g.ground_index) continue;
    const auto f = g.features(n);
    Bar b;
    b.p1 = {f[0], f[1], f[2]};
    b.p2 = {f[3], f[4], f[5]};
    b.kind = f[6] > 0.5 ? BarKind::beam : BarKind::column;
    b.story = g.story_of[static_cast<std::size_t>(n)];
    if (g.feature_width == kFeatureWidthSized) {
      for (int s = 0; s < kSectionSlots; ++s)
        if (f[static_cast<std::size_t>(kSectionOffset + s)] == 1.0) b.section = s;
    }
    out.push_back(b);
  }
  return out;
}

Skeleton skeleton_from_graph(const StructuralGraph& g) {
  auto bars = bars_from_graph(g);
  if (bars.empty()) throw SkeletonError("graph has no bars");
  std::set<double> xs, ys;
  double h = 0.0;
  int stories = 0;
  for (auto& b : bars) {
    b.section.reset();
    xs.insert({b.p1.x, b.p2.x});
    ys.insert({b.p1.y, b.p2.y});
    if (b.kind == BarKind::column) h = std::max(h, std::abs(b.p2.z - b.p1.z));
    stories = std::max(stories, b.story);
  }
  if (h <= 0.0) throw SkeletonError("graph has no columns");
  if (*xs.begin() < 0.0 || *ys.begin() < 0.0) throw SkeletonError("lattice must lie in the positive quadrant");
  // Lines no bar touches cannot be recovered; an empty leading bay keeps the
  // coordinates where they were.
  xs.insert(0.0);
  ys.insert(0.0);
  Grid grid;
  for (auto a = xs.begin(), b = std::next(a); b != xs.end(); ++a, ++b) grid.x_spans.push_back(*b - *a);
  for (auto a = ys.begin(), b = std::next(a); b != ys.end(); ++a, ++b) grid.y_spans.push_back(*b - *a);
  if (grid.x_spans.empty() || grid.y_spans.empty()) throw SkeletonError("lattice needs at least one bay per axis");

  using Key = std::tuple<int, double, double, double, double, double, double>;
  auto key = [](const Bar& b) {
    auto a = std::make_tuple(b.p1.x, b.p1.y, b.p1.z), c = std::make_tuple(b.p2.x, b.p2.y, b.p2.z);
    if (c < a) std::swap(a, c);
    return Key{static_cast<int>(b.kind), std::get<0>(a), std::get<1>(a), std::get<2>(a),
               std::get<0>(c), std::get<1>(c), std::get<2>(c)};
  };
  std::set<Key> present;
  for (const auto& b : bars) present.insert(key(b));
  const auto xl = grid.x_lines(), yl = grid.y_lines();
  auto has_beam = [&](double x0, double y0, double x1, double y1) {
    Bar b;
    b.kind = BarKind::beam;
    b.p1 = {x0, y0, h};
    b.p2 = {x1, y1, h};
    return present.count(key(b)) != 0;
  };
  std::vector<Cell> cells;
  for (std::size_t i = 0; i + 1 < xl.size(); ++i)
    for (std::size_t j = 0; j + 1 < yl.size(); ++j)
      if (has_beam(xl[i], yl[j], xl[i + 1], yl[j]) && has_beam(xl[i], yl[j + 1], xl[i + 1], yl[j + 1]) &&
          has_beam(xl[i], yl[j], xl[i], yl[j + 1]) && has_beam(xl[i + 1], yl[j], xl[i + 1], yl[j + 1]))
        cells.push_back({static_cast<int>(i), static_cast<int>(j)});
  if (cells.empty()) throw SkeletonError("no closed floor cell found");

  // Rebuilds with `cs` and counts bars whose load features disagree with the
  // graph; -1 when the bar set itself differs.
  const int aux = aux_offset(g.feature_width);
  auto build = [&](const std::vector<Cell>& cs, Skeleton& out) -> int {
    Skeleton sk = build_skeleton(grid, cs, stories, h);
    if (sk.bars.size() != bars.size()) return -1;
    std::map<Key, std::size_t> index;
    for (std::size_t i = 0; i < sk.bars.size(); ++i) index[key(sk.bars[i])] = i;
    std::vector<Bar> ordered;
    for (const auto& b : bars) {
      auto it = index.find(key(b));
      if (it == index.end()) return -1;
      ordered.push_back(sk.bars[it->second]);
    }
    sk.bars = std::move(ordered);
    const auto rebuilt = to_graph(sk);
    int bad = 0, row = 0;
    for (int n = 0; n < g.node_count(); ++n) {
      if (n == g.ground_index) continue;
      const auto f = g.features(n);
      const auto r = rebuilt.features(row++);
      for (int k = 0; k < 3; ++k)
        if (std::abs(f[static_cast<std::size_t>(aux + k)] - r[static_cast<std::size_t>(kFeatureWidthUnsized - 3 + k)]) >
            1e-9) {
          ++bad;
          break;
        }
    }
    out = std::move(sk);
    return bad;
  };
  Skeleton sk;
  int bad = build(cells, sk);
  if (bad < 0) throw SkeletonError("graph bars do not form a grid layout (" + std::to_string(bars.size()) + " bars)");
  // A hole enclosed by occupied cells leaves every one of its edge beams in
  // place; only the floor loads tell it apart. Drop candidates while that
  // reduces the disagreement.
  for (std::size_t c = 0; bad > 0 && c < cells.size();) {
    auto trial = cells;
    trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(c));
    Skeleton t;
    const int tb = build(trial, t);
    if (tb >= 0 && tb < bad) {
      cells = std::move(trial);
      sk = std::move(t);
      bad = tb;
    } else {
      ++c;
    }
  }
  if (bad > 0) throw SkeletonError("load features disagree with the rebuilt layout; send the skeleton instead");
  return sk;
}

StructuralGraph strip_sections(const StructuralGraph& g) {
  if (g.feature_width == kFeatureWidthUnsized) return g;
  StructuralGraph out = g;
  out.feature_width = kFeatureWidthUnsized;
  out.node_features.clear();
  for (int n = 0; n < g.node_count(); ++n) {
    const auto f = g.features(n);
    out.node_features.insert(out.node_features.end(), f.begin(), f.begin() + kSectionOffset);
    out.node_features.insert(out.node_features.end(), f.end() - 3, f.end());
  }
  return out;
}

}  // namespace gridsizer::skel
