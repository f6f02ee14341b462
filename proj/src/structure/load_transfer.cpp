#include "gridsizer/structure/load_transfer.hpp"

#include <map>
#include <set>
#include <tuple>

namespace gridsizer::skel {

namespace {

using EdgeKey = std::tuple<int, double, double, double, double>;

EdgeKey key_of(int story, double xa, double ya, double xb, double yb) {
  return {story, xa, ya, xb, yb};
}

std::map<EdgeKey, std::size_t> beam_index(const Skeleton& sk) {
  std::map<EdgeKey, std::size_t> index;
  for (std::size_t b = 0; b < sk.bars.size(); ++b) {
    const auto& bar = sk.bars[b];
    if (bar.kind != BarKind::beam) continue;
    index.emplace(key_of(bar.story, bar.p1.x, bar.p1.y, bar.p2.x, bar.p2.y), b);
  }
  return index;
}

std::size_t find_beam(const std::map<EdgeKey, std::size_t>& index, int story, double xa, double ya,
                      double xb, double yb) {
  auto it = index.find(key_of(story, xa, ya, xb, yb));
  if (it == index.end()) throw SkeletonError("panel edge has no supporting beam");
  return it->second;
}

}  // namespace

std::vector<PanelTransfer> panel_load_transfer(const Skeleton& sk) {
  const auto index = beam_index(sk);
  std::vector<PanelTransfer> out;
  out.reserve(sk.panels.size());
  for (std::size_t p = 0; p < sk.panels.size(); ++p) {
    const auto& pn = sk.panels[p];
    const std::size_t bottom = find_beam(index, pn.story, pn.x0, pn.y0, pn.x1, pn.y0);
    const std::size_t top = find_beam(index, pn.story, pn.x0, pn.y1, pn.x1, pn.y1);
    const std::size_t left = find_beam(index, pn.story, pn.x0, pn.y0, pn.x0, pn.y1);
    const std::size_t right = find_beam(index, pn.story, pn.x1, pn.y0, pn.x1, pn.y1);
    const double lx = pn.x1 - pn.x0;
    const double ly = pn.y1 - pn.y0;

    PanelTransfer t;
    t.panel = p;
    // Square panels take the x edges as the long ones.
    const bool x_long = lx >= ly;
    const double a = x_long ? lx : ly;
    const std::size_t long1 = x_long ? bottom : left;
    const std::size_t long2 = x_long ? top : right;
    const std::size_t short1 = x_long ? left : bottom;
    const std::size_t short2 = x_long ? right : top;
    for (double q : {0.25, 0.5, 0.75}) {
      t.points.push_back({long1, q * a, 0.125});
      t.points.push_back({long2, q * a, 0.125});
    }
    t.lines.push_back({short1, 0.125});
    t.lines.push_back({short2, 0.125});
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<double> tributary_areas(const Skeleton& sk) {
  std::vector<double> area(sk.bars.size(), 0.0);
  for (const auto& t : panel_load_transfer(sk)) {
    const double a = sk.panels[t.panel].area();
    for (const auto& s : t.points) area[s.bar] += s.fraction * a;
    for (const auto& s : t.lines) area[s.bar] += s.fraction * a;
  }
  return area;
}

std::vector<bool> boundary_flags(const Skeleton& sk) {
  // Count, per lattice edge, how many occupied cells border it.
  std::map<std::tuple<int, int, int>, int> edge_use;
  for (const auto& c : sk.cells) {
    ++edge_use[{c.i, c.j, 0}];
    ++edge_use[{c.i, c.j + 1, 0}];
    ++edge_use[{c.i, c.j, 1}];
    ++edge_use[{c.i + 1, c.j, 1}];
  }
  const auto xs = sk.grid.x_lines();
  const auto ys = sk.grid.y_lines();
  std::map<double, int> xi, yi;
  for (std::size_t i = 0; i < xs.size(); ++i) xi[xs[i]] = static_cast<int>(i);
  for (std::size_t j = 0; j < ys.size(); ++j) yi[ys[j]] = static_cast<int>(j);

  std::set<std::pair<int, int>> perimeter_joints;
  for (const auto& [edge, uses] : edge_use) {
    if (uses != 1) continue;
    const auto [i, j, dir] = edge;
    perimeter_joints.insert({i, j});
    perimeter_joints.insert(dir == 0 ? std::pair{i + 1, j} : std::pair{i, j + 1});
  }

  std::vector<bool> flags(sk.bars.size(), false);
  for (std::size_t b = 0; b < sk.bars.size(); ++b) {
    const auto& bar = sk.bars[b];
    const int i1 = xi.at(bar.p1.x), j1 = yi.at(bar.p1.y);
    if (bar.kind == BarKind::column) {
      flags[b] = perimeter_joints.count({i1, j1}) > 0;
    } else {
      const int dir = bar.p1.y == bar.p2.y ? 0 : 1;
      auto it = edge_use.find({i1, j1, dir});
      flags[b] = it != edge_use.end() && it->second == 1;
    }
  }
  return flags;
}

}  // namespace gridsizer::skel
