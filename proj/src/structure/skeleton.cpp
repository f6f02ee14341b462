#include "gridsizer/structure/skeleton.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <tuple>

namespace gridsizer::skel {

std::string to_string(BarKind kind) { return kind == BarKind::column ? "column" : "beam"; }

BarKind bar_kind_from_string(const std::string& name) {
  if (name == "column") return BarKind::column;
  if (name == "beam") return BarKind::beam;
  throw SkeletonError("unknown bar kind '" + name + "'");
}

double Bar::length() const {
  return std::hypot(p2.x - p1.x, p2.y - p1.y, p2.z - p1.z);
}

namespace {

std::vector<double> cumulative(const std::vector<double>& spans) {
  std::vector<double> lines(spans.size() + 1, 0.0);
  std::partial_sum(spans.begin(), spans.end(), lines.begin() + 1);
  return lines;
}

}  // namespace

std::vector<double> Grid::x_lines() const { return cumulative(x_spans); }
std::vector<double> Grid::y_lines() const { return cumulative(y_spans); }

std::size_t Skeleton::column_count() const {
  return static_cast<std::size_t>(std::count_if(
      bars.begin(), bars.end(), [](const Bar& b) { return b.kind == BarKind::column; }));
}

std::size_t Skeleton::beam_count() const { return bars.size() - column_count(); }

void SkeletonConfig::validate() const {
  if (spans.empty()) throw SkeletonError("skeleton config: span set is empty");
  if (stories_min < 1 || stories_max < stories_min)
    throw SkeletonError("skeleton config: story range must satisfy 1 <= min <= max");
  if (stories_max > 10) throw SkeletonError("skeleton config: at most 10 stories");
  for (double s : spans)
    if (s < 28.0 || s > 40.0) throw SkeletonError("skeleton config: spans must lie in [28, 40] ft");
  if (base_min < 60.0 || base_max > 400.0 || base_max < base_min)
    throw SkeletonError("skeleton config: base edge bounds must lie in [60, 400] ft");
  if (!(expand_probability >= 0.0 && expand_probability <= 1.0))
    throw SkeletonError("skeleton config: expand probability outside [0, 1]");
  if (forced_bays && ((*forced_bays)[0] < 1 || (*forced_bays)[1] < 1))
    throw SkeletonError("skeleton config: forced grid needs at least one bay per axis");
  if (story_height <= 0.0) throw SkeletonError("skeleton config: story height must be positive");
}

Skeleton build_skeleton(const Grid& grid, std::vector<Cell> cells, int stories,
                        double story_height) {
  if (cells.empty()) throw SkeletonError("layout has no cells");
  if (stories < 1) throw SkeletonError("skeleton needs at least one story");
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());

  const auto xs = grid.x_lines();
  const auto ys = grid.y_lines();
  for (const auto& c : cells) {
    if (c.i < 0 || c.j < 0 || c.i >= static_cast<int>(grid.x_spans.size()) ||
        c.j >= static_cast<int>(grid.y_spans.size()))
      throw SkeletonError("layout cell outside the grid");
  }

  // Lattice joints and beam edges touched by the layout. Edges are keyed by
  // their lower lattice endpoint plus a direction flag (0 = along x).
  std::set<std::pair<int, int>> joints;
  std::set<std::tuple<int, int, int>> edges;
  for (const auto& c : cells) {
    joints.insert({c.i, c.j});
    joints.insert({c.i + 1, c.j});
    joints.insert({c.i, c.j + 1});
    joints.insert({c.i + 1, c.j + 1});
    edges.insert({c.i, c.j, 0});
    edges.insert({c.i, c.j + 1, 0});
    edges.insert({c.i, c.j, 1});
    edges.insert({c.i + 1, c.j, 1});
  }

  Skeleton sk;
  sk.stories = stories;
  sk.story_height = story_height;
  sk.grid = grid;
  sk.cells = cells;
  for (int k = 1; k <= stories; ++k) {
    const double z0 = (k - 1) * story_height;
    const double z1 = k * story_height;
    for (const auto& [i, j] : joints) {
      Bar b;
      b.kind = BarKind::column;
      b.story = k;
      b.p1 = {xs[i], ys[j], z0};
      b.p2 = {xs[i], ys[j], z1};
      sk.bars.push_back(b);
    }
    for (const auto& [i, j, dir] : edges) {
      Bar b;
      b.kind = BarKind::beam;
      b.story = k;
      b.p1 = {xs[i], ys[j], z1};
      b.p2 = dir == 0 ? Point3{xs[i + 1], ys[j], z1} : Point3{xs[i], ys[j + 1], z1};
      sk.bars.push_back(b);
    }
    for (const auto& c : cells) {
      sk.panels.push_back(Panel{k, c, xs[c.i], ys[c.j], xs[c.i + 1], ys[c.j + 1]});
    }
  }
  return sk;
}

Skeleton sample_skeleton(std::uint64_t seed, const SkeletonConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_span(0, cfg.spans.size() - 1);

  auto fill_axis = [&](double extent) {
    std::vector<double> spans;
    double total = 0.0;
    for (;;) {
      const double s = cfg.spans[pick_span(rng)];
      if (!spans.empty() && total + s > extent) break;
      spans.push_back(s);
      total += s;
    }
    return spans;
  };

  Grid grid;
  if (cfg.forced_bays) {
    for (int n = 0; n < (*cfg.forced_bays)[0]; ++n) grid.x_spans.push_back(cfg.spans[pick_span(rng)]);
    for (int n = 0; n < (*cfg.forced_bays)[1]; ++n) grid.y_spans.push_back(cfg.spans[pick_span(rng)]);
  } else {
    std::uniform_real_distribution<double> edge(cfg.base_min, cfg.base_max);
    const double wx = edge(rng);
    const double wy = edge(rng);
    grid.x_spans = fill_axis(wx);
    grid.y_spans = fill_axis(wy);
  }

  const int nx = static_cast<int>(grid.x_spans.size());
  const int ny = static_cast<int>(grid.y_spans.size());
  std::vector<Cell> cells;
  if (cfg.forced_bays) {
    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < ny; ++j) cells.push_back({i, j});
  } else {
    std::vector<char> visited(static_cast<std::size_t>(nx * ny), 0);
    std::uniform_int_distribution<int> pick_i(0, nx - 1), pick_j(0, ny - 1);
    std::bernoulli_distribution expand(cfg.expand_probability);
    const Cell start{pick_i(rng), pick_j(rng)};

    // Iterative DFS; each unvisited neighbour is entered with the expand probability.
    struct Frame {
      Cell cell;
      std::array<int, 4> order;
      int next = 0;
    };
    auto make_frame = [&](Cell c) {
      Frame f{c, {0, 1, 2, 3}, 0};
      std::shuffle(f.order.begin(), f.order.end(), rng);
      return f;
    };
    constexpr int di[4] = {1, -1, 0, 0};
    constexpr int dj[4] = {0, 0, 1, -1};
    std::vector<Frame> stack;
    visited[static_cast<std::size_t>(start.i * ny + start.j)] = 1;
    cells.push_back(start);
    stack.push_back(make_frame(start));
    while (!stack.empty()) {
      Frame& top = stack.back();
      if (top.next == 4) {
        stack.pop_back();
        continue;
      }
      const int d = top.order[top.next++];
      const Cell n{top.cell.i + di[d], top.cell.j + dj[d]};
      if (n.i < 0 || n.j < 0 || n.i >= nx || n.j >= ny) continue;
      auto& seen = visited[static_cast<std::size_t>(n.i * ny + n.j)];
      if (seen || !expand(rng)) continue;
      seen = 1;
      cells.push_back(n);
      stack.push_back(make_frame(n));
    }
  }

  std::uniform_int_distribution<int> pick_stories(cfg.stories_min, cfg.stories_max);
  const int stories = pick_stories(rng);
  return build_skeleton(grid, std::move(cells), stories, cfg.story_height);
}

std::vector<int> assign_random_sections(const Skeleton& sk, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> column(0, kColumnSections - 1);
  std::uniform_int_distribution<int> beam(0, kBeamSections - 1);
  std::vector<int> out;
  out.reserve(sk.bars.size());
  for (const auto& b : sk.bars) out.push_back(b.kind == BarKind::column ? column(rng) : beam(rng));
  return out;
}

void apply_sections(Skeleton& sk, const std::vector<int>& sections) {
  if (sections.size() != sk.bars.size())
    throw SkeletonError("section count " + std::to_string(sections.size()) +
                        " does not match bar count " + std::to_string(sk.bars.size()));
  for (std::size_t i = 0; i < sections.size(); ++i) {
    if (sections[i] < 0 || sections[i] >= sections_for(sk.bars[i].kind))
      throw SkeletonError("bar " + std::to_string(i) + ": section index " +
                          std::to_string(sections[i]) + " invalid for a " +
                          to_string(sk.bars[i].kind));
    sk.bars[i].section = sections[i];
  }
}

}  // namespace gridsizer::skel
