#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include "doctest.h"
#include "gridsizer/structure/graph.hpp"
#include "gridsizer/structure/json_io.hpp"
#include "gridsizer/structure/load_transfer.hpp"
#include "gridsizer/structure/skeleton.hpp"

using namespace gridsizer::skel;

namespace {

Skeleton one_cell(int stories = 1, double sx = 30.0, double sy = 30.0) {
  return build_skeleton(Grid{{sx}, {sy}}, {{0, 0}}, stories);
}

Skeleton two_by_two(int stories = 1) {
  return build_skeleton(Grid{{30, 30}, {30, 30}}, {{0, 0}, {0, 1}, {1, 0}, {1, 1}}, stories);
}

bool on_lattice(const Grid& g, const Point3& p) {
  const auto xs = g.x_lines();
  const auto ys = g.y_lines();
  return std::find(xs.begin(), xs.end(), p.x) != xs.end() && std::find(ys.begin(), ys.end(), p.y) != ys.end();
}

}  // namespace

TEST_CASE("seed 7 skeleton respects the sampling ranges") {
  const auto sk = sample_skeleton(7);
  CHECK(sk.stories >= 1);
  CHECK(sk.stories <= 10);
  CHECK(sk.story_height == 16.0);
  for (double s : sk.grid.x_spans) CHECK((s >= 28.0 && s <= 40.0 && s == std::floor(s)));
  for (double s : sk.grid.y_spans) CHECK((s >= 28.0 && s <= 40.0 && s == std::floor(s)));
  for (const auto& b : sk.bars) {
    CHECK(on_lattice(sk.grid, b.p1));
    CHECK(on_lattice(sk.grid, b.p2));
    CHECK(b.length() > 0.0);
    if (b.kind == BarKind::column) {
      CHECK(b.p1.x == b.p2.x);
      CHECK(b.p1.y == b.p2.y);
    } else {
      CHECK(b.p1.z == b.p2.z);
    }
  }
}

TEST_CASE("sampling is deterministic per seed") {
  CHECK(sample_skeleton(7) == sample_skeleton(7));
  CHECK(skeleton_to_json(sample_skeleton(7)).dump() == skeleton_to_json(sample_skeleton(7)).dump());
  CHECK_FALSE(sample_skeleton(7) == sample_skeleton(8));
}

TEST_CASE("forced 1x1 grid with one story is the minimal voxel") {
  SkeletonConfig cfg;
  cfg.forced_bays = std::array<int, 2>{1, 1};
  cfg.stories_min = cfg.stories_max = 1;
  const auto sk = sample_skeleton(3, cfg);
  CHECK(sk.column_count() == 4);
  CHECK(sk.beam_count() == 4);
  CHECK(sk.panels.size() == 1);
}

TEST_CASE("config validation") {
  SkeletonConfig cfg;
  cfg.spans.clear();
  CHECK_THROWS_AS(sample_skeleton(1, cfg), SkeletonError);
  cfg = {};
  cfg.stories_min = 0;
  CHECK_THROWS_AS(sample_skeleton(1, cfg), SkeletonError);
  cfg = {};
  cfg.stories_max = 0;
  CHECK_THROWS_AS(sample_skeleton(1, cfg), SkeletonError);
  cfg = {};
  cfg.spans = {20.0};
  CHECK_THROWS_AS(sample_skeleton(1, cfg), SkeletonError);
}

TEST_CASE("layout is connected and replicated on every story; panels tile the cells") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto sk = sample_skeleton(seed);
    // Connectivity of the cell layout by flood fill.
    std::set<Cell> cells(sk.cells.begin(), sk.cells.end());
    std::set<Cell> seen{sk.cells.front()};
    std::vector<Cell> stack{sk.cells.front()};
    while (!stack.empty()) {
      const auto c = stack.back();
      stack.pop_back();
      for (const Cell n : {Cell{c.i + 1, c.j}, Cell{c.i - 1, c.j}, Cell{c.i, c.j + 1}, Cell{c.i, c.j - 1}})
        if (cells.count(n) && seen.insert(n).second) stack.push_back(n);
    }
    CHECK(seen.size() == cells.size());

    CHECK(sk.panels.size() == sk.cells.size() * static_cast<std::size_t>(sk.stories));
    double layout_area = 0.0;
    const auto xs = sk.grid.x_lines();
    const auto ys = sk.grid.y_lines();
    for (const auto& c : sk.cells) layout_area += (xs[c.i + 1] - xs[c.i]) * (ys[c.j + 1] - ys[c.j]);
    for (int k = 1; k <= sk.stories; ++k) {
      double a = 0.0;
      std::set<Cell> covered;
      for (const auto& p : sk.panels)
        if (p.story == k) {
          a += p.area();
          covered.insert(p.cell);
          CHECK(p.x0 == xs[p.cell.i]);
          CHECK(p.x1 == xs[p.cell.i + 1]);
          CHECK(p.y0 == ys[p.cell.j]);
          CHECK(p.y1 == ys[p.cell.j + 1]);
        }
      CHECK(covered == cells);
      CHECK(a == doctest::Approx(layout_area));
    }
    // Every story has the same bar count.
    std::vector<int> per_story(static_cast<std::size_t>(sk.stories) + 1, 0);
    for (const auto& b : sk.bars) ++per_story[static_cast<std::size_t>(b.story)];
    for (int k = 2; k <= sk.stories; ++k) CHECK(per_story[static_cast<std::size_t>(k)] == per_story[1]);
  }
}

TEST_CASE("sampler statistics over 1000 seeds") {
  std::set<int> stories;
  int min_nodes = 1 << 30;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto sk = sample_skeleton(seed);
    stories.insert(sk.stories);
    min_nodes = std::min(min_nodes, static_cast<int>(sk.bars.size()) + 1);
  }
  CHECK(stories.size() == 10);
  CHECK(*stories.begin() == 1);
  CHECK(*stories.rbegin() == 10);
  CHECK(min_nodes >= 9);
}

TEST_CASE("one-cell one-story graph has 9 nodes and the ground joins the 4 columns") {
  const auto g = to_graph(one_cell());
  CHECK(g.node_count() == 9);
  CHECK(g.feature_width == kFeatureWidthUnsized);
  const auto adj = g.adjacency();
  const auto& ground = adj[static_cast<std::size_t>(g.ground_index)];
  CHECK(ground.size() == 4);
  for (int n : ground) CHECK(g.features(n)[6] == 0.0);  // B = 0 for columns
  for (double v : g.features(g.ground_index)) CHECK(v == -1.0);
}

TEST_CASE("sized graphs have width 19 with a one-hot section block") {
  const auto sk = sample_skeleton(11);
  const auto sections = assign_random_sections(sk, 5);
  const auto g = to_graph(sk, sections);
  CHECK(g.feature_width == kFeatureWidthSized);
  for (int n = 0; n < g.bar_count(); ++n) {
    const auto f = g.features(n);
    double sum = 0.0;
    for (int s = 0; s < kSectionSlots; ++s) sum += f[static_cast<std::size_t>(kSectionOffset + s)];
    CHECK(sum == 1.0);
    CHECK(f[static_cast<std::size_t>(kSectionOffset + sections[static_cast<std::size_t>(n)])] == 1.0);
  }
  CHECK(strip_sections(g).feature_width == kFeatureWidthUnsized);
  CHECK(strip_sections(g).node_features == to_graph(sk).node_features);
}

TEST_CASE("boundary flag separates perimeter beams from the shared interior beams") {
  const auto sk = two_by_two();
  const auto flags = boundary_flags(sk);
  const auto g = to_graph(sk);
  const int aux = aux_offset(g.feature_width);
  int interior = 0;
  for (std::size_t b = 0; b < sk.bars.size(); ++b) {
    const auto& bar = sk.bars[b];
    if (bar.kind != BarKind::beam) continue;
    const bool inner = (bar.p1.x == 30.0 && bar.p2.x == 30.0) || (bar.p1.y == 30.0 && bar.p2.y == 30.0);
    CHECK(flags[b] == !inner);
    CHECK(g.features(static_cast<int>(b))[static_cast<std::size_t>(aux + 1)] == (inner ? 0.0 : 1.0));
    interior += inner;
  }
  CHECK(interior == 4);
}

TEST_CASE("roof flag marks exactly the top story") {
  const auto sk = two_by_two(3);
  const auto g = to_graph(sk);
  const int aux = aux_offset(g.feature_width);
  for (std::size_t b = 0; b < sk.bars.size(); ++b)
    CHECK(g.features(static_cast<int>(b))[static_cast<std::size_t>(aux)] == (sk.bars[b].story == 3 ? 1.0 : 0.0));
}

TEST_CASE("tributary areas: beams carry all panel area, columns none") {
  for (std::uint64_t seed : {1u, 4u, 9u}) {
    const auto sk = sample_skeleton(seed);
    const auto trib = tributary_areas(sk);
    double total = 0.0, panels = 0.0;
    for (std::size_t b = 0; b < sk.bars.size(); ++b) {
      CHECK(trib[b] >= 0.0);
      if (sk.bars[b].kind == BarKind::column) CHECK(trib[b] == 0.0);
      total += trib[b];
    }
    for (const auto& p : sk.panels) panels += p.area();
    CHECK(total == doctest::Approx(panels).epsilon(1e-12));
  }
}

TEST_CASE("panel transfer: joists span the short direction at quarter points") {
  const auto sk = one_cell(1, 36.0, 28.0);
  const auto tr = panel_load_transfer(sk);
  REQUIRE(tr.size() == 1);
  double sum = 0.0;
  for (const auto& s : tr[0].points) {
    const auto& bar = sk.bars[s.bar];
    CHECK(bar.p1.y == bar.p2.y);  // long edges run along x
    CHECK(std::set<double>{9.0, 18.0, 27.0}.count(s.offset) == 1);
    sum += s.fraction;
  }
  for (const auto& s : tr[0].lines) {
    const auto& bar = sk.bars[s.bar];
    CHECK(bar.p1.x == bar.p2.x);
    sum += s.fraction;
  }
  CHECK(tr[0].points.size() == 6);
  CHECK(tr[0].lines.size() == 2);
  CHECK(sum == doctest::Approx(1.0));
}

TEST_CASE("graph invariants on random skeletons") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto sk = sample_skeleton(seed);
    const auto g = to_graph(sk, assign_random_sections(sk, seed));
    std::set<std::pair<int, int>> edges(g.edges.begin(), g.edges.end());
    CHECK(edges.size() == g.edges.size());
    for (const auto& [a, b] : g.edges) CHECK(a < b);
    const auto adj = g.adjacency();
    for (int a = 0; a < g.node_count(); ++a)
      for (int b : adj[static_cast<std::size_t>(a)]) {
        CHECK(a != b);
        const auto& back = adj[static_cast<std::size_t>(b)];
        CHECK(std::find(back.begin(), back.end(), a) != back.end());
      }
    const auto dist = bfs_distances(adj, g.ground_index);
    CHECK(std::none_of(dist.begin(), dist.end(), [](int d) { return d < 0; }));
    // Ground connects to exactly the first-story columns.
    std::set<int> ground(adj[static_cast<std::size_t>(g.ground_index)].begin(),
                         adj[static_cast<std::size_t>(g.ground_index)].end());
    std::set<int> first;
    for (std::size_t b = 0; b < sk.bars.size(); ++b)
      if (sk.bars[b].kind == BarKind::column && sk.bars[b].story == 1) first.insert(static_cast<int>(b));
    CHECK(ground == first);
    // Story index follows height.
    for (int n = 0; n < g.bar_count(); ++n)
      for (int m = 0; m < g.bar_count(); ++m) {
        const double zn = std::max(g.features(n)[2], g.features(n)[5]);
        const double zm = std::max(g.features(m)[2], g.features(m)[5]);
        if (zn > zm) CHECK(g.story_of[static_cast<std::size_t>(n)] >= g.story_of[static_cast<std::size_t>(m)]);
      }
    CHECK(g.story_of[static_cast<std::size_t>(g.ground_index)] == 0);
  }
}

TEST_CASE("feature round trip reproduces the bar list") {
  auto sk = sample_skeleton(21);
  const auto sections = assign_random_sections(sk, 77);
  apply_sections(sk, sections);
  const auto back = bars_from_graph(to_graph(sk, sections));
  CHECK(back == sk.bars);
}

TEST_CASE("disconnected skeleton is rejected") {
  auto sk = one_cell(2);
  // Drop every second-story column: the roof beams float.
  std::erase_if(sk.bars, [](const Bar& b) { return b.kind == BarKind::column && b.story == 2; });
  CHECK_THROWS_AS(to_graph(sk), SkeletonError);
}

TEST_CASE("random sections stay within each sub-library and are deterministic") {
  const auto sk = sample_skeleton(5);
  const auto a = assign_random_sections(sk, 9);
  CHECK(a == assign_random_sections(sk, 9));
  for (std::size_t b = 0; b < sk.bars.size(); ++b) {
    CHECK(a[b] >= 0);
    CHECK(a[b] < sections_for(sk.bars[b].kind));
  }
}

TEST_CASE("random sections are uniform within 2 percent over 1e5 draws") {
  const auto sk = one_cell(1);  // 4 columns, 4 beams
  std::array<double, kColumnSections> col{};
  std::array<double, kBeamSections> beam{};
  double n_col = 0, n_beam = 0;
  for (std::uint64_t seed = 0; n_col < 1e5; ++seed) {
    const auto s = assign_random_sections(sk, seed);
    for (std::size_t b = 0; b < s.size(); ++b) {
      if (sk.bars[b].kind == BarKind::column) {
        col[static_cast<std::size_t>(s[b])] += 1;
        n_col += 1;
      } else {
        beam[static_cast<std::size_t>(s[b])] += 1;
        n_beam += 1;
      }
    }
  }
  double chi2 = 0.0;
  for (double c : col) {
    CHECK(std::abs(c / n_col - 1.0 / kColumnSections) < 0.02);
    const double e = n_col / kColumnSections;
    chi2 += (c - e) * (c - e) / e;
  }
  CHECK(chi2 < 18.47);  // chi-square, 4 dof, p = 0.001
  chi2 = 0.0;
  for (double c : beam) {
    CHECK(std::abs(c / n_beam - 1.0 / kBeamSections) < 0.02);
    const double e = n_beam / kBeamSections;
    chi2 += (c - e) * (c - e) / e;
  }
  CHECK(chi2 < 26.12);  // 8 dof, p = 0.001
}

TEST_CASE("skeleton JSON round trip") {
  auto sk = sample_skeleton(13);
  apply_sections(sk, assign_random_sections(sk, 2));
  const auto j = skeleton_to_json(sk);
  CHECK(skeleton_from_json(j) == sk);

  auto layout_only = j;
  layout_only.erase("bars");
  layout_only.erase("panels");
  auto rebuilt = skeleton_from_json(layout_only);
  apply_sections(rebuilt, assign_random_sections(sk, 2));
  CHECK(rebuilt == sk);
}

TEST_CASE("skeleton JSON errors carry a JSON pointer") {
  auto j = skeleton_to_json(one_cell());
  j["bars"][2]["kind"] = "strut";
  try {
    (void)skeleton_from_json(j);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(e.pointer() == "/bars/2/kind");
  }
  j = skeleton_to_json(one_cell());
  j.erase("grid");
  try {
    (void)skeleton_from_json(j);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(e.pointer() == "/grid");
  }
}

TEST_CASE("graph JSON round trip") {
  const auto sk = sample_skeleton(3);
  const auto g = to_graph(sk, assign_random_sections(sk, 1));
  const auto back = graph_from_json(graph_to_json(g));
  CHECK(back.node_features == g.node_features);
  CHECK(back.edges == g.edges);
  CHECK(back.story_of == g.story_of);
  CHECK(back.ground_index == g.ground_index);
}

TEST_CASE("skeleton rebuilt from its graph matches the original layout") {
  for (std::uint64_t seed = 300; seed < 320; ++seed) {
    auto sk = sample_skeleton(seed);
    const auto sections = assign_random_sections(sk, seed);
    const auto back = skeleton_from_graph(to_graph(sk, sections));
    CHECK(back.stories == sk.stories);
    CHECK(back.cells.size() == sk.cells.size());
    REQUIRE(back.bars.size() == sk.bars.size());
    for (std::size_t i = 0; i < sk.bars.size(); ++i) {
      CHECK(back.bars[i].p1 == sk.bars[i].p1);
      CHECK(back.bars[i].p2 == sk.bars[i].p2);
      CHECK(back.bars[i].kind == sk.bars[i].kind);
      CHECK_FALSE(back.bars[i].section.has_value());
    }
    CHECK(to_graph(back, sections).node_features == to_graph(sk, sections).node_features);
  }
}

TEST_CASE("graphs that are not grid skeletons are rejected") {
  const auto sk = sample_skeleton(7);
  auto g = to_graph(sk);
  SUBCASE("load features edited") {
    g.node_features[static_cast<std::size_t>(aux_offset(g.feature_width))] += 0.5;
    CHECK_THROWS_AS(skeleton_from_graph(g), SkeletonError);
  }
  SUBCASE("a bar removed") {
    g.node_features.erase(g.node_features.begin(), g.node_features.begin() + g.feature_width);
    g.story_of.erase(g.story_of.begin());
    g.ground_index -= 1;
    CHECK_THROWS_AS(skeleton_from_graph(g), SkeletonError);
  }
}
