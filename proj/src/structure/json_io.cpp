#include "gridsizer/structure/json_io.hpp"

namespace gridsizer::skel {

using nlohmann::json;

namespace {

const json& require(const json& obj, const std::string& key, const std::string& ptr) {
  if (!obj.is_object()) throw SchemaError(ptr.empty() ? "/" : ptr, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(ptr + "/" + key, "missing required field");
  return *it;
}

double number(const json& v, const std::string& ptr) {
  if (!v.is_number()) throw SchemaError(ptr, "expected a number");
  return v.get<double>();
}

int integer(const json& v, const std::string& ptr) {
  if (!v.is_number_integer()) throw SchemaError(ptr, "expected an integer");
  return v.get<int>();
}

const json& array(const json& v, const std::string& ptr, std::size_t exact = 0) {
  if (!v.is_array()) throw SchemaError(ptr, "expected an array");
  if (exact != 0 && v.size() != exact)
    throw SchemaError(ptr, "expected " + std::to_string(exact) + " elements");
  return v;
}

Point3 point(const json& v, const std::string& ptr) {
  array(v, ptr, 3);
  return {number(v[0], ptr + "/0"), number(v[1], ptr + "/1"), number(v[2], ptr + "/2")};
}

std::vector<double> numbers(const json& v, const std::string& ptr) {
  array(v, ptr);
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], ptr + "/" + std::to_string(i)));
  return out;
}

Cell cell(const json& v, const std::string& ptr) {
  array(v, ptr, 2);
  return {integer(v[0], ptr + "/0"), integer(v[1], ptr + "/1")};
}

}  // namespace

json skeleton_to_json(const Skeleton& sk) {
  json bars = json::array();
  for (const auto& b : sk.bars) {
    json jb = {{"p1", {b.p1.x, b.p1.y, b.p1.z}},
               {"p2", {b.p2.x, b.p2.y, b.p2.z}},
               {"kind", to_string(b.kind)},
               {"story", b.story}};
    if (b.section) jb["section"] = *b.section;
    bars.push_back(std::move(jb));
  }
  json cells = json::array();
  for (const auto& c : sk.cells) cells.push_back({c.i, c.j});
  json panels = json::array();
  for (const auto& p : sk.panels)
    panels.push_back({{"story", p.story}, {"cell", {p.cell.i, p.cell.j}}, {"rect", {p.x0, p.y0, p.x1, p.y1}}});
  return {{"stories", sk.stories},
          {"story_height", sk.story_height},
          {"grid", {{"x_spans", sk.grid.x_spans}, {"y_spans", sk.grid.y_spans}}},
          {"cells", std::move(cells)},
          {"bars", std::move(bars)},
          {"panels", std::move(panels)}};
}

Skeleton skeleton_from_json(const json& j, const std::string& base) {
  const int stories = integer(require(j, "stories", base), base + "/stories");
  if (stories < 1 || stories > 10) throw SchemaError(base + "/stories", "must lie in 1..10");
  double story_height = 16.0;
  if (j.contains("story_height")) story_height = number(j["story_height"], base + "/story_height");
  if (story_height <= 0.0) throw SchemaError(base + "/story_height", "must be positive");

  const auto& jg = require(j, "grid", base);
  Grid grid;
  grid.x_spans = numbers(require(jg, "x_spans", base + "/grid"), base + "/grid/x_spans");
  grid.y_spans = numbers(require(jg, "y_spans", base + "/grid"), base + "/grid/y_spans");
  for (std::size_t i = 0; i < grid.x_spans.size(); ++i)
    if (grid.x_spans[i] <= 0.0) throw SchemaError(base + "/grid/x_spans/" + std::to_string(i), "span must be positive");
  for (std::size_t i = 0; i < grid.y_spans.size(); ++i)
    if (grid.y_spans[i] <= 0.0) throw SchemaError(base + "/grid/y_spans/" + std::to_string(i), "span must be positive");

  const auto& jc = array(require(j, "cells", base), base + "/cells");
  std::vector<Cell> cells;
  for (std::size_t i = 0; i < jc.size(); ++i) {
    const auto ptr = base + "/cells/" + std::to_string(i);
    Cell c = cell(jc[i], ptr);
    if (c.i < 0 || c.j < 0 || c.i >= static_cast<int>(grid.x_spans.size()) ||
        c.j >= static_cast<int>(grid.y_spans.size()))
      throw SchemaError(ptr, "cell outside the grid");
    cells.push_back(c);
  }
  if (cells.empty()) throw SchemaError(base + "/cells", "layout has no cells");

  if (!j.contains("bars")) return build_skeleton(grid, std::move(cells), stories, story_height);

  Skeleton sk;
  sk.stories = stories;
  sk.story_height = story_height;
  sk.grid = std::move(grid);
  sk.cells = std::move(cells);
  const auto& jb = array(j["bars"], base + "/bars");
  for (std::size_t i = 0; i < jb.size(); ++i) {
    const auto ptr = base + "/bars/" + std::to_string(i);
    Bar b;
    b.p1 = point(require(jb[i], "p1", ptr), ptr + "/p1");
    b.p2 = point(require(jb[i], "p2", ptr), ptr + "/p2");
    const auto& kind = require(jb[i], "kind", ptr);
    if (!kind.is_string() || (kind != "column" && kind != "beam"))
      throw SchemaError(ptr + "/kind", "expected \"column\" or \"beam\"");
    b.kind = bar_kind_from_string(kind.get<std::string>());
    b.story = integer(require(jb[i], "story", ptr), ptr + "/story");
    if (b.story < 1 || b.story > stories) throw SchemaError(ptr + "/story", "story outside 1..stories");
    if (b.length() <= 0.0) throw SchemaError(ptr, "bar has zero length");
    if (b.kind == BarKind::column && (b.p1.x != b.p2.x || b.p1.y != b.p2.y))
      throw SchemaError(ptr, "column is not vertical");
    if (b.kind == BarKind::beam && b.p1.z != b.p2.z) throw SchemaError(ptr, "beam is not horizontal");
    if (jb[i].contains("section")) {
      const int s = integer(jb[i]["section"], ptr + "/section");
      if (s < 0 || s >= sections_for(b.kind)) throw SchemaError(ptr + "/section", "section index out of range");
      b.section = s;
    }
    sk.bars.push_back(b);
  }
  if (j.contains("panels")) {
    const auto& jp = array(j["panels"], base + "/panels");
    for (std::size_t i = 0; i < jp.size(); ++i) {
      const auto ptr = base + "/panels/" + std::to_string(i);
      Panel p;
      p.story = integer(require(jp[i], "story", ptr), ptr + "/story");
      p.cell = cell(require(jp[i], "cell", ptr), ptr + "/cell");
      const auto& r = array(require(jp[i], "rect", ptr), ptr + "/rect", 4);
      p.x0 = number(r[0], ptr + "/rect/0");
      p.y0 = number(r[1], ptr + "/rect/1");
      p.x1 = number(r[2], ptr + "/rect/2");
      p.y1 = number(r[3], ptr + "/rect/3");
      sk.panels.push_back(p);
    }
  }
  return sk;
}

json graph_to_json(const StructuralGraph& g) {
  json rows = json::array();
  for (int n = 0; n < g.node_count(); ++n) {
    const auto f = g.features(n);
    rows.push_back(std::vector<double>(f.begin(), f.end()));
  }
  json edges = json::array();
  for (const auto& [a, b] : g.edges) edges.push_back({a, b});
  return {{"feature_width", g.feature_width},
          {"node_features", std::move(rows)},
          {"edges", std::move(edges)},
          {"story_of", g.story_of},
          {"ground_index", g.ground_index}};
}

StructuralGraph graph_from_json(const json& j, const std::string& base) {
  StructuralGraph g;
  g.feature_width = integer(require(j, "feature_width", base), base + "/feature_width");
  if (g.feature_width != kFeatureWidthSized && g.feature_width != kFeatureWidthUnsized)
    throw SchemaError(base + "/feature_width", "must be 10 or 19");
  const auto& rows = array(require(j, "node_features", base), base + "/node_features");
  for (std::size_t n = 0; n < rows.size(); ++n) {
    const auto ptr = base + "/node_features/" + std::to_string(n);
    array(rows[n], ptr, static_cast<std::size_t>(g.feature_width));
    for (std::size_t c = 0; c < rows[n].size(); ++c) g.node_features.push_back(number(rows[n][c], ptr + "/" + std::to_string(c)));
  }
  const auto& so = array(require(j, "story_of", base), base + "/story_of", rows.size());
  for (std::size_t n = 0; n < so.size(); ++n) g.story_of.push_back(integer(so[n], base + "/story_of/" + std::to_string(n)));
  g.ground_index = integer(require(j, "ground_index", base), base + "/ground_index");
  if (g.ground_index < 0 || g.ground_index >= static_cast<int>(rows.size()))
    throw SchemaError(base + "/ground_index", "out of range");
  const auto& je = array(require(j, "edges", base), base + "/edges");
  for (std::size_t e = 0; e < je.size(); ++e) {
    const auto ptr = base + "/edges/" + std::to_string(e);
    array(je[e], ptr, 2);
    const int a = integer(je[e][0], ptr + "/0");
    const int b = integer(je[e][1], ptr + "/1");
    if (a < 0 || b < 0 || a >= g.node_count() || b >= g.node_count() || a == b)
      throw SchemaError(ptr, "invalid edge endpoints");
    g.edges.emplace_back(std::min(a, b), std::max(a, b));
  }
  return g;
}

}  // namespace gridsizer::skel
