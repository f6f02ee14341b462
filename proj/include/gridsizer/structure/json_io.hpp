#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

#include "gridsizer/structure/graph.hpp"
#include "gridsizer/structure/skeleton.hpp"

namespace gridsizer::skel {

// Raised when a JSON document does not match the expected schema. `pointer`
// is the RFC 6901 path of the offending value.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::string pointer, const std::string& message)
      : std::runtime_error(pointer + ": " + message), pointer_(std::move(pointer)) {}
  const std::string& pointer() const { return pointer_; }

 private:
  std::string pointer_;
};

// Skeleton record:
//   stories       int, 1..10
//   story_height  number (ft)
//   grid          { x_spans: [ft...], y_spans: [ft...] }
//   cells         [[i, j], ...]  occupied bays
//   bars          [{ p1: [x,y,z], p2: [x,y,z], kind: "column"|"beam",
//                    story: int, section?: int }, ...]
//   panels        [{ story: int, cell: [i, j], rect: [x0, y0, x1, y1] }, ...]
// `bars` and `panels` may be omitted on input; they are then rebuilt from
// grid, cells and stories.
nlohmann::json skeleton_to_json(const Skeleton& sk);
Skeleton skeleton_from_json(const nlohmann::json& j, const std::string& base_pointer = "");

// Graph record:
//   feature_width  10 | 19
//   node_features  [[...feature_width numbers], ...]
//   edges          [[a, b], ...] undirected, a < b
//   story_of       [int, ...] one per node, 0 for ground
//   ground_index   int
nlohmann::json graph_to_json(const StructuralGraph& g);
StructuralGraph graph_from_json(const nlohmann::json& j, const std::string& base_pointer = "");

}  // namespace gridsizer::skel
