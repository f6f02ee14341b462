#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridsizer::skel {

// All lengths are in feet.
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  bool operator==(const Point3&) const = default;
};

enum class BarKind : std::uint8_t { column, beam };

std::string to_string(BarKind kind);
BarKind bar_kind_from_string(const std::string& name);

struct Bar {
  Point3 p1;
  Point3 p2;
  BarKind kind = BarKind::column;
  // Columns of story k run from z=(k-1)h to z=kh; beams of story k sit at z=kh.
  int story = 1;
  std::optional<int> section;

  double length() const;
  bool operator==(const Bar&) const = default;
};

// Grid lattice: x_spans/y_spans are the successive bay widths along each axis,
// starting at coordinate 0.
struct Grid {
  std::vector<double> x_spans;
  std::vector<double> y_spans;

  std::vector<double> x_lines() const;
  std::vector<double> y_lines() const;
  bool operator==(const Grid&) const = default;
};

struct Cell {
  int i = 0;  // bay index along x
  int j = 0;  // bay index along y
  auto operator<=>(const Cell&) const = default;
};

struct Panel {
  int story = 1;
  Cell cell;
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

  double area() const { return (x1 - x0) * (y1 - y0); }
  bool operator==(const Panel&) const = default;
};

struct Skeleton {
  std::vector<Bar> bars;
  int stories = 0;
  double story_height = 16.0;
  Grid grid;
  std::vector<Cell> cells;  // occupied layout, identical on every story
  std::vector<Panel> panels;

  std::size_t column_count() const;
  std::size_t beam_count() const;
  bool operator==(const Skeleton&) const = default;
};

class SkeletonError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SkeletonConfig {
  std::vector<double> spans{28, 29, 30, 31, 32, 33, 34, 35, 36, 37, 38, 39, 40};
  double base_min = 60.0;
  double base_max = 400.0;
  int stories_min = 1;
  int stories_max = 10;
  double expand_probability = 0.5;
  double story_height = 16.0;
  // When set, the base grid has exactly this many bays per axis and every
  // cell is occupied.
  std::optional<std::array<int, 2>> forced_bays;

  void validate() const;
};

// Draws a base rectangle, a span grid on it, a DFS-connected cell layout and
// a story count, then erects columns/beams/panels for every occupied cell.
Skeleton sample_skeleton(std::uint64_t seed, const SkeletonConfig& cfg = {});

// Builds the bars and panels for an explicit layout.
Skeleton build_skeleton(const Grid& grid, std::vector<Cell> cells, int stories,
                        double story_height = 16.0);

// Uniform draw within each bar's own sub-library (5 column / 9 beam sections).
std::vector<int> assign_random_sections(const Skeleton& sk, std::uint64_t seed);

void apply_sections(Skeleton& sk, const std::vector<int>& sections);

inline constexpr int kColumnSections = 5;
inline constexpr int kBeamSections = 9;
inline constexpr int kSectionSlots = 9;

inline int sections_for(BarKind kind) {
  return kind == BarKind::column ? kColumnSections : kBeamSections;
}

}  // namespace gridsizer::skel
