#pragma once

#include <cstddef>
#include <vector>

#include "gridsizer/structure/skeleton.hpp"

namespace gridsizer::skel {

// Simplified one-way transfer of a floor panel's surface load.
//
// Three joists run parallel to the shorter panel edge at the quarter points of
// the longer edge. Each joist carries a strip a/4 wide and delivers half of it
// to each long-edge beam as a point load (1/8 of the panel load per joist
// end). The two end strips of width a/8 go straight into the short-edge beams
// as uniform line loads (1/8 of the panel load each). Fractions sum to 1.
struct PointShare {
  std::size_t bar = 0;
  double offset = 0.0;  // ft from the beam's p1
  double fraction = 0.0;
};

struct LineShare {
  std::size_t bar = 0;
  double fraction = 0.0;
};

struct PanelTransfer {
  std::size_t panel = 0;
  std::vector<PointShare> points;
  std::vector<LineShare> lines;
};

std::vector<PanelTransfer> panel_load_transfer(const Skeleton& sk);

// Per-bar floor area whose load the bar carries (0 for columns).
std::vector<double> tributary_areas(const Skeleton& sk);

// Beams whose edge belongs to exactly one occupied cell; columns standing on
// the layout perimeter.
std::vector<bool> boundary_flags(const Skeleton& sk);

}  // namespace gridsizer::skel
