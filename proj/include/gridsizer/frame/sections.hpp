#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "gridsizer/structure/skeleton.hpp"

namespace gridsizer::frame {

// Geometric properties in inches, unit weight in lb/ft. `i_major` resists
// bending in the vertical plane of a beam; square tubes have i_major == i_minor.
struct Section {
  std::string_view name;
  skel::BarKind kind;
  double area;      // in^2
  double i_major;   // in^4
  double i_minor;   // in^4
  double torsion;   // in^4
  double unit_weight;  // lb/ft
};

class UnknownSection : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kSteelDensity = 490.0;  // pcf
inline constexpr double kYoungsModulus = 29000.0;  // ksi
inline constexpr double kShearModulus = 11200.0;   // ksi

// Five square HSS columns followed by nine W21 beams, lightest first.
std::span<const Section> section_library();
std::span<const Section> column_sections();
std::span<const Section> beam_sections();

const Section& section_properties(const std::string& name);
// Index is within the bar kind's own sub-library.
const Section& section_for(skel::BarKind kind, int index);

}  // namespace gridsizer::frame
