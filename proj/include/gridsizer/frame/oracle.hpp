#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gridsizer/frame/frame_model.hpp"
#include "gridsizer/structure/skeleton.hpp"

namespace gridsizer::frame {

struct SeismicConfig {
  double ss = 1.8;  // short-period spectral acceleration
  double s1 = 0.6;  // 1-second spectral acceleration (recorded, unused by the static procedure)
  char site_class = 'D';
  double mass_dead = 1.0;
  double mass_live = 0.1;
  double mass_roof_live = 0.25;
  double response_modifier = 3.0;  // R
  double importance = 1.0;         // Ie
};

// Surface intensities in psf, line loads in lb/ft.
struct LoadModel {
  double self_weight_factor = 1.1;
  double superimposed_dead = 24.0;  // floors below the roof
  double live = 100.0;              // floors below the roof
  double roof_live = 20.0;
  double roof_dead = 15.0;
  // 150 pcf concrete on a ribbed deck: 3.74 in topping plus ribs filling
  // 2.56 in at 45.2 % -> 4.897 in equivalent thickness.
  double slab_dead = 61.215;
  double cladding = 410.0;  // boundary beams, every story
  SeismicConfig seismic;

  static LoadModel zero();  // every intensity and factor 0
};

struct Combination {
  std::string name;
  double dead = 0.0;
  double live = 0.0;
  double roof_live = 0.0;
  double seismic_x = 0.0;
  double seismic_y = 0.0;
};

// static: 1.2D + 1.6L + 0.5Lr; seis_x: 0.9D + 1.0Ex; seis_y: 0.9D + 1.0Ey.
const std::array<Combination, 3>& combinations();

enum class Direction { x, y };

// Frame model of a sized skeleton in kip/ft units; member m is bar m.
struct BuildingModel {
  FrameModel frame;
  std::vector<std::vector<int>> level_joints;  // level 0 (ground) .. K
  std::vector<int> level_diaphragm;            // level k -> diaphragm index, -1 for ground
};

BuildingModel build_building_model(const skel::Skeleton& sk, const std::vector<int>& sections);

struct LoadCases {
  std::vector<double> dead;
  std::vector<double> live;
  std::vector<double> roof_live;
  std::vector<double> seismic_x;
  std::vector<double> seismic_y;
};

LoadCases build_load_cases(const skel::Skeleton& sk, const std::vector<int>& sections,
                           const LoadModel& lm, const BuildingModel& model);

// Nodal load vectors (kip, kip-ft) per combination, keyed by combination name.
std::map<std::string, std::vector<double>> build_loads(const skel::Skeleton& sk,
                                                       const std::vector<int>& sections,
                                                       const LoadModel& lm);

// Short-period site coefficient for site class D, linear between tabulated Ss.
double site_coefficient_fa(double ss);

// Seismic weight per story (kip), index k-1 for story k.
std::vector<double> story_seismic_weights(const skel::Skeleton& sk, const std::vector<int>& sections,
                                          const LoadModel& lm);

// Equivalent-static story forces (kip), index k-1 for story k. Identical in
// both directions; `dir` is kept for symmetry with the load cases.
std::vector<double> equivalent_lateral_forces(const skel::Skeleton& sk, const std::vector<int>& sections,
                                              const LoadModel& lm, Direction dir);
std::vector<double> distribute_base_shear(const std::vector<double>& weights, double story_height,
                                          const SeismicConfig& cfg);

struct SimResult {
  std::vector<double> drift_x;  // story k at index k-1
  std::vector<double> drift_y;
  double mass_total = 0.0;  // lb
  std::map<std::string, std::vector<double>> displacements;  // per combination, ft/rad
};

struct SolveOptions {
  bool keep_displacements = false;
  // Displacement imposed on every ground support (ft, rad).
  std::optional<std::array<double, 6>> support_displacement;
};

SimResult solve(const skel::Skeleton& sk, const std::vector<int>& sections, const LoadModel& lm = {},
                const SolveOptions& opts = {});

// Sum of length * unit weight (lb).
double total_mass(const skel::Skeleton& sk, const std::vector<int>& sections);
// Uses the sections stored on the bars; throws when one is missing.
double total_mass(const skel::Skeleton& sk);

// Unit conversions used at the oracle boundary.
inline constexpr double kPsfToKsf = 1e-3;
inline constexpr double kLbToKip = 1e-3;
inline constexpr double kKsiToKsf = 144.0;
inline constexpr double kIn2ToFt2 = 1.0 / 144.0;
inline constexpr double kIn4ToFt4 = 1.0 / 20736.0;

}  // namespace gridsizer::frame
