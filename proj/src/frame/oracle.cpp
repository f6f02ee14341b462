#include "gridsizer/frame/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

#include "gridsizer/frame/sections.hpp"
#include "gridsizer/structure/load_transfer.hpp"

namespace gridsizer::frame {

using skel::BarKind;
using skel::Skeleton;

LoadModel LoadModel::zero() {
  LoadModel lm;
  lm.self_weight_factor = 0.0;
  lm.superimposed_dead = lm.live = lm.roof_live = lm.roof_dead = lm.slab_dead = lm.cladding = 0.0;
  return lm;
}

const std::array<Combination, 3>& combinations() {
  static const std::array<Combination, 3> combos{{
      {"static", 1.2, 1.6, 0.5, 0.0, 0.0},
      {"seis_x", 0.9, 0.0, 0.0, 1.0, 0.0},
      {"seis_y", 0.9, 0.0, 0.0, 0.0, 1.0},
  }};
  return combos;
}

BuildingModel build_building_model(const Skeleton& sk, const std::vector<int>& sections) {
  if (sections.size() != sk.bars.size())
    throw std::invalid_argument("section count does not match bar count");
  BuildingModel bm;
  auto& fm = bm.frame;
  bm.level_joints.assign(static_cast<std::size_t>(sk.stories) + 1, {});

  std::map<std::tuple<double, double, double>, int> joint_of;
  auto joint = [&](const skel::Point3& p) {
    auto [it, inserted] = joint_of.try_emplace({p.x, p.y, p.z}, 0);
    if (inserted) {
      it->second = fm.add_joint({p.x, p.y, p.z});
      const int level = static_cast<int>(std::lround(p.z / sk.story_height));
      if (level < 0 || level > sk.stories || std::abs(level * sk.story_height - p.z) > 1e-9)
        throw std::invalid_argument("bar endpoint is not on a story level");
      bm.level_joints[static_cast<std::size_t>(level)].push_back(it->second);
    }
    return it->second;
  };

  const double e = kYoungsModulus * kKsiToKsf;
  const double g = kShearModulus * kKsiToKsf;
  for (std::size_t b = 0; b < sk.bars.size(); ++b) {
    const auto& bar = sk.bars[b];
    const auto& sec = section_for(bar.kind, sections[b]);
    Member m;
    m.joint_i = joint(bar.p1);
    m.joint_j = joint(bar.p2);
    m.e = e;
    m.g = g;
    m.area = sec.area * kIn2ToFt2;
    m.i_major = sec.i_major * kIn4ToFt4;
    m.i_minor = sec.i_minor * kIn4ToFt4;
    m.torsion = sec.torsion * kIn4ToFt4;
    fm.members.push_back(m);
  }
  for (int j : bm.level_joints[0]) fm.fix(j, {true, true, true, true, true, true});

  bm.level_diaphragm.assign(static_cast<std::size_t>(sk.stories) + 1, -1);
  for (int k = 1; k <= sk.stories; ++k) {
    const auto& js = bm.level_joints[static_cast<std::size_t>(k)];
    if (js.empty()) continue;
    Diaphragm d;
    d.joints = js;
    for (int j : js) {
      d.x += fm.joints[static_cast<std::size_t>(j)].x;
      d.y += fm.joints[static_cast<std::size_t>(j)].y;
    }
    d.x /= static_cast<double>(js.size());
    d.y /= static_cast<double>(js.size());
    bm.level_diaphragm[static_cast<std::size_t>(k)] = static_cast<int>(fm.diaphragms.size());
    fm.diaphragms.push_back(std::move(d));
  }
  return bm;
}

namespace {

struct GravityCases {
  std::vector<double> dead, live, roof_live;
};

GravityCases gravity_cases(const Skeleton& sk, const std::vector<int>& sections, const LoadModel& lm,
                           const BuildingModel& bm) {
  const auto& fm = bm.frame;
  GravityCases gc;
  gc.dead.assign(fm.dof_count(), 0.0);
  gc.live.assign(fm.dof_count(), 0.0);
  gc.roof_live.assign(fm.dof_count(), 0.0);

  for (std::size_t b = 0; b < sk.bars.size(); ++b) {
    const double w = lm.self_weight_factor * section_for(sk.bars[b].kind, sections[b]).unit_weight * kLbToKip;
    if (w != 0.0) add_member_uniform_load(fm, static_cast<int>(b), {0, 0, -w}, gc.dead);
  }

  const auto boundary = skel::boundary_flags(sk);
  for (std::size_t b = 0; b < sk.bars.size(); ++b) {
    if (sk.bars[b].kind != BarKind::beam || !boundary[b] || lm.cladding == 0.0) continue;
    add_member_uniform_load(fm, static_cast<int>(b), {0, 0, -lm.cladding * kLbToKip}, gc.dead);
  }

  for (const auto& t : skel::panel_load_transfer(sk)) {
    const auto& panel = sk.panels[t.panel];
    const bool roof = panel.story == sk.stories;
    const double dead = (lm.slab_dead + (roof ? lm.roof_dead : lm.superimposed_dead)) * kPsfToKsf;
    const double live = roof ? 0.0 : lm.live * kPsfToKsf;
    const double roof_live = roof ? lm.roof_live * kPsfToKsf : 0.0;
    const double area = panel.area();
    auto apply = [&](double intensity, std::vector<double>& target) {
      if (intensity == 0.0) return;
      const double total = intensity * area;
      for (const auto& s : t.points)
        add_member_point_load(fm, static_cast<int>(s.bar), s.offset, {0, 0, -s.fraction * total}, target);
      for (const auto& s : t.lines) {
        const double len = sk.bars[s.bar].length();
        add_member_uniform_load(fm, static_cast<int>(s.bar), {0, 0, -s.fraction * total / len}, target);
      }
    };
    apply(dead, gc.dead);
    apply(live, gc.live);
    apply(roof_live, gc.roof_live);
  }
  return gc;
}

std::vector<double> weights_from_cases(const GravityCases& gc, const BuildingModel& bm,
                                       const SeismicConfig& cfg) {
  std::vector<double> w;
  for (std::size_t k = 1; k < bm.level_joints.size(); ++k) {
    double sum = 0.0;
    for (int j : bm.level_joints[k]) {
      const std::size_t dz = static_cast<std::size_t>(j) * kDofPerJoint + 2;
      sum -= cfg.mass_dead * gc.dead[dz] + cfg.mass_live * gc.live[dz] + cfg.mass_roof_live * gc.roof_live[dz];
    }
    w.push_back(sum);
  }
  return w;
}

std::vector<double> lateral_vector(const BuildingModel& bm, const std::vector<double>& forces, Direction dir) {
  std::vector<double> f(bm.frame.dof_count(), 0.0);
  const std::size_t axis = dir == Direction::x ? 0 : 1;
  for (std::size_t k = 1; k < bm.level_joints.size(); ++k) {
    const auto& js = bm.level_joints[k];
    if (js.empty()) continue;
    // Equal shares at every floor joint: the resultant acts at the diaphragm master.
    const double share = forces[k - 1] / static_cast<double>(js.size());
    for (int j : js) f[static_cast<std::size_t>(j) * kDofPerJoint + axis] += share;
  }
  return f;
}

}  // namespace

double site_coefficient_fa(double ss) {
  // Site class D short-period coefficients.
  static constexpr std::array<std::pair<double, double>, 5> table{
      {{0.25, 1.6}, {0.50, 1.4}, {0.75, 1.2}, {1.00, 1.1}, {1.25, 1.0}}};
  if (ss <= table.front().first) return table.front().second;
  if (ss >= table.back().first) return table.back().second;
  for (std::size_t i = 1; i < table.size(); ++i) {
    if (ss <= table[i].first) {
      const auto [s0, f0] = table[i - 1];
      const auto [s1, f1] = table[i];
      return f0 + (f1 - f0) * (ss - s0) / (s1 - s0);
    }
  }
  return table.back().second;
}

std::vector<double> distribute_base_shear(const std::vector<double>& weights, double story_height,
                                          const SeismicConfig& cfg) {
  if (cfg.response_modifier <= 0.0) throw std::invalid_argument("response modifier R must be positive");
  if (cfg.importance <= 0.0) throw std::invalid_argument("importance factor Ie must be positive");
  if (cfg.site_class != 'D') throw std::invalid_argument("only site class D is tabulated");
  const double sds = 2.0 / 3.0 * site_coefficient_fa(cfg.ss) * cfg.ss;
  const double cs = sds / (cfg.response_modifier / cfg.importance);
  double total = 0.0, moment = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    total += weights[k];
    moment += weights[k] * story_height * static_cast<double>(k + 1);
  }
  const double base_shear = cs * total;
  std::vector<double> forces(weights.size(), 0.0);
  if (moment <= 0.0) return forces;
  for (std::size_t k = 0; k < weights.size(); ++k)
    forces[k] = base_shear * weights[k] * story_height * static_cast<double>(k + 1) / moment;
  return forces;
}

std::vector<double> story_seismic_weights(const Skeleton& sk, const std::vector<int>& sections,
                                          const LoadModel& lm) {
  const auto bm = build_building_model(sk, sections);
  return weights_from_cases(gravity_cases(sk, sections, lm, bm), bm, lm.seismic);
}

std::vector<double> equivalent_lateral_forces(const Skeleton& sk, const std::vector<int>& sections,
                                              const LoadModel& lm, Direction) {
  return distribute_base_shear(story_seismic_weights(sk, sections, lm), sk.story_height, lm.seismic);
}

LoadCases build_load_cases(const Skeleton& sk, const std::vector<int>& sections, const LoadModel& lm,
                           const BuildingModel& bm) {
  auto gc = gravity_cases(sk, sections, lm, bm);
  const auto forces = distribute_base_shear(weights_from_cases(gc, bm, lm.seismic), sk.story_height, lm.seismic);
  LoadCases lc;
  lc.seismic_x = lateral_vector(bm, forces, Direction::x);
  lc.seismic_y = lateral_vector(bm, forces, Direction::y);
  lc.dead = std::move(gc.dead);
  lc.live = std::move(gc.live);
  lc.roof_live = std::move(gc.roof_live);
  return lc;
}

namespace {

std::vector<double> combine(const LoadCases& lc, const Combination& c) {
  std::vector<double> f(lc.dead.size(), 0.0);
  for (std::size_t d = 0; d < f.size(); ++d)
    f[d] = c.dead * lc.dead[d] + c.live * lc.live[d] + c.roof_live * lc.roof_live[d] +
           c.seismic_x * lc.seismic_x[d] + c.seismic_y * lc.seismic_y[d];
  return f;
}

}  // namespace

std::map<std::string, std::vector<double>> build_loads(const Skeleton& sk, const std::vector<int>& sections,
                                                       const LoadModel& lm) {
  const auto bm = build_building_model(sk, sections);
  const auto lc = build_load_cases(sk, sections, lm, bm);
  std::map<std::string, std::vector<double>> out;
  for (const auto& c : combinations()) out.emplace(c.name, combine(lc, c));
  return out;
}

SimResult solve(const Skeleton& sk, const std::vector<int>& sections, const LoadModel& lm,
                const SolveOptions& opts) {
  auto bm = build_building_model(sk, sections);
  if (opts.support_displacement) {
    for (int j : bm.level_joints[0]) bm.frame.prescribed[static_cast<std::size_t>(j)] = *opts.support_displacement;
  }
  const auto lc = build_load_cases(sk, sections, lm, bm);
  const FrameSolver solver(bm.frame);

  SimResult res;
  res.mass_total = total_mass(sk, sections);
  const double ground_x = opts.support_displacement ? (*opts.support_displacement)[0] : 0.0;
  const double ground_y = opts.support_displacement ? (*opts.support_displacement)[1] : 0.0;
  for (const auto& c : combinations()) {
    const auto u = solver.solve(combine(lc, c));
    if (c.name == "seis_x" || c.name == "seis_y") {
      const bool x = c.name == "seis_x";
      auto& drift = x ? res.drift_x : res.drift_y;
      double below = x ? ground_x : ground_y;
      for (int k = 1; k <= sk.stories; ++k) {
        const int d = bm.level_diaphragm[static_cast<std::size_t>(k)];
        const auto master = solver.master_displacement(u, d);
        const double here = x ? master[0] : master[1];
        drift.push_back((here - below) / sk.story_height);
        below = here;
      }
    }
    if (opts.keep_displacements) res.displacements.emplace(c.name, u);
  }
  return res;
}

double total_mass(const Skeleton& sk, const std::vector<int>& sections) {
  if (sections.size() != sk.bars.size())
    throw std::invalid_argument("missing section: " + std::to_string(sk.bars.size()) + " bars but " +
                                std::to_string(sections.size()) + " sections");
  double mass = 0.0;
  for (std::size_t b = 0; b < sk.bars.size(); ++b)
    mass += sk.bars[b].length() * section_for(sk.bars[b].kind, sections[b]).unit_weight;
  return mass;
}

double total_mass(const Skeleton& sk) {
  std::vector<int> sections;
  for (std::size_t b = 0; b < sk.bars.size(); ++b) {
    if (!sk.bars[b].section) throw std::invalid_argument("missing section on bar " + std::to_string(b));
    sections.push_back(*sk.bars[b].section);
  }
  return total_mass(sk, sections);
}

}  // namespace gridsizer::frame
