#pragma once

#include <array>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridsizer::frame {

// Linear-elastic 3D space frame. Any consistent unit system works; the
// building oracle uses kip and ft. Six DOFs per joint, ordered
// ux, uy, uz, rx, ry, rz.
inline constexpr int kDofPerJoint = 6;

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

struct Member {
  int joint_i = 0;
  int joint_j = 0;
  double e = 0.0;       // Young's modulus
  double g = 0.0;       // shear modulus
  double area = 0.0;
  double i_major = 0.0;  // bending in the member's vertical plane
  double i_minor = 0.0;
  double torsion = 0.0;
};

// Floor joints rigidly tied in-plane: ux, uy, rz of every joint follow the
// master's (Ux, Uy, Rz) placed at (x, y).
struct Diaphragm {
  std::vector<int> joints;
  double x = 0.0;
  double y = 0.0;
};

struct FrameModel {
  std::vector<Vec3> joints;
  std::vector<Member> members;
  std::vector<std::array<bool, kDofPerJoint>> fixed;          // per joint
  std::vector<std::array<double, kDofPerJoint>> prescribed;   // values for fixed DOFs
  std::vector<Diaphragm> diaphragms;

  int add_joint(Vec3 p);
  void fix(int joint, std::array<bool, kDofPerJoint> dofs);
  std::size_t dof_count() const { return joints.size() * kDofPerJoint; }
};

class MechanismError : public std::runtime_error {
 public:
  MechanismError(const std::string& message, std::vector<std::string> dofs)
      : std::runtime_error(message), dofs_(std::move(dofs)) {}
  const std::vector<std::string>& unconstrained_dofs() const { return dofs_; }

 private:
  std::vector<std::string> dofs_;
};

// Local-to-global rotation rows (local x, y, z expressed in global axes).
// Local x runs i -> j; local z lies in the vertical plane for non-vertical
// members; vertical members take local z along global X.
std::array<Vec3, 3> member_axes(const Vec3& pi, const Vec3& pj);

// 12x12 element stiffness in global coordinates, row-major.
std::array<double, 144> member_global_stiffness(const FrameModel& model, const Member& m);

// Full (unconstrained) stiffness, dense row-major; intended for checks on
// small models.
std::vector<double> assemble_full_stiffness(const FrameModel& model);

// Consistent nodal loads of member loads, accumulated into a global load
// vector (length dof_count()). Directions are global.
void add_member_uniform_load(const FrameModel& model, int member, const Vec3& per_length,
                             std::span<double> loads);
void add_member_point_load(const FrameModel& model, int member, double offset, const Vec3& force,
                           std::span<double> loads);

// Factorises the constrained system once and solves any number of load
// vectors. Keeps a pointer to the model, which must outlive the solver.
class FrameSolver {
 public:
  explicit FrameSolver(const FrameModel& model);
  ~FrameSolver();
  FrameSolver(FrameSolver&&) noexcept;
  FrameSolver& operator=(FrameSolver&&) noexcept;

  // Full displacement vector (prescribed values included).
  std::vector<double> solve(std::span<const double> loads) const;
  // K u - f at every DOF; nonzero only at supports up to round-off.
  std::vector<double> residual(std::span<const double> displacements,
                               std::span<const double> loads) const;
  // Residual projected onto the independent DOFs (free joint DOFs and
  // diaphragm masters): the out-of-balance force of the constrained system.
  std::vector<double> constrained_residual(std::span<const double> displacements,
                                           std::span<const double> loads) const;
  // Master (Ux, Uy, Rz) of diaphragm d.
  std::array<double, 3> master_displacement(std::span<const double> displacements, int d) const;

  std::size_t reduced_dof_count() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace gridsizer::frame
