#include "gridsizer/frame/frame_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

namespace gridsizer::frame {

namespace {

Vec3 sub(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
Vec3 scaled(const Vec3& a, double s) { return {a.x * s, a.y * s, a.z * s}; }

constexpr const char* kDofNames[kDofPerJoint] = {"ux", "uy", "uz", "rx", "ry", "rz"};

using Mat12 = std::array<double, 144>;

Mat12 local_stiffness(const Member& m, double L) {
  Mat12 k{};
  auto set = [&k](int r, int c, double v) {
    k[static_cast<std::size_t>(r * 12 + c)] = v;
    k[static_cast<std::size_t>(c * 12 + r)] = v;
  };
  const double ea = m.e * m.area / L;
  const double gj = m.g * m.torsion / L;
  set(0, 0, ea); set(6, 6, ea); set(0, 6, -ea);
  set(3, 3, gj); set(9, 9, gj); set(3, 9, -gj);

  // Bending in local x-y (v, rz) uses i_minor; x-z (w, ry) uses i_major.
  const double iz = m.i_minor, iy = m.i_major;
  const double L2 = L * L, L3 = L2 * L;
  set(1, 1, 12 * m.e * iz / L3); set(7, 7, 12 * m.e * iz / L3); set(1, 7, -12 * m.e * iz / L3);
  set(1, 5, 6 * m.e * iz / L2); set(1, 11, 6 * m.e * iz / L2);
  set(5, 7, -6 * m.e * iz / L2); set(7, 11, -6 * m.e * iz / L2);
  set(5, 5, 4 * m.e * iz / L); set(11, 11, 4 * m.e * iz / L); set(5, 11, 2 * m.e * iz / L);

  set(2, 2, 12 * m.e * iy / L3); set(8, 8, 12 * m.e * iy / L3); set(2, 8, -12 * m.e * iy / L3);
  set(2, 4, -6 * m.e * iy / L2); set(2, 10, -6 * m.e * iy / L2);
  set(4, 8, 6 * m.e * iy / L2); set(8, 10, 6 * m.e * iy / L2);
  set(4, 4, 4 * m.e * iy / L); set(10, 10, 4 * m.e * iy / L); set(4, 10, 2 * m.e * iy / L);
  return k;
}

// Rotates a local 12-vector of nodal forces into global components.
std::array<double, 12> to_global(const std::array<Vec3, 3>& ax, const std::array<double, 12>& local) {
  std::array<double, 12> out{};
  for (int blk = 0; blk < 4; ++blk) {
    const double* l = local.data() + blk * 3;
    double* g = out.data() + blk * 3;
    g[0] = ax[0].x * l[0] + ax[1].x * l[1] + ax[2].x * l[2];
    g[1] = ax[0].y * l[0] + ax[1].y * l[1] + ax[2].y * l[2];
    g[2] = ax[0].z * l[0] + ax[1].z * l[1] + ax[2].z * l[2];
  }
  return out;
}

void scatter(const FrameModel& model, const Member& m, const std::array<double, 12>& fe,
             std::span<double> loads) {
  for (int a = 0; a < 6; ++a) {
    loads[static_cast<std::size_t>(m.joint_i * kDofPerJoint + a)] += fe[static_cast<std::size_t>(a)];
    loads[static_cast<std::size_t>(m.joint_j * kDofPerJoint + a)] += fe[static_cast<std::size_t>(6 + a)];
  }
  (void)model;
}

std::array<int, 12> member_dofs(const Member& m) {
  std::array<int, 12> d{};
  for (int a = 0; a < 6; ++a) {
    d[static_cast<std::size_t>(a)] = m.joint_i * kDofPerJoint + a;
    d[static_cast<std::size_t>(6 + a)] = m.joint_j * kDofPerJoint + a;
  }
  return d;
}

}  // namespace

int FrameModel::add_joint(Vec3 p) {
  joints.push_back(p);
  fixed.push_back({});
  prescribed.push_back({});
  return static_cast<int>(joints.size()) - 1;
}

void FrameModel::fix(int joint, std::array<bool, kDofPerJoint> dofs) {
  fixed.at(static_cast<std::size_t>(joint)) = dofs;
}

std::array<Vec3, 3> member_axes(const Vec3& pi, const Vec3& pj) {
  const Vec3 d = sub(pj, pi);
  const double L = norm(d);
  const Vec3 x = scaled(d, 1.0 / L);
  Vec3 y;
  const double horizontal = std::hypot(x.x, x.y);
  if (horizontal < 1e-9) {
    y = cross(Vec3{1, 0, 0}, x);
  } else {
    y = cross(Vec3{0, 0, 1}, x);
  }
  y = scaled(y, 1.0 / norm(y));
  const Vec3 z = cross(x, y);
  return {x, y, z};
}

std::array<double, 144> member_global_stiffness(const FrameModel& model, const Member& m) {
  const auto& pi = model.joints.at(static_cast<std::size_t>(m.joint_i));
  const auto& pj = model.joints.at(static_cast<std::size_t>(m.joint_j));
  const double L = norm(sub(pj, pi));
  const auto ax = member_axes(pi, pj);
  const Mat12 kl = local_stiffness(m, L);

  // T = blockdiag(R, R, R, R) with R rows = local axes; Kg = T^T Kl T.
  double R[3][3] = {{ax[0].x, ax[0].y, ax[0].z}, {ax[1].x, ax[1].y, ax[1].z}, {ax[2].x, ax[2].y, ax[2].z}};
  Mat12 tmp{}, kg{};
  // tmp = Kl * T
  for (int r = 0; r < 12; ++r)
    for (int cb = 0; cb < 4; ++cb)
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += kl[static_cast<std::size_t>(r * 12 + cb * 3 + k)] * R[k][c];
        tmp[static_cast<std::size_t>(r * 12 + cb * 3 + c)] = s;
      }
  // kg = T^T * tmp
  for (int rb = 0; rb < 4; ++rb)
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 12; ++c) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += R[k][r] * tmp[static_cast<std::size_t>((rb * 3 + k) * 12 + c)];
        kg[static_cast<std::size_t>((rb * 3 + r) * 12 + c)] = s;
      }
  return kg;
}

std::vector<double> assemble_full_stiffness(const FrameModel& model) {
  const std::size_t n = model.dof_count();
  std::vector<double> k(n * n, 0.0);
  for (const auto& m : model.members) {
    const auto ke = member_global_stiffness(model, m);
    const auto dofs = member_dofs(m);
    for (int a = 0; a < 12; ++a)
      for (int b = 0; b < 12; ++b)
        k[static_cast<std::size_t>(dofs[static_cast<std::size_t>(a)]) * n +
          static_cast<std::size_t>(dofs[static_cast<std::size_t>(b)])] += ke[static_cast<std::size_t>(a * 12 + b)];
  }
  return k;
}

void add_member_uniform_load(const FrameModel& model, int member, const Vec3& w,
                             std::span<double> loads) {
  const auto& m = model.members.at(static_cast<std::size_t>(member));
  const auto& pi = model.joints[static_cast<std::size_t>(m.joint_i)];
  const auto& pj = model.joints[static_cast<std::size_t>(m.joint_j)];
  const double L = norm(sub(pj, pi));
  const auto ax = member_axes(pi, pj);
  const double qx = dot(w, ax[0]), qy = dot(w, ax[1]), qz = dot(w, ax[2]);
  std::array<double, 12> fl{};
  fl[0] = fl[6] = qx * L / 2;
  fl[1] = fl[7] = qy * L / 2;
  fl[5] = qy * L * L / 12;
  fl[11] = -qy * L * L / 12;
  fl[2] = fl[8] = qz * L / 2;
  fl[4] = -qz * L * L / 12;
  fl[10] = qz * L * L / 12;
  scatter(model, m, to_global(ax, fl), loads);
}

void add_member_point_load(const FrameModel& model, int member, double a, const Vec3& f,
                           std::span<double> loads) {
  const auto& m = model.members.at(static_cast<std::size_t>(member));
  const auto& pi = model.joints[static_cast<std::size_t>(m.joint_i)];
  const auto& pj = model.joints[static_cast<std::size_t>(m.joint_j)];
  const double L = norm(sub(pj, pi));
  const double b = L - a;
  const auto ax = member_axes(pi, pj);
  const double px = dot(f, ax[0]), py = dot(f, ax[1]), pz = dot(f, ax[2]);
  const double L2 = L * L, L3 = L2 * L;
  const double s1 = b * b * (3 * a + b) / L3;
  const double s2 = a * a * (a + 3 * b) / L3;
  const double m1 = a * b * b / L2;
  const double m2 = a * a * b / L2;
  std::array<double, 12> fl{};
  fl[0] = px * b / L;
  fl[6] = px * a / L;
  fl[1] = py * s1;
  fl[7] = py * s2;
  fl[5] = py * m1;
  fl[11] = -py * m2;
  fl[2] = pz * s1;
  fl[8] = pz * s2;
  fl[4] = -pz * m1;
  fl[10] = pz * m2;
  scatter(model, m, to_global(ax, fl), loads);
}

struct FrameSolver::Impl {
  struct Term {
    int reduced;
    double coeff;
  };
  const FrameModel* model = nullptr;
  std::vector<std::vector<Term>> map;  // full DOF -> reduced combination
  std::vector<double> prescribed;      // full-length
  std::vector<Mat12> element_k;
  std::vector<std::string> reduced_names;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  std::size_t reduced = 0;
};

FrameSolver::~FrameSolver() = default;
FrameSolver::FrameSolver(FrameSolver&&) noexcept = default;
FrameSolver& FrameSolver::operator=(FrameSolver&&) noexcept = default;

FrameSolver::FrameSolver(const FrameModel& model) : impl_(std::make_unique<Impl>()) {
  auto& im = *impl_;
  im.model = &model;
  const std::size_t n = model.dof_count();
  im.map.assign(n, {});
  im.prescribed.assign(n, 0.0);

  std::vector<int> diaphragm_of(model.joints.size(), -1);
  for (std::size_t d = 0; d < model.diaphragms.size(); ++d)
    for (int j : model.diaphragms[d].joints) diaphragm_of[static_cast<std::size_t>(j)] = static_cast<int>(d);

  int next = 0;
  std::vector<int> master_base(model.diaphragms.size());
  for (std::size_t d = 0; d < model.diaphragms.size(); ++d) {
    master_base[d] = next;
    for (const char* name : {"Ux", "Uy", "Rz"}) {
      std::ostringstream os;
      os << "diaphragm " << d << " master " << name;
      im.reduced_names.push_back(os.str());
    }
    next += 3;
  }
  for (std::size_t j = 0; j < model.joints.size(); ++j) {
    const auto& p = model.joints[j];
    for (int a = 0; a < kDofPerJoint; ++a) {
      const std::size_t dof = j * kDofPerJoint + static_cast<std::size_t>(a);
      if (model.fixed[j][static_cast<std::size_t>(a)]) {
        im.prescribed[dof] = model.prescribed[j][static_cast<std::size_t>(a)];
        continue;
      }
      const int d = diaphragm_of[j];
      if (d >= 0 && (a == 0 || a == 1 || a == 5)) {
        const auto& dia = model.diaphragms[static_cast<std::size_t>(d)];
        const int base = master_base[static_cast<std::size_t>(d)];
        if (a == 0) im.map[dof] = {{base, 1.0}, {base + 2, -(p.y - dia.y)}};
        if (a == 1) im.map[dof] = {{base + 1, 1.0}, {base + 2, p.x - dia.x}};
        if (a == 5) im.map[dof] = {{base + 2, 1.0}};
        continue;
      }
      im.map[dof] = {{next++, 1.0}};
      std::ostringstream os;
      os << "joint " << j << " (" << p.x << ", " << p.y << ", " << p.z << ") " << kDofNames[a];
      im.reduced_names.push_back(os.str());
    }
  }
  im.reduced = static_cast<std::size_t>(next);

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(model.members.size() * 144 * 2);
  im.element_k.reserve(model.members.size());
  for (const auto& m : model.members) {
    im.element_k.push_back(member_global_stiffness(model, m));
    const auto& ke = im.element_k.back();
    const auto dofs = member_dofs(m);
    for (int a = 0; a < 12; ++a) {
      const auto& ta = im.map[static_cast<std::size_t>(dofs[static_cast<std::size_t>(a)])];
      if (ta.empty()) continue;
      for (int b = 0; b < 12; ++b) {
        const auto& tb = im.map[static_cast<std::size_t>(dofs[static_cast<std::size_t>(b)])];
        const double kab = ke[static_cast<std::size_t>(a * 12 + b)];
        if (kab == 0.0) continue;
        for (const auto& ra : ta)
          for (const auto& rb : tb) triplets.emplace_back(ra.reduced, rb.reduced, ra.coeff * rb.coeff * kab);
      }
    }
  }
  if (im.reduced == 0) return;
  Eigen::SparseMatrix<double> k(static_cast<Eigen::Index>(im.reduced), static_cast<Eigen::Index>(im.reduced));
  k.setFromTriplets(triplets.begin(), triplets.end());
  im.ldlt.compute(k);

  // Near-zero or negative pivots mark DOFs the supports and members leave free.
  std::vector<std::string> loose;
  if (im.ldlt.info() == Eigen::Success) {
    const auto& diag = im.ldlt.vectorD();
    double scale = 0.0;
    for (Eigen::Index i = 0; i < diag.size(); ++i) scale = std::max(scale, std::abs(diag[i]));
    const auto& perm = im.ldlt.permutationP();
    std::vector<int> original(static_cast<std::size_t>(diag.size()));
    for (Eigen::Index i = 0; i < perm.indices().size(); ++i)
      original[static_cast<std::size_t>(perm.indices()[i])] = static_cast<int>(i);
    for (Eigen::Index i = 0; i < diag.size(); ++i)
      if (!(diag[i] > 1e-11 * scale)) loose.push_back(im.reduced_names[static_cast<std::size_t>(original[static_cast<std::size_t>(i)])]);
  } else {
    loose.push_back("(factorisation failed)");
  }
  if (!loose.empty()) {
    std::ostringstream os;
    os << "stiffness matrix is singular (mechanism); unconstrained DOFs:";
    for (std::size_t i = 0; i < std::min<std::size_t>(loose.size(), 8); ++i) os << (i ? ", " : " ") << loose[i];
    if (loose.size() > 8) os << ", ... (" << loose.size() << " total)";
    throw MechanismError(os.str(), std::move(loose));
  }
}

std::size_t FrameSolver::reduced_dof_count() const { return impl_->reduced; }

std::vector<double> FrameSolver::solve(std::span<const double> loads) const {
  const auto& im = *impl_;
  const auto& model = *im.model;
  const std::size_t n = model.dof_count();
  if (loads.size() != n) throw std::invalid_argument("load vector length does not match DOF count");

  // f_eff = f - K u_p, then project onto the reduced DOFs.
  std::vector<double> f(loads.begin(), loads.end());
  const bool any_prescribed =
      std::any_of(im.prescribed.begin(), im.prescribed.end(), [](double v) { return v != 0.0; });
  if (any_prescribed) {
    for (std::size_t e = 0; e < model.members.size(); ++e) {
      const auto dofs = member_dofs(model.members[e]);
      const auto& ke = im.element_k[e];
      for (int a = 0; a < 12; ++a) {
        double s = 0.0;
        for (int b = 0; b < 12; ++b)
          s += ke[static_cast<std::size_t>(a * 12 + b)] * im.prescribed[static_cast<std::size_t>(dofs[static_cast<std::size_t>(b)])];
        f[static_cast<std::size_t>(dofs[static_cast<std::size_t>(a)])] -= s;
      }
    }
  }
  Eigen::VectorXd fr = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(im.reduced));
  for (std::size_t d = 0; d < n; ++d)
    for (const auto& t : im.map[d]) fr[t.reduced] += t.coeff * f[d];
  Eigen::VectorXd ur = im.reduced ? Eigen::VectorXd(im.ldlt.solve(fr)) : fr;

  std::vector<double> u(im.prescribed);
  for (std::size_t d = 0; d < n; ++d)
    for (const auto& t : im.map[d]) u[d] += t.coeff * ur[t.reduced];
  return u;
}

std::vector<double> FrameSolver::residual(std::span<const double> u, std::span<const double> loads) const {
  const auto& im = *impl_;
  const auto& model = *im.model;
  std::vector<double> r(model.dof_count(), 0.0);
  for (std::size_t e = 0; e < model.members.size(); ++e) {
    const auto dofs = member_dofs(model.members[e]);
    const auto& ke = im.element_k[e];
    for (int a = 0; a < 12; ++a) {
      double s = 0.0;
      for (int b = 0; b < 12; ++b)
        s += ke[static_cast<std::size_t>(a * 12 + b)] * u[static_cast<std::size_t>(dofs[static_cast<std::size_t>(b)])];
      r[static_cast<std::size_t>(dofs[static_cast<std::size_t>(a)])] += s;
    }
  }
  for (std::size_t d = 0; d < r.size(); ++d) r[d] -= loads[d];
  return r;
}

std::vector<double> FrameSolver::constrained_residual(std::span<const double> u,
                                                      std::span<const double> loads) const {
  const auto& im = *impl_;
  const auto r = residual(u, loads);
  std::vector<double> rr(im.reduced, 0.0);
  for (std::size_t d = 0; d < r.size(); ++d)
    for (const auto& t : im.map[d]) rr[static_cast<std::size_t>(t.reduced)] += t.coeff * r[d];
  return rr;
}

std::array<double, 3> FrameSolver::master_displacement(std::span<const double> u, int d) const {
  const auto& model = *impl_->model;
  const auto& dia = model.diaphragms.at(static_cast<std::size_t>(d));
  const int j = dia.joints.front();
  const auto& p = model.joints[static_cast<std::size_t>(j)];
  const std::size_t base = static_cast<std::size_t>(j) * kDofPerJoint;
  const double rz = u[base + 5];
  return {u[base] + (p.y - dia.y) * rz, u[base + 1] - (p.x - dia.x) * rz, rz};
}

}  // namespace gridsizer::frame
