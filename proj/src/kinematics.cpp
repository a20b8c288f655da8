#include "pkmkit/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

namespace pkm {

namespace {

constexpr double kPi = std::numbers::pi;

Mat3 axis_rotation(const Vec3& k, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Mat3 K;
  K << 0.0, -k.z(), k.y(),
       k.z(), 0.0, -k.x(),
       -k.y(), k.x(), 0.0;
  return c * Mat3::Identity() + s * K + (1.0 - c) * (k * k.transpose());
}

void check_mode(const MechanismGeometry& geom, const WorkingMode& mode) {
  if (mode.signs.size() != geom.legs())
    throw Error(ErrorKind::Config, fmt::format("working mode: expected {} signs, got {}",
                                               geom.legs(), mode.signs.size()));
  for (int s : mode.signs)
    if (s != 1 && s != -1) throw Error(ErrorKind::Config, "working mode: signs must be +1 or -1");
}

void check_joint_limits(const MechanismGeometry& geom, const JointVector& joints) {
  if (joints.rho.size() != geom.legs())
    throw Error(ErrorKind::Config, fmt::format("joints: expected {} values, got {}",
                                               geom.legs(), joints.rho.size()));
  for (std::size_t i = 0; i < joints.rho.size(); ++i) {
    const auto& leg = geom.leg(i);
    const double r = joints.rho[i];
    if (!std::isfinite(r)) throw Error(ErrorKind::Config, "joints: non-finite value");
    if (r < leg.rho_min || r > leg.rho_max)
      throw Error(ErrorKind::JointLimit,
                  fmt::format("leg {}: rho = {:.9g} outside [{:.9g}, {:.9g}]", i + 1, r,
                              leg.rho_min, leg.rho_max));
  }
  if (joints.z) {
    if (!geom.stacked_z)
      throw Error(ErrorKind::Config, "joints: z given but no stacked_z axis is configured");
    if (*joints.z < geom.stacked_z->rho_min || *joints.z > geom.stacked_z->rho_max)
      throw Error(ErrorKind::JointLimit,
                  fmt::format("stacked z: rho = {:.9g} outside [{:.9g}, {:.9g}]", *joints.z,
                              geom.stacked_z->rho_min, geom.stacked_z->rho_max));
  }
}

bool serial_flag(const LegGeometry& leg, const Vec3& rod, double tol) {
  return std::abs(rod.dot(leg.rail_axis)) / leg.leg_length < tol;
}

Eigen::Vector2d planar(const Vec3& v) { return {v.x(), v.y()}; }

double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

// Circle centers of the planar stage: b_i = p + d_i must sit at distance L_i
// from a_i, so p lies on the circle of radius L_i around a_i - d_i.
std::array<Eigen::Vector2d, 2> planar_centers(const MechanismGeometry& geom,
                                              const JointVector& joints) {
  return {planar(geom.translation_legs[0].foot(joints.rho[0]) - geom.platform_offsets[0]),
          planar(geom.translation_legs[1].foot(joints.rho[1]) - geom.platform_offsets[1])};
}

AssemblySolution finish_solution(const MechanismGeometry& geom, const Pose& pose,
                                 const JointVector& joints, const Tolerances& tol) {
  AssemblySolution sol;
  sol.pose = pose;
  sol.passive = passive_angles(geom, pose, joints);
  sol.residual_norm = closure_residual(geom, pose, joints).norm();
  const auto pts = attachment_points(geom, pose, joints);
  for (std::size_t i = 0; i < pts.size(); ++i)
    sol.boundary = sol.boundary || serial_flag(geom.leg(i), pts[i].rod(), tol.serial);
  return sol;
}

JointVector planar_joints(const JointVector& joints) {
  return JointVector{{joints.rho[0], joints.rho[1]}, joints.z};
}

struct PlanarIntersection {
  Eigen::Vector2d c1, n;
  Eigen::Vector2d u;
  double along = 0.0;
  double height = 0.0;
  bool merged = false;

  Eigen::Vector2d point(int sign) const { return c1 + along * u + sign * height * n; }
};

PlanarIntersection intersect(const MechanismGeometry& geom, const JointVector& joints,
                             const Tolerances& tol) {
  const auto [c1, c2] = planar_centers(geom, joints);
  const double r1 = geom.translation_legs[0].leg_length;
  const double r2 = geom.translation_legs[1].leg_length;
  const double scale = std::max(r1, r2);
  const Eigen::Vector2d dvec = c2 - c1;
  const double d = dvec.norm();

  if (d <= 1e-12 * scale) {
    if (std::abs(r1 - r2) <= 1e-12 * scale)
      throw Error(ErrorKind::Singular,
                  "assembly indeterminate: both leg circles coincide (parallel singularity)");
    throw Error(ErrorKind::NoAssembly, "no assembly: concentric leg circles");
  }

  PlanarIntersection out;
  out.c1 = c1;
  out.u = dvec / d;
  out.n = Eigen::Vector2d(-out.u.y(), out.u.x());
  out.along = (d * d + r1 * r1 - r2 * r2) / (2.0 * d);
  double h2 = r1 * r1 - out.along * out.along;
  if (h2 < 0.0) {
    // -h2 ~ r * gap; the first test absorbs round-off in d.
    if (-h2 > 1e-12 * scale * scale && std::sqrt(-h2) > tol.parallel * scale) {
      throw Error(ErrorKind::NoAssembly,
                  d > r1 + r2 ? "no assembly: leg circles are disjoint"
                              : "no assembly: one leg circle lies inside the other");
    }
    h2 = 0.0;
  }
  out.height = std::sqrt(h2);
  out.merged = out.height < tol.parallel * scale;
  return out;
}

// 2T1R: |p + Rot(j, beta) r - a| = L reduces to A cos(beta) + B sin(beta) = C.
std::vector<double> beta_roots_2t1r(const MechanismGeometry& geom, const Vec3& p,
                                    const JointVector& joints) {
  const ToolBody& tool = *geom.tool;
  const LegGeometry& leg = geom.orientation_legs[0];
  const Vec3& j = tool.beta_axis;
  const Vec3& r = tool.anchor_offsets[0];
  const Vec3 q = p - leg.foot(joints.rho[2]);
  const Vec3 r_par = r.dot(j) * j;
  const Vec3 r_perp = r - r_par;
  const double A = q.dot(r_perp);
  const double B = q.dot(j.cross(r));
  const double C =
      0.5 * (leg.leg_length * leg.leg_length - q.squaredNorm() - r.squaredNorm()) - q.dot(r_par);
  const double amp = std::hypot(A, B);
  const double scale = std::max({leg.leg_length * leg.leg_length, q.squaredNorm(), r.squaredNorm()});

  if (amp <= 1e-14 * scale) {
    if (std::abs(C) <= 1e-12 * scale)
      throw Error(ErrorKind::Singular,
                  "orientation indeterminate: leg 3 closes for every beta");
    throw Error(ErrorKind::NoAssembly, "no assembly: leg 3 admits no tool orientation");
  }
  double ratio = C / amp;
  if (std::abs(ratio) > 1.0) {
    if (std::abs(ratio) - 1.0 > 1e-12)
      throw Error(ErrorKind::NoAssembly, "no assembly: leg 3 admits no tool orientation");
    ratio = std::clamp(ratio, -1.0, 1.0);
  }
  const double phi = std::atan2(B, A);
  const double delta = std::acos(ratio);
  return {normalize_angle(phi + delta), normalize_angle(phi - delta)};
}

double angular_distance(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return std::hypot(normalize_angle(a.x() - b.x()), normalize_angle(a.y() - b.y()));
}

// Closure equations of the two orientation legs, as a function of (beta, gamma).
struct OrientationStage {
  Vec3 p;
  std::array<Vec3, 2> foot;
  std::array<Vec3, 2> anchor;
  std::array<double, 2> length{};
  Vec3 j, i;

  OrientationStage(const MechanismGeometry& geom, const Vec3& point, const JointVector& joints)
      : p(point), j(geom.tool->beta_axis), i(geom.tool->gamma_axis) {
    for (std::size_t k = 0; k < 2; ++k) {
      foot[k] = geom.orientation_legs[k].foot(joints.rho[2 + k]);
      anchor[k] = geom.tool->anchor_offsets[k];
      length[k] = geom.orientation_legs[k].leg_length;
    }
  }

  Eigen::Vector2d residual(double beta, double gamma) const {
    const Mat3 R = axis_rotation(j, beta) * axis_rotation(i, gamma);
    Eigen::Vector2d f;
    for (std::size_t k = 0; k < 2; ++k) {
      const Vec3 d = p + R * anchor[k] - foot[k];
      f[static_cast<Eigen::Index>(k)] = d.squaredNorm() - length[k] * length[k];
    }
    return f;
  }

  Eigen::Vector2d residual(double beta, double gamma, Eigen::Matrix2d& jac) const {
    const Mat3 Rj = axis_rotation(j, beta);
    const Mat3 R = Rj * axis_rotation(i, gamma);
    const Vec3 carried = Rj * i;
    Eigen::Vector2d f;
    for (std::size_t k = 0; k < 2; ++k) {
      const auto row = static_cast<Eigen::Index>(k);
      const Vec3 w = R * anchor[k];
      const Vec3 d = p + w - foot[k];
      f[row] = d.squaredNorm() - length[k] * length[k];
      jac(row, 0) = 2.0 * d.dot(j.cross(w));
      jac(row, 1) = 2.0 * d.dot(carried.cross(w));
    }
    return f;
  }

  // Bound on |f(x) - f(y)| / |x - y| over (beta, gamma): each component has
  // gradient norm <= 2 sqrt(2) (|p - a_k| + |r_k|) |r_k|.
  double lipschitz() const {
    double sum = 0.0;
    for (std::size_t k = 0; k < 2; ++k) {
      const double r = anchor[k].norm();
      const double g = 2.0 * std::sqrt(2.0) * ((p - foot[k]).norm() + r) * r;
      sum += g * g;
    }
    return std::sqrt(sum);
  }

  // Each anchor moves on a sphere of radius |r_k| around p; if that sphere
  // cannot meet the sphere of radius L_k around the foot, no root exists.
  bool provably_unreachable() const {
    for (std::size_t k = 0; k < 2; ++k) {
      const double dist = (p - foot[k]).norm();
      const double r = anchor[k].norm();
      if (dist > length[k] + r + 1e-12 || dist < std::abs(length[k] - r) - 1e-12) return true;
    }
    return false;
  }
};

std::optional<Eigen::Vector2d> newton_from(const OrientationStage& stage, Eigen::Vector2d x,
                                           const NewtonSettings& s) {
  Eigen::Matrix2d jac;
  Eigen::Vector2d f = stage.residual(x[0], x[1], jac);
  double fn = f.norm();
  bool converged = false;
  for (int it = 0; it < s.max_iterations; ++it) {
    if (fn < s.tolerance) {
      converged = true;
      break;
    }
    Eigen::Vector2d step;
    if (std::abs(jac.determinant()) > 1e-14 * std::max(1.0, jac.squaredNorm())) {
      step = -jac.partialPivLu().solve(f);
    } else {
      step = -jac.completeOrthogonalDecomposition().solve(f);
    }
    if (!step.allFinite()) return std::nullopt;
    double t = 1.0;
    Eigen::Vector2d trial = x + step;
    Eigen::Vector2d ftrial = stage.residual(trial[0], trial[1]);
    int halvings = 0;
    while (!(ftrial.norm() < fn) && halvings < 30) {
      t *= 0.5;
      trial = x + t * step;
      ftrial = stage.residual(trial[0], trial[1]);
      ++halvings;
    }
    if (!(ftrial.norm() < fn)) return std::nullopt;
    x = trial;
    f = stage.residual(x[0], x[1], jac);
    fn = f.norm();
  }
  if (!converged && !(fn < s.tolerance)) return std::nullopt;

  // Polish: a few extra undamped steps while they keep improving.
  for (int it = 0; it < 3; ++it) {
    const Eigen::Vector2d step = -jac.partialPivLu().solve(f);
    if (!step.allFinite()) break;
    const Eigen::Vector2d trial = x + step;
    const Eigen::Vector2d ft = stage.residual(trial[0], trial[1], jac);
    if (!(ft.norm() < fn)) break;
    x = trial;
    f = ft;
    fn = ft.norm();
  }
  return Eigen::Vector2d(normalize_angle(x[0]), normalize_angle(x[1]));
}

}  // namespace

std::vector<WorkingMode> WorkingMode::all(std::size_t legs) {
  std::vector<WorkingMode> out;
  const std::size_t count = std::size_t{1} << legs;
  for (std::size_t bits = 0; bits < count; ++bits) {
    WorkingMode m;
    for (std::size_t i = 0; i < legs; ++i)
      m.signs.push_back((bits >> (legs - 1 - i)) & 1u ? +1 : -1);
    out.push_back(std::move(m));
  }
  return out;
}

Mat3 tool_rotation(double beta, std::optional<double> gamma, const ToolBody& tool) {
  Mat3 R = axis_rotation(tool.beta_axis, beta);
  if (gamma) R = R * axis_rotation(tool.gamma_axis, *gamma);
  return R;
}

Vec3 carried_gamma_axis(double beta, const ToolBody& tool) {
  return axis_rotation(tool.beta_axis, beta) * tool.gamma_axis;
}

InverseSolution inverse_kinematics(const MechanismGeometry& geom, const Pose& pose,
                                   const WorkingMode& mode, const Tolerances& tol) {
  check_dimensions(geom, pose);
  check_mode(geom, mode);

  const Vec3 p = pose.point();
  std::vector<Vec3> b;
  b.push_back(p + geom.platform_offsets[0]);
  b.push_back(p + geom.platform_offsets[1]);
  if (!geom.orientation_legs.empty()) {
    const Mat3 R = tool_rotation(*pose.beta, pose.gamma, *geom.tool);
    for (const auto& r : geom.tool->anchor_offsets) b.push_back(p + R * r);
  }

  std::vector<double> along(b.size());
  std::vector<double> root_disc(b.size());
  InverseSolution out;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const LegGeometry& leg = geom.leg(i);
    const Vec3 w = b[i] - leg.rail_origin;
    const double t = leg.rail_axis.dot(w);
    double disc = t * t - (w.squaredNorm() - leg.leg_length * leg.leg_length);
    if (disc < 0.0) {
      if (std::sqrt(-disc) / leg.leg_length >= tol.serial)
        throw Error(ErrorKind::Unreachable,
                    fmt::format("pose unreachable by leg {}: rail is {:.9g} m too far",
                                i + 1, std::sqrt(w.squaredNorm() - t * t) - leg.leg_length));
      disc = 0.0;
    }
    along[i] = t;
    root_disc[i] = std::sqrt(disc);
    if (root_disc[i] / leg.leg_length < tol.serial) out.serial_singular_legs.push_back(i);
  }

  out.joints.rho.resize(b.size());
  for (std::size_t i = 0; i < b.size(); ++i)
    out.joints.rho[i] = along[i] + mode.signs[i] * root_disc[i];
  if (pose.z) out.joints.z = pose.z;
  check_joint_limits(geom, out.joints);
  return out;
}

AssemblySolution forward_kinematics_planar(const MechanismGeometry& geom,
                                           const JointVector& joints, int assembly,
                                           const Tolerances& tol) {
  if (assembly != 1 && assembly != -1)
    throw Error(ErrorKind::Config, "assembly selector must be +1 or -1");
  check_joint_limits(geom, joints);

  // Only the translation legs matter here; evaluate them as a planar mechanism.
  const MechanismGeometry sub = translation_stage(geom);
  const JointVector pj = planar_joints(joints);

  const PlanarIntersection hit = intersect(sub, pj, tol);
  const Eigen::Vector2d p = hit.point(assembly);
  Pose pose{p.x(), p.y(), std::nullopt, std::nullopt, joints.z};
  AssemblySolution sol = finish_solution(sub, pose, pj, tol);
  sol.branches_merged = hit.merged;
  return sol;
}

std::vector<AssemblySolution> planar_assemblies(const MechanismGeometry& geom,
                                                const JointVector& joints,
                                                const Tolerances& tol) {
  std::vector<AssemblySolution> out;
  out.push_back(forward_kinematics_planar(geom, joints, +1, tol));
  if (!out.front().branches_merged) out.push_back(forward_kinematics_planar(geom, joints, -1, tol));
  return out;
}

std::vector<AssemblySolution> forward_kinematics(const MechanismGeometry& geom,
                                                 const JointVector& joints,
                                                 const AssemblySelector& selector,
                                                 const Tolerances& tol) {
  const AssemblySolution planar_sol = forward_kinematics_planar(geom, joints, selector.planar, tol);
  if (geom.variant == Variant::Planar2T) return {planar_sol};

  const Vec3 p = planar_sol.pose.point();
  std::vector<Eigen::Vector2d> roots;  // (beta, gamma); gamma unused for 2T1R
  if (geom.variant == Variant::Spatial2T1R) {
    const auto betas = beta_roots_2t1r(geom, p, joints);
    for (std::size_t r = 0; r < betas.size(); ++r) {
      if (selector.orientation && *selector.orientation != (r == 0 ? +1 : -1)) continue;
      const Eigen::Vector2d cand(betas[r], 0.0);
      const bool dup = std::any_of(roots.begin(), roots.end(), [&](const auto& x) {
        return angular_distance(x, cand) < NewtonSettings{}.dedup_distance;
      });
      if (!dup) roots.push_back(cand);
    }
  } else {
    if (selector.orientation)
      throw Error(ErrorKind::Config,
                  "orientation selector applies to spatial_2t1r only; 2T2R returns all roots");
    roots = solve_orientation_2t2r(geom, p, joints);
  }

  std::vector<AssemblySolution> out;
  for (const auto& root : roots) {
    Pose pose = planar_sol.pose;
    pose.beta = root[0];
    if (geom.variant == Variant::Spatial2T2R) pose.gamma = root[1];
    AssemblySolution sol = finish_solution(geom, pose, joints, tol);
    sol.branches_merged = planar_sol.branches_merged;
    out.push_back(std::move(sol));
  }
  std::sort(out.begin(), out.end(), [](const AssemblySolution& a, const AssemblySolution& b) {
    const double ga = a.pose.gamma.value_or(0.0), gb = b.pose.gamma.value_or(0.0);
    return *a.pose.beta != *b.pose.beta ? *a.pose.beta < *b.pose.beta : ga < gb;
  });
  return out;
}

int planar_assembly_of(const MechanismGeometry& geom, const Pose& pose,
                       const JointVector& joints) {
  const auto [c1, c2] = planar_centers(geom, joints);
  const Eigen::Vector2d dvec = c2 - c1;
  const double scale = std::max(geom.translation_legs[0].leg_length,
                                geom.translation_legs[1].leg_length);
  const double c = cross2(dvec, Eigen::Vector2d(pose.x, pose.y) - c1);
  if (std::abs(c) <= 1e-12 * scale * std::max(dvec.norm(), scale)) return 0;
  return c > 0.0 ? +1 : -1;
}

Pose stacked_z_apply(const MechanismGeometry& geom, Pose pose, double rho_z) {
  if (!geom.stacked_z) throw Error(ErrorKind::Config, "no stacked_z axis is configured");
  if (!std::isfinite(rho_z) || rho_z < geom.stacked_z->rho_min || rho_z > geom.stacked_z->rho_max)
    throw Error(ErrorKind::JointLimit,
                fmt::format("stacked z: rho = {:.9g} outside [{:.9g}, {:.9g}]", rho_z,
                            geom.stacked_z->rho_min, geom.stacked_z->rho_max));
  pose.z = rho_z;
  return pose;
}

Eigen::Vector2d orientation_residual(const MechanismGeometry& geom, const Vec3& p,
                                     const JointVector& joints, double beta, double gamma) {
  if (geom.variant != Variant::Spatial2T2R)
    throw Error(ErrorKind::Config, "orientation residual is defined for spatial_2t2r");
  return OrientationStage(geom, p, joints).residual(beta, gamma);
}

std::vector<Eigen::Vector2d> solve_orientation_2t2r(const MechanismGeometry& geom,
                                                    const Vec3& p,
                                                    const JointVector& joints,
                                                    const NewtonSettings& settings) {
  if (geom.variant != Variant::Spatial2T2R)
    throw Error(ErrorKind::Config, "orientation solver is defined for spatial_2t2r");
  const OrientationStage stage(geom, p, joints);
  if (stage.provably_unreachable())
    throw Error(ErrorKind::NoAssembly, "no assembly: an orientation leg cannot reach the tool");

  // A root's nearest grid node is within h / sqrt(2) of it, so its residual
  // is at most L h / sqrt(2). Only such nodes are used as seeds.
  const int n = settings.grid;
  const double h = 2.0 * kPi / n;
  const double bound = stage.lipschitz() * h / std::sqrt(2.0) * (1.0 + 1e-9);
  std::vector<Eigen::Vector2d> roots;
  bool seeded = false;
  for (int a = 0; a < n; ++a) {
    const double beta = -kPi + 2.0 * kPi * (a + 1) / n;
    for (int c = 0; c < n; ++c) {
      const double gamma = -kPi + 2.0 * kPi * (c + 1) / n;
      if (stage.residual(beta, gamma).norm() > bound) continue;
      seeded = true;
      const auto root = newton_from(stage, {beta, gamma}, settings);
      if (!root) continue;
      const bool dup = std::any_of(roots.begin(), roots.end(), [&](const auto& x) {
        return angular_distance(x, *root) < settings.dedup_distance;
      });
      if (!dup) roots.push_back(*root);
    }
  }
  if (!seeded)
    throw Error(ErrorKind::NoAssembly, "no assembly: the orientation residual has no root");
  if (roots.empty())
    throw Error(ErrorKind::NoConvergence,
                "no assembly: orientation Newton stage did not converge from any seed");
  std::sort(roots.begin(), roots.end(), [](const auto& x, const auto& y) {
    return x[0] != y[0] ? x[0] < y[0] : x[1] < y[1];
  });
  return roots;
}

}  // namespace pkm
