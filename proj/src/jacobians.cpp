#include "pkmkit/jacobians.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

namespace pkm {

namespace {

constexpr double kWitnessAngle = 1e-6;  // rad
constexpr double kAssemblyTol = 1e-6;   // on |closure residual|

// Smallest angle between two lines with the given directions, in [0, pi/2].
double line_angle(const Vec3& u, const Vec3& v) {
  const double a = std::atan2(u.cross(v).norm(), u.dot(v));
  return std::min(a, std::numbers::pi - a);
}

double det2(const Eigen::MatrixXd& M, Eigen::Index r, Eigen::Index c) {
  return M(r, c) * M(r + 1, c + 1) - M(r, c + 1) * M(r + 1, c);
}

JacobianPair assemble(const MechanismGeometry& geom, const Pose& pose, const JointVector& joints,
                      JacobianMode mode, const Tolerances& tol) {
  const Eigen::VectorXd residual = closure_residual(geom, pose, joints);
  if (residual.cwiseAbs().maxCoeff() >= kAssemblyTol)
    throw Error(ErrorKind::Consistency,
                fmt::format("pose and joints do not close the loops (max residual {:.3g})",
                            residual.cwiseAbs().maxCoeff()));

  const auto pts = attachment_points(geom, pose, joints);
  const int n_rot = rotational_dof(geom.variant);
  const auto legs = static_cast<Eigen::Index>(pts.size());
  const bool stacked = geom.stacked_z.has_value() && pose.z.has_value();
  const Eigen::Index n = legs + (stacked ? 1 : 0);

  JacobianPair jp;
  jp.variant = geom.variant;
  jp.mode = mode;
  jp.rotational_rows = n_rot;
  jp.stacked = stacked;
  jp.A = Eigen::MatrixXd::Zero(n, n);
  jp.B = Eigen::MatrixXd::Zero(n, n);

  const Vec3 p = pose.point();
  Vec3 gamma_axis = Vec3::Zero();
  if (n_rot == 2) {
    gamma_axis = mode == JacobianMode::Consistent ? carried_gamma_axis(*pose.beta, *geom.tool)
                                                  : geom.tool->gamma_axis;
  }

  for (Eigen::Index i = 0; i < legs; ++i) {
    const auto& pt = pts[static_cast<std::size_t>(i)];
    const Vec3 rod = pt.rod();
    jp.A(i, 0) = rod.x();
    jp.A(i, 1) = rod.y();
    if (i >= 2) {
      const Vec3 link = p - pt.b;
      jp.A(i, 2) = -rod.dot(geom.tool->beta_axis.cross(link));
      if (n_rot == 2) jp.A(i, 3) = -rod.dot(gamma_axis.cross(link));
    }
    jp.B(i, i) = rod.dot(geom.leg(static_cast<std::size_t>(i)).rail_axis);
  }
  if (stacked) {
    jp.A(n - 1, n - 1) = 1.0;
    jp.B(n - 1, n - 1) = 1.0;
  }

  // A is block lower-triangular: translation block times orientation block.
  double det = det2(jp.A, 0, 0);
  if (n_rot == 1) det *= jp.A(2, 2);
  if (n_rot == 2) det *= det2(jp.A, 2, 2);
  jp.det_A = det;

  jp.det_B = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) jp.det_B *= jp.B(i, i);

  double norms = 1.0;
  for (Eigen::Index i = 0; i < legs; ++i) norms *= jp.A.row(i).norm();
  jp.normalized_det_A = norms > 0.0 ? det / norms : 0.0;

  if (std::abs(jp.normalized_det_A) >= tol.parallel) jp.J = jp.A.partialPivLu().solve(jp.B);
  return jp;
}

void require_variant(const MechanismGeometry& geom, Variant v, const char* op) {
  if (geom.variant != v)
    throw Error(ErrorKind::Config,
                fmt::format("{}: geometry variant is {}", op, to_string(geom.variant)));
}

}  // namespace

bool SingularityReport::any() const {
  if (parallel_singular) return true;
  for (bool s : serial_singular)
    if (s) return true;
  return false;
}

JacobianPair build_planar(const MechanismGeometry& geom, const Pose& pose,
                          const JointVector& joints, const Tolerances& tol) {
  require_variant(geom, Variant::Planar2T, "build_planar");
  return assemble(geom, pose, joints, JacobianMode::Consistent, tol);
}

JacobianPair build_2t1r(const MechanismGeometry& geom, const Pose& pose,
                        const JointVector& joints, const Tolerances& tol) {
  require_variant(geom, Variant::Spatial2T1R, "build_2t1r");
  return assemble(geom, pose, joints, JacobianMode::Consistent, tol);
}

JacobianPair build_2t2r(const MechanismGeometry& geom, const Pose& pose,
                        const JointVector& joints, JacobianMode mode, const Tolerances& tol) {
  require_variant(geom, Variant::Spatial2T2R, "build_2t2r");
  return assemble(geom, pose, joints, mode, tol);
}

JacobianPair build_jacobians(const MechanismGeometry& geom, const Pose& pose,
                             const JointVector& joints, JacobianMode mode,
                             const Tolerances& tol) {
  switch (geom.variant) {
    case Variant::Planar2T: return build_planar(geom, pose, joints, tol);
    case Variant::Spatial2T1R: return build_2t1r(geom, pose, joints, tol);
    case Variant::Spatial2T2R: return build_2t2r(geom, pose, joints, mode, tol);
  }
  throw Error(ErrorKind::Config, "unknown variant");
}

Eigen::VectorXd solve_velocity(const JacobianPair& jp, const Eigen::VectorXd& rho_dot) {
  if (rho_dot.size() != jp.size())
    throw Error(ErrorKind::Config, fmt::format("joint rates: expected {} values, got {}",
                                               jp.size(), rho_dot.size()));
  if (!jp.J)
    throw Error(ErrorKind::Singular,
                "uncontrollable configuration: parallel singularity (A is singular)");
  return *jp.J * rho_dot;
}

SingularityReport classify(const JacobianPair& jp, const MechanismGeometry& geom,
                           const Pose& pose, const JointVector& joints, const Tolerances& tol) {
  SingularityReport rep;
  rep.normalized_det_A = jp.normalized_det_A;
  rep.parallel_singular = std::abs(jp.normalized_det_A) < tol.parallel;

  const auto pts = attachment_points(geom, pose, joints);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& leg = geom.leg(i);
    const auto ii = static_cast<Eigen::Index>(i);
    rep.serial_singular.push_back(std::abs(jp.B(ii, ii)) / leg.leg_length < tol.serial);
    // Geometric check: angle between the rod and the rail's normal plane.
    const Vec3 rod = pts[i].rod();
    const double to_normal = std::abs(std::asin(std::clamp(
        rod.normalized().dot(leg.rail_axis), -1.0, 1.0)));
    if (to_normal < kWitnessAngle)
      rep.geometric_witnesses.push_back(
          fmt::format("a{0} - b{0} is perpendicular to e{0} (leg {0} serial singularity)", i + 1));
  }

  if (line_angle(pts[0].rod(), pts[1].rod()) < kWitnessAngle)
    rep.geometric_witnesses.emplace_back("lines (A1B1) and (A2B2) are colinear");

  const Vec3 p = pose.point();
  for (std::size_t k = 2; k < pts.size(); ++k) {
    const Vec3 rod = pts[k].rod();
    const Vec3 link = p - pts[k].b;
    if (line_angle(rod, link) < kWitnessAngle) {
      rep.geometric_witnesses.push_back(
          fmt::format("lines (A{0}B{0}) and (B{0}P) are colinear", k + 1));
    } else if (geom.variant == Variant::Spatial2T1R) {
      const double moment = rod.dot(geom.tool->beta_axis.cross(link)) / (rod.norm() * link.norm());
      if (std::abs(moment) < kWitnessAngle)
        rep.geometric_witnesses.push_back(
            "line (A3B3) meets or is parallel to the beta axis through B3P: leg 3 exerts no "
            "moment about j");
    }
  }

  if (geom.variant == Variant::Spatial2T2R) {
    // Moments of the rod lines about P; their components normal to the
    // tool line (CP) must be independent.
    const Vec3 gamma_axis = jp.mode == JacobianMode::Consistent
                                ? carried_gamma_axis(*pose.beta, *geom.tool)
                                : geom.tool->gamma_axis;
    const Vec3 tool_line = geom.tool->beta_axis.cross(gamma_axis);
    const Vec3 m3 = (pts[2].b - p).cross(pts[2].rod());
    const Vec3 m4 = (pts[3].b - p).cross(pts[3].rod());
    const double denom = m3.norm() * m4.norm();
    const double coplanar = denom > 0.0 ? m3.cross(m4).dot(tool_line) / denom : 0.0;
    if (std::abs(coplanar) < kWitnessAngle)
      rep.geometric_witnesses.emplace_back("lines (A3B3), (A4B4) and (CP) are coplanar");
  }
  return rep;
}

JacobianPair homogenize(const JacobianPair& jp, double char_len) {
  if (!std::isfinite(char_len) || char_len <= 0.0)
    throw Error(ErrorKind::Config, "characteristic length must be > 0");
  if (jp.rotational_rows == 0)
    throw Error(ErrorKind::Config, "homogenize: Jacobian has no rotational rows");
  JacobianPair out = jp;
  for (int k = 0; k < jp.rotational_rows; ++k) {
    const Eigen::Index r = 2 + k;
    out.A.col(r) /= char_len;
    if (out.J) out.J->row(r) *= char_len;
    out.det_A /= char_len;
  }
  // normalized_det_A stays the physical (unscaled) singularity metric.
  out.scale = jp.scale.value_or(1.0) * char_len;
  return out;
}

}  // namespace pkm
