#include "pkmkit/geometry.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "pkmkit/kinematics.hpp"

namespace pkm {

namespace {

constexpr double kUnitTol = 1e-12;

void require(bool ok, const std::string& msg) {
  if (!ok) throw Error(ErrorKind::Config, msg);
}

bool finite(const Vec3& v) { return v.allFinite(); }

void check_leg(const LegGeometry& leg, const std::string& where) {
  require(finite(leg.rail_origin) && finite(leg.rail_axis),
          where + ": non-finite rail vector");
  require(std::abs(leg.rail_axis.norm() - 1.0) <= kUnitTol,
          where + ".rail_axis: must have unit norm");
  require(std::isfinite(leg.leg_length) && leg.leg_length > 0.0,
          where + ".leg_length: must be > 0");
  require(std::isfinite(leg.rho_min) && std::isfinite(leg.rho_max) &&
              leg.rho_min < leg.rho_max,
          where + ": rho_min must be < rho_max");
}

}  // namespace

const char* to_string(Variant v) noexcept {
  switch (v) {
    case Variant::Planar2T: return "planar_2t";
    case Variant::Spatial2T1R: return "spatial_2t1r";
    case Variant::Spatial2T2R: return "spatial_2t2r";
  }
  return "unknown";
}

Variant variant_from_string(const std::string& name) {
  if (name == "planar_2t") return Variant::Planar2T;
  if (name == "spatial_2t1r") return Variant::Spatial2T1R;
  if (name == "spatial_2t2r") return Variant::Spatial2T2R;
  throw Error(ErrorKind::Config,
              "variant: expected one of planar_2t, spatial_2t1r, spatial_2t2r, got '" +
                  name + "'");
}

int rotational_dof(Variant v) noexcept {
  switch (v) {
    case Variant::Planar2T: return 0;
    case Variant::Spatial2T1R: return 1;
    case Variant::Spatial2T2R: return 2;
  }
  return 0;
}

int leg_count(Variant v) noexcept { return 2 + rotational_dof(v); }

double ToolBody::char_length() const {
  if (characteristic_length) return *characteristic_length;
  return anchor_offsets.empty() ? 1.0 : anchor_offsets.front().norm();
}

MechanismGeometry translation_stage(const MechanismGeometry& geom) {
  MechanismGeometry sub = geom;
  sub.variant = Variant::Planar2T;
  sub.orientation_legs.clear();
  sub.tool.reset();
  return sub;
}

std::vector<std::string> validate(const MechanismGeometry& geom) {
  std::vector<std::string> warnings;
  const int n_rot = rotational_dof(geom.variant);

  for (std::size_t i = 0; i < 2; ++i) {
    const auto where = fmt::format("translation_legs[{}]", i);
    const auto& leg = geom.translation_legs[i];
    check_leg(leg, where);
    require(std::abs(leg.rail_axis.z()) <= kUnitTol,
            where + ".rail_axis: must lie in the z = 0 plane");
    require(finite(geom.platform_offsets[i]),
            fmt::format("platform_offsets[{}]: non-finite", i));
    // The planar stage is only planar if its rods carry no z component.
    require(std::abs(leg.rail_origin.z() - geom.platform_offsets[i].z()) <= kUnitTol,
            where + ".rail_origin: z must equal the platform offset z "
                    "(rod must stay in its plane)");
  }

  require(static_cast<int>(geom.orientation_legs.size()) == n_rot,
          fmt::format("orientation_legs: variant {} needs {} leg(s), got {}",
                      to_string(geom.variant), n_rot, geom.orientation_legs.size()));

  const Vec3 e1 = geom.translation_legs[0].rail_axis;
  const Vec3 e2 = geom.translation_legs[1].rail_axis;
  if (std::abs(e1.dot(e2)) >= 1e-12)
    warnings.push_back(fmt::format("translation rails are not orthogonal (e1·e2 = {:.9g}); "
                                   "the stage has no isotropic configuration",
                                   e1.dot(e2)));
  for (std::size_t k = 0; k < geom.orientation_legs.size(); ++k) {
    const auto where = fmt::format("orientation_legs[{}]", k);
    const auto& leg = geom.orientation_legs[k];
    check_leg(leg, where);
    if (std::abs(leg.rail_axis.dot(e1)) > 1e-9 || std::abs(leg.rail_axis.dot(e2)) > 1e-9) {
      warnings.push_back(where +
                         ".rail_axis is not orthogonal to both translation rails");
    }
  }

  if (n_rot == 0) {
    require(!geom.tool.has_value(), "tool: not allowed for planar_2t");
  } else {
    require(geom.tool.has_value(), "tool: required for spatial variants");
    const ToolBody& tool = *geom.tool;
    require(static_cast<int>(tool.anchor_offsets.size()) == n_rot,
            fmt::format("tool.anchor_offsets: expected {} entries, got {}", n_rot,
                        tool.anchor_offsets.size()));
    for (std::size_t k = 0; k < tool.anchor_offsets.size(); ++k) {
      require(finite(tool.anchor_offsets[k]) && tool.anchor_offsets[k].norm() > 0.0,
              fmt::format("tool.anchor_offsets[{}]: must be nonzero", k));
    }
    require(std::abs(tool.beta_axis.norm() - 1.0) <= kUnitTol,
            "tool.beta_axis: must have unit norm");
    require(std::abs(tool.gamma_axis.norm() - 1.0) <= kUnitTol,
            "tool.gamma_axis: must have unit norm");
    require(std::abs(tool.beta_axis.dot(tool.gamma_axis)) <= kUnitTol,
            "tool: beta_axis and gamma_axis must be orthogonal");
    if (tool.characteristic_length) {
      require(std::isfinite(*tool.characteristic_length) &&
                  *tool.characteristic_length > 0.0,
              "tool.characteristic_length: must be > 0");
    }
  }

  if (geom.stacked_z) {
    const auto& s = *geom.stacked_z;
    require(std::abs(s.axis.norm() - 1.0) <= kUnitTol,
            "stacked_z.axis: must have unit norm");
    require(std::abs(s.axis.dot(e1)) <= 1e-9 && std::abs(s.axis.dot(e2)) <= 1e-9,
            "stacked_z.axis: must be orthogonal to the translation rails");
    require(s.rho_min < s.rho_max, "stacked_z: rho_min must be < rho_max");
  }
  return warnings;
}

double normalize_angle(double a) noexcept {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(a, two_pi);  // (-2pi, 2pi)
  if (r <= -std::numbers::pi) r += two_pi;
  if (r > std::numbers::pi) r -= two_pi;
  return r;
}

Pose normalized(Pose p) noexcept {
  if (p.beta) p.beta = normalize_angle(*p.beta);
  if (p.gamma) p.gamma = normalize_angle(*p.gamma);
  return p;
}

void check_dimensions(const MechanismGeometry& geom, const Pose& pose) {
  const int n_rot = rotational_dof(geom.variant);
  require(std::isfinite(pose.x) && std::isfinite(pose.y), "pose: non-finite coordinate");
  require(pose.beta.has_value() == (n_rot >= 1),
          n_rot >= 1 ? "pose: beta required for spatial variants"
                     : "pose: beta not allowed for planar_2t");
  require(pose.gamma.has_value() == (n_rot == 2),
          n_rot == 2 ? "pose: gamma required for spatial_2t2r"
                     : "pose: gamma only allowed for spatial_2t2r");
  require(!pose.z || geom.stacked_z.has_value(),
          "pose: z given but no stacked_z axis is configured");
  if (pose.beta) require(std::isfinite(*pose.beta), "pose: non-finite beta");
  if (pose.gamma) require(std::isfinite(*pose.gamma), "pose: non-finite gamma");
}

void check_dimensions(const MechanismGeometry& geom, const Pose& pose,
                      const JointVector& joints) {
  check_dimensions(geom, pose);
  require(joints.rho.size() == geom.legs(),
          fmt::format("joints: expected {} values, got {}", geom.legs(), joints.rho.size()));
  for (double r : joints.rho) require(std::isfinite(r), "joints: non-finite value");
}

std::vector<LegAttachment> attachment_points(const MechanismGeometry& geom,
                                             const Pose& pose,
                                             const JointVector& joints) {
  check_dimensions(geom, pose, joints);
  const Vec3 p = pose.point();
  std::vector<LegAttachment> out;
  out.reserve(geom.legs());
  for (std::size_t i = 0; i < 2; ++i) {
    out.push_back({geom.translation_legs[i].foot(joints.rho[i]), p + geom.platform_offsets[i]});
  }
  if (!geom.orientation_legs.empty()) {
    const Mat3 R = tool_rotation(*pose.beta, pose.gamma, *geom.tool);
    for (std::size_t k = 0; k < geom.orientation_legs.size(); ++k) {
      out.push_back({geom.orientation_legs[k].foot(joints.rho[2 + k]),
                     p + R * geom.tool->anchor_offsets[k]});
    }
  }
  return out;
}

Eigen::VectorXd closure_residual(const MechanismGeometry& geom, const Pose& pose,
                                 const JointVector& joints) {
  const auto pts = attachment_points(geom, pose, joints);
  Eigen::VectorXd r(static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double L = geom.leg(i).leg_length;
    r[static_cast<Eigen::Index>(i)] = pts[i].rod().squaredNorm() - L * L;
  }
  return r;
}

Vec3 direction_from_angles(double elevation, double azimuth) noexcept {
  return {std::cos(elevation) * std::cos(azimuth), std::cos(elevation) * std::sin(azimuth),
          std::sin(elevation)};
}

PassiveAngles passive_angles(const MechanismGeometry& geom, const Pose& pose,
                             const JointVector& joints) {
  const auto pts = attachment_points(geom, pose, joints);
  PassiveAngles out;
  for (std::size_t i = 0; i < 2; ++i) {
    const Vec3 rod = pts[i].rod();
    out.theta[i] = std::atan2(rod.y(), rod.x());
  }
  for (std::size_t k = 2; k < pts.size(); ++k) {
    const Vec3 u = pts[k].rod().normalized();
    const double elevation = std::atan2(u.z(), std::hypot(u.x(), u.y()));
    const double azimuth = std::atan2(u.y(), u.x());
    out.elevation_azimuth.emplace_back(elevation, azimuth);
  }
  return out;
}

}  // namespace pkm
