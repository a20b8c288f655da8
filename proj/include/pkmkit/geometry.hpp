#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pkmkit/error.hpp"

namespace pkm {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Mechanism family members. The translation stage is always the two-leg
/// planar mechanism; the spatial members carry one or two extra legs that
/// orient the tool.
enum class Variant { Planar2T, Spatial2T1R, Spatial2T2R };

const char* to_string(Variant v) noexcept;
Variant variant_from_string(const std::string& name);

/// Number of orientation legs (and rotational task coordinates).
int rotational_dof(Variant v) noexcept;
/// Number of actuated legs, excluding the optional stacked axis.
int leg_count(Variant v) noexcept;

/// One actuated leg: a prismatic joint moving the foot point along a rail,
/// followed by a rigid rod of fixed length.
struct LegGeometry {
  Vec3 rail_origin = Vec3::Zero();  // foot point at rho = 0
  Vec3 rail_axis = Vec3::UnitX();   // unit
  double leg_length = 1.0;
  double rho_min = -1.0;
  double rho_max = 1.0;

  Vec3 foot(double rho) const { return rail_origin + rho * rail_axis; }
};

/// Tool body carried by the translating platform through a revolute
/// (2T1R) or universal (2T2R) joint.
struct ToolBody {
  std::vector<Vec3> anchor_offsets;  // P -> B_k in the tool frame, one per orientation leg
  Vec3 beta_axis = Vec3::UnitY();    // platform-fixed first axis
  Vec3 gamma_axis = Vec3::UnitX();   // tool-carried second axis (value at beta = 0)
  std::optional<double> characteristic_length;

  /// Explicit value, or the norm of the first anchor offset.
  double char_length() const;
};

/// Serial prismatic axis stacked orthogonally on the planar stage.
struct StackedAxis {
  Vec3 axis = Vec3::UnitZ();
  double rho_min = -1.0;
  double rho_max = 1.0;
};

struct MechanismGeometry {
  Variant variant = Variant::Planar2T;
  std::array<LegGeometry, 2> translation_legs;
  std::vector<LegGeometry> orientation_legs;
  std::optional<ToolBody> tool;
  std::array<Vec3, 2> platform_offsets{Vec3::Zero(), Vec3::Zero()};
  std::optional<StackedAxis> stacked_z;

  const LegGeometry& leg(std::size_t i) const {
    return i < 2 ? translation_legs[i] : orientation_legs.at(i - 2);
  }
  std::size_t legs() const { return 2 + orientation_legs.size(); }
};

/// The two-leg planar translation stage of any variant.
MechanismGeometry translation_stage(const MechanismGeometry& geom);

/// Checks every geometric invariant. Throws ErrorKind::Config on a hard
/// violation; returns human-readable warnings for soft ones.
std::vector<std::string> validate(const MechanismGeometry& geom);

/// Task-space coordinates. Angles in radians, lengths in meters.
struct Pose {
  double x = 0.0;
  double y = 0.0;
  std::optional<double> beta;
  std::optional<double> gamma;
  std::optional<double> z;

  Vec3 point() const { return {x, y, 0.0}; }
};

/// Wraps an angle into (-pi, pi].
double normalize_angle(double a) noexcept;

/// Pose with beta/gamma wrapped into (-pi, pi].
Pose normalized(Pose p) noexcept;

/// Actuated prismatic coordinates, one per leg, plus the stacked axis.
struct JointVector {
  std::vector<double> rho;
  std::optional<double> z;
};

/// Passive rod orientations. Planar legs: angle of (b_i - a_i) from +x.
/// Orientation legs: elevation above the xy-plane and azimuth about z.
struct PassiveAngles {
  std::array<double, 2> theta{0.0, 0.0};
  std::vector<std::pair<double, double>> elevation_azimuth;
};

struct LegAttachment {
  Vec3 a;  // foot point on the rail
  Vec3 b;  // attachment on the platform or tool
  Vec3 rod() const { return b - a; }
};

/// Throws ErrorKind::Config unless pose and joints match the variant.
void check_dimensions(const MechanismGeometry& geom, const Pose& pose,
                      const JointVector& joints);
void check_dimensions(const MechanismGeometry& geom, const Pose& pose);

std::vector<LegAttachment> attachment_points(const MechanismGeometry& geom,
                                             const Pose& pose,
                                             const JointVector& joints);

/// ||b_i - a_i||^2 - L_i^2 per leg.
Eigen::VectorXd closure_residual(const MechanismGeometry& geom, const Pose& pose,
                                 const JointVector& joints);

PassiveAngles passive_angles(const MechanismGeometry& geom, const Pose& pose,
                             const JointVector& joints);

/// Unit rod direction rebuilt from an (elevation, azimuth) pair.
Vec3 direction_from_angles(double elevation, double azimuth) noexcept;

}  // namespace pkm
