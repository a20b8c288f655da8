#pragma once

#include <optional>
#include <vector>

#include "pkmkit/geometry.hpp"

namespace pkm {

/// Singularity thresholds shared by kinematics, Jacobians and scans.
struct Tolerances {
  double parallel = 1e-8;  // on |det A| / prod(row norms)
  double serial = 1e-8;    // on |(b_i - a_i) . e_i| / L_i
};

/// Root selector per leg for the inverse kinematics quadratic:
/// rho_i = e_i . (b_i - a_i0) + sign_i * sqrt(disc_i).
struct WorkingMode {
  std::vector<int> signs;

  static WorkingMode uniform(std::size_t legs, int sign) {
    return WorkingMode{std::vector<int>(legs, sign)};
  }
  /// All 2^legs sign combinations, ordered with -1 before +1 per leg.
  static std::vector<WorkingMode> all(std::size_t legs);
};

/// Forward-kinematics branch selection. `planar` picks the circle
/// intersection on the positive (+1) or negative (-1) side of the line
/// from the first to the second circle center. `orientation` picks one of
/// the two closed-form beta roots of the 2T1R stage; unset returns both.
struct AssemblySelector {
  int planar = +1;
  std::optional<int> orientation;
};

struct InverseSolution {
  JointVector joints;
  std::vector<std::size_t> serial_singular_legs;  // legs at a boundary root
};

struct AssemblySolution {
  Pose pose;
  PassiveAngles passive;
  double residual_norm = 0.0;
  bool branches_merged = false;  // circles tangent: planar stage parallel-singular
  bool boundary = false;         // some leg sits on a serial singularity
};

/// Tool orientation: Rot(j, beta) for 2T1R, Rot(j, beta) * Rot(i, gamma)
/// for 2T2R. The first axis is platform-fixed, the second tool-carried.
Mat3 tool_rotation(double beta, std::optional<double> gamma, const ToolBody& tool);

/// Instantaneous axis of the gamma rate: Rot(j, beta) * i.
Vec3 carried_gamma_axis(double beta, const ToolBody& tool);

InverseSolution inverse_kinematics(const MechanismGeometry& geom, const Pose& pose,
                                   const WorkingMode& mode,
                                   const Tolerances& tol = {});

/// Planar stage: intersection of the circles of radius L_i around a_i - d_i.
AssemblySolution forward_kinematics_planar(const MechanismGeometry& geom,
                                           const JointVector& joints, int assembly,
                                           const Tolerances& tol = {});

/// Both planar branches (one when they merge).
std::vector<AssemblySolution> planar_assemblies(const MechanismGeometry& geom,
                                                const JointVector& joints,
                                                const Tolerances& tol = {});

/// Full forward kinematics. The planar stage is solved first, then the
/// orientation from the remaining closure equations. Returns every
/// orientation root consistent with the selector, sorted by (beta, gamma).
std::vector<AssemblySolution> forward_kinematics(const MechanismGeometry& geom,
                                                 const JointVector& joints,
                                                 const AssemblySelector& selector,
                                                 const Tolerances& tol = {});

/// Which planar branch (+1/-1) a closed configuration belongs to; 0 when
/// the two branches coincide.
int planar_assembly_of(const MechanismGeometry& geom, const Pose& pose,
                       const JointVector& joints);

/// Sets the stacked serial axis coordinate.
Pose stacked_z_apply(const MechanismGeometry& geom, Pose pose, double rho_z);

/// Settings of the 2T2R orientation solver.
struct NewtonSettings {
  int grid = 33;
  int max_iterations = 50;
  double tolerance = 1e-10;
  double dedup_distance = 1e-6;
};

/// Residual of the two orientation-leg closure equations of a 2T2R
/// mechanism at (beta, gamma), with the planar position held fixed.
Eigen::Vector2d orientation_residual(const MechanismGeometry& geom, const Vec3& p,
                                     const JointVector& joints, double beta,
                                     double gamma);

/// Every (beta, gamma) root of the 2T2R orientation stage at position p.
/// Newton runs from the grid nodes whose residual is small enough, given a
/// Lipschitz bound, to lie next to a root. No such node means no root
/// (ErrorKind::NoAssembly); no converged run means ErrorKind::NoConvergence.
std::vector<Eigen::Vector2d> solve_orientation_2t2r(const MechanismGeometry& geom,
                                                    const Vec3& p,
                                                    const JointVector& joints,
                                                    const NewtonSettings& settings = {});

}  // namespace pkm
