#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pkmkit/geometry.hpp"
#include "pkmkit/kinematics.hpp"

namespace pkm {

/// How the gamma column of a 2T2R parallel Jacobian is formed.
///  - Consistent: uses the tool-carried axis Rot(j, beta) * i, which is the
///    true rate axis of the universal joint and differentiates the FK.
///  - Literal: uses the fixed axis i. Identical whenever beta = 0.
enum class JacobianMode { Consistent, Literal };

/// Parallel matrix A and serial matrix B with A t = B rho_dot, and
/// J = A^-1 B when A is not singular. Task vector ordering is
/// (x, y[, beta[, gamma]][, z]).
struct JacobianPair {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  std::optional<Eigen::MatrixXd> J;
  double det_A = 0.0;
  double det_B = 0.0;
  double normalized_det_A = 0.0;  // det A / product of row norms (stacked row excluded)
  Variant variant = Variant::Planar2T;
  JacobianMode mode = JacobianMode::Consistent;
  int rotational_rows = 0;       // rows 2 .. 2 + rotational_rows - 1
  bool stacked = false;          // trailing unit row/column for the stacked axis
  std::optional<double> scale;   // set once rotational rows are homogenized

  Eigen::Index size() const { return A.rows(); }
  bool parallel_singular() const { return !J.has_value(); }
};

struct SingularityReport {
  std::vector<bool> serial_singular;  // per leg
  bool parallel_singular = false;
  double normalized_det_A = 0.0;
  std::vector<std::string> geometric_witnesses;

  bool any() const;
};

JacobianPair build_planar(const MechanismGeometry& geom, const Pose& pose,
                          const JointVector& joints, const Tolerances& tol = {});
JacobianPair build_2t1r(const MechanismGeometry& geom, const Pose& pose,
                        const JointVector& joints, const Tolerances& tol = {});
JacobianPair build_2t2r(const MechanismGeometry& geom, const Pose& pose,
                        const JointVector& joints, JacobianMode mode = JacobianMode::Consistent,
                        const Tolerances& tol = {});

/// Dispatches on the geometry variant.
JacobianPair build_jacobians(const MechanismGeometry& geom, const Pose& pose,
                             const JointVector& joints,
                             JacobianMode mode = JacobianMode::Consistent,
                             const Tolerances& tol = {});

/// t = J rho_dot. Throws ErrorKind::Singular on a parallel singularity.
Eigen::VectorXd solve_velocity(const JacobianPair& jp, const Eigen::VectorXd& rho_dot);

/// Determinant-based flags plus independent geometric witnesses.
SingularityReport classify(const JacobianPair& jp, const MechanismGeometry& geom,
                           const Pose& pose, const JointVector& joints,
                           const Tolerances& tol = {});

/// Expresses angular rates as char_len * rate: rotational rows of J are
/// multiplied by char_len, the matching columns of A divided by it.
JacobianPair homogenize(const JacobianPair& jp, double char_len);

}  // namespace pkm
