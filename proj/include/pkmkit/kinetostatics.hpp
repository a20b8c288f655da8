#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pkmkit/geometry.hpp"
#include "pkmkit/grid.hpp"
#include "pkmkit/jacobians.hpp"
#include "pkmkit/kinematics.hpp"

namespace pkm {

/// Non-negative quantity that may be unbounded. Infinity is a flag, the
/// value is meaningless when it is set.
struct Magnitude {
  double value = 0.0;
  bool infinite = false;

  static Magnitude finite(double v) { return {v, false}; }
  static Magnitude unbounded() { return {0.0, true}; }
  bool operator==(const Magnitude&) const = default;
};

/// Velocity amplification factors (singular values of J, descending) and
/// their force duals (reciprocals, in the same order).
struct AmplificationProfile {
  std::vector<Magnitude> singular_values;
  std::vector<Magnitude> force_factors;
  Magnitude condition_number;
  Magnitude isotropy_defect;  // max |J^T J - I|

  Magnitude sigma_max() const { return singular_values.front(); }
  Magnitude sigma_min() const { return singular_values.back(); }
  /// All singular values finite and within [1/psi, psi].
  bool within(double psi) const;
};

/// Profile of a dimensionally homogeneous Jacobian (2 <= n <= 5).
AmplificationProfile amplification(const Eigen::MatrixXd& J);

/// Profile of a Jacobian pair. Rotational rows must be homogenized first,
/// either beforehand or through char_len. At a parallel singularity the
/// factors come from the inverse path B^-1 A.
AmplificationProfile amplification(const JacobianPair& jp,
                                   std::optional<double> char_len = std::nullopt,
                                   const Tolerances& tol = {});

struct IsotropicConfiguration {
  WorkingMode mode;
  JointVector joints;
  bool within_limits = false;
  std::optional<Magnitude> condition;  // evaluated when within limits
};

struct IsotropyReport {
  double e1_dot_e2 = 0.0;
  bool exists = false;
  std::optional<Pose> pose;
  std::vector<IsotropicConfiguration> configurations;  // one per working mode
  std::string summary;
};

/// Checks whether the translation stage admits a configuration with both
/// rods aligned with their rails, and locates it.
IsotropyReport isotropy_locus_check(const MechanismGeometry& geom);

struct TransmissionVerdict {
  bool within = false;
  std::size_t samples = 0;
  std::optional<Pose> first_violation;
};

/// True iff every sampled pose of the region has all velocity factors in
/// [1/psi, psi]. An unreachable sample throws ErrorKind::Unreachable.
TransmissionVerdict transmission_bounds(const MechanismGeometry& geom,
                                        const WorkspaceBox& region, double psi,
                                        const WorkingMode& mode, const Tolerances& tol = {},
                                        unsigned workers = 1);

}  // namespace pkm
