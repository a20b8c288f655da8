#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "pkmkit/geometry.hpp"
#include "pkmkit/grid.hpp"
#include "pkmkit/jacobians.hpp"
#include "pkmkit/kinematics.hpp"
#include "pkmkit/kinetostatics.hpp"

namespace pkm {

struct CellRecord {
  bool reachable = false;
  Magnitude sigma_min;
  Magnitude sigma_max;
  Magnitude condition;
  std::vector<bool> serial_flags;
  bool parallel_flag = false;

  bool singular() const;
  /// Reachable, no singularity flag, all factors within [1/psi, psi].
  bool admissible(double psi) const;
  bool degraded(double threshold) const;
};

struct ScanProvenance {
  std::string geometry_hash;
  Tolerances tolerances;
  WorkingMode mode;
  JacobianMode jacobian_mode = JacobianMode::Consistent;
  double psi = 2.0;
  double degraded_condition = 100.0;
  std::optional<double> char_len;  // used for spatial variants
};

/// Grid of classified cells. Cells are stored row-major: x varies fastest,
/// then y, then beta, then gamma.
struct WorkspaceMap {
  WorkspaceBox box;
  Variant variant = Variant::Planar2T;
  std::vector<CellRecord> cells;
  ScanProvenance provenance;

  struct Index {
    std::size_t ix = 0, iy = 0, ib = 0, ig = 0;
  };

  std::size_t nx() const { return box.x.count(); }
  std::size_t ny() const { return box.y.count(); }
  std::size_t nb() const { return box.beta ? box.beta->count() : 1; }
  std::size_t ng() const { return box.gamma ? box.gamma->count() : 1; }
  std::size_t size() const { return nx() * ny() * nb() * ng(); }

  std::size_t flat(const Index& i) const { return ((i.ig * nb() + i.ib) * ny() + i.iy) * nx() + i.ix; }
  Index unflat(std::size_t k) const;
  Pose pose_at(const Index& i) const;
  const CellRecord& at(const Index& i) const { return cells[flat(i)]; }
};

struct ScanOptions {
  Tolerances tolerances;
  JacobianMode jacobian_mode = JacobianMode::Consistent;
  double degraded_condition = 100.0;
  std::optional<double> char_len;  // defaults to the tool's characteristic length
  unsigned workers = 1;
};

/// Evaluates IK, Jacobians and amplification at every grid node.
/// Unreachable nodes are data, not errors. Output is independent of the
/// worker count.
WorkspaceMap scan(const MechanismGeometry& geom, const WorkspaceBox& box,
                  const WorkingMode& mode, double psi, const ScanOptions& opts = {});

/// Classifies one pose exactly as scan does.
CellRecord evaluate_cell(const MechanismGeometry& geom, const Pose& pose,
                         const WorkingMode& mode, const ScanOptions& opts);

enum class SquareOrientation { AxisAligned, Oblique45 };

const char* to_string(SquareOrientation o) noexcept;
SquareOrientation square_orientation_from_string(const std::string& name);

/// Largest square of the given orientation made of admissible cells.
/// Axis-aligned squares cover the cells with max(|di|, |dj|) <= k,
/// oblique ones the cells with |di| + |dj| <= k. half_side is the
/// geometric half side of the sampled square: (k + 1/2) h for axis-aligned,
/// (k + 1/2) h / sqrt(2) for oblique.
struct SquareWorkspace {
  double center_x = 0.0;
  double center_y = 0.0;
  std::size_t center_ix = 0, center_iy = 0;
  int radius_cells = 0;
  double half_side = 0.0;
  SquareOrientation orientation = SquareOrientation::AxisAligned;
  double psi_bound = 2.0;

  /// Grid indices (ix, iy) of every cell the square covers.
  std::vector<std::pair<std::size_t, std::size_t>> cells() const;
  /// Corners of the square outline in (x, y), counter-clockwise.
  std::vector<std::pair<double, double>> outline(double step) const;
};

SquareWorkspace max_square(const WorkspaceMap& map, SquareOrientation orientation, double psi);

/// Axis-aligned joint-space box of the translation stage whose forward
/// images all satisfy the psi bound with no singularity flag.
struct JointRanges {
  std::array<std::pair<double, double>, 2> ranges;
  JointVector anchor;
  bool anchored_at_isotropic = false;
  int assembly = +1;
  double scale = 0.0;  // half-width of the unclipped box
};

struct RangeOptions {
  Tolerances tolerances;
  int samples_per_axis = 33;
  int bisection_steps = 60;
};

JointRanges joint_range_limits(const MechanismGeometry& geom, double psi,
                               const WorkingMode& mode, const RangeOptions& opts = {});

/// The predicate joint_range_limits bisects on, for a given joint box.
bool joint_box_admissible(const MechanismGeometry& geom,
                          const std::array<std::pair<double, double>, 2>& box, int assembly,
                          double psi, int samples_per_axis, const Tolerances& tol = {});

}  // namespace pkm
