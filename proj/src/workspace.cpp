#include "pkmkit/workspace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include <fmt/format.h>

#include "pkmkit/config.hpp"

namespace pkm {

void validate(const GridAxis& axis, const char* name) {
  if (!std::isfinite(axis.lo) || !std::isfinite(axis.hi))
    throw Error(ErrorKind::Config, fmt::format("{} axis: bounds must be finite", name));
  if (axis.lo > axis.hi)
    throw Error(ErrorKind::Config, fmt::format("{} axis: lo must be <= hi", name));
  if (axis.resolution < 3)
    throw Error(ErrorKind::Config,
                fmt::format("{} axis: resolution must be >= 3 (got {})", name, axis.resolution));
}

bool CellRecord::singular() const {
  if (parallel_flag) return true;
  return std::any_of(serial_flags.begin(), serial_flags.end(), [](bool b) { return b; });
}

bool CellRecord::admissible(double psi) const {
  if (!reachable || singular() || sigma_min.infinite || sigma_max.infinite) return false;
  return sigma_min.value >= 1.0 / psi && sigma_max.value <= psi;
}

bool CellRecord::degraded(double threshold) const {
  return reachable && (condition.infinite || condition.value > threshold);
}

WorkspaceMap::Index WorkspaceMap::unflat(std::size_t k) const {
  Index i;
  i.ix = k % nx();
  k /= nx();
  i.iy = k % ny();
  k /= ny();
  i.ib = k % nb();
  i.ig = k / nb();
  return i;
}

Pose WorkspaceMap::pose_at(const Index& i) const {
  Pose p;
  p.x = box.x.at(i.ix);
  p.y = box.y.at(i.iy);
  if (variant != Variant::Planar2T) p.beta = box.beta ? box.beta->at(i.ib) : 0.0;
  if (variant == Variant::Spatial2T2R) p.gamma = box.gamma ? box.gamma->at(i.ig) : 0.0;
  return p;
}

CellRecord evaluate_cell(const MechanismGeometry& geom, const Pose& pose,
                         const WorkingMode& mode, const ScanOptions& opts) {
  CellRecord cell;
  InverseSolution ik;
  try {
    ik = inverse_kinematics(geom, pose, mode, opts.tolerances);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Unreachable || e.kind() == ErrorKind::JointLimit) return cell;
    throw;
  }
  cell.reachable = true;

  const JacobianPair jp =
      build_jacobians(geom, pose, ik.joints, opts.jacobian_mode, opts.tolerances);
  const SingularityReport rep = classify(jp, geom, pose, ik.joints, opts.tolerances);
  cell.serial_flags = rep.serial_singular;
  cell.parallel_flag = rep.parallel_singular;

  std::optional<double> char_len;
  if (jp.rotational_rows > 0) char_len = opts.char_len.value_or(geom.tool->char_length());
  try {
    const AmplificationProfile prof = amplification(jp, char_len, opts.tolerances);
    cell.sigma_min = prof.sigma_min();
    cell.sigma_max = prof.sigma_max();
    cell.condition = prof.condition_number;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Singular) throw;
    cell.sigma_min = Magnitude::finite(0.0);
    cell.sigma_max = Magnitude::unbounded();
    cell.condition = Magnitude::unbounded();
  }
  return cell;
}

WorkspaceMap scan(const MechanismGeometry& geom, const WorkspaceBox& box,
                  const WorkingMode& mode, double psi, const ScanOptions& opts) {
  validate(box.x, "x");
  validate(box.y, "y");
  const int n_rot = rotational_dof(geom.variant);
  if (box.beta) {
    if (n_rot < 1) throw Error(ErrorKind::Config, "beta axis requires a spatial variant");
    validate(*box.beta, "beta");
  }
  if (box.gamma) {
    if (n_rot < 2) throw Error(ErrorKind::Config, "gamma axis requires spatial_2t2r");
    validate(*box.gamma, "gamma");
  }
  if (!(psi > 1.0)) throw Error(ErrorKind::Config, "psi must be > 1");
  if (mode.signs.size() != geom.legs())
    throw Error(ErrorKind::Config, fmt::format("working mode: expected {} signs, got {}",
                                               geom.legs(), mode.signs.size()));

  WorkspaceMap map;
  map.box = box;
  map.variant = geom.variant;
  map.provenance.geometry_hash = geometry_hash(geom);
  map.provenance.tolerances = opts.tolerances;
  map.provenance.mode = mode;
  map.provenance.jacobian_mode = opts.jacobian_mode;
  map.provenance.psi = psi;
  map.provenance.degraded_condition = opts.degraded_condition;
  ScanOptions eval = opts;
  if (n_rot > 0) eval.char_len = opts.char_len.value_or(geom.tool->char_length());
  map.provenance.char_len = eval.char_len;

  map.cells.resize(map.size());
  const unsigned workers = std::max(1u, opts.workers);
  auto work = [&](unsigned w) {
    for (std::size_t k = w; k < map.cells.size(); k += workers)
      map.cells[k] = evaluate_cell(geom, map.pose_at(map.unflat(k)), mode, eval);
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          work(w);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  return map;
}

const char* to_string(SquareOrientation o) noexcept {
  return o == SquareOrientation::AxisAligned ? "axis_aligned" : "oblique_45deg";
}

SquareOrientation square_orientation_from_string(const std::string& name) {
  if (name == "axis_aligned") return SquareOrientation::AxisAligned;
  if (name == "oblique_45deg") return SquareOrientation::Oblique45;
  throw Error(ErrorKind::Config,
              "orientation: expected axis_aligned or oblique_45deg, got '" + name + "'");
}

namespace {

int ring_metric(SquareOrientation o, long di, long dj) {
  const long a = std::labs(di), b = std::labs(dj);
  return static_cast<int>(o == SquareOrientation::AxisAligned ? std::max(a, b) : a + b);
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> SquareWorkspace::cells() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  const long k = radius_cells;
  for (long dj = -k; dj <= k; ++dj) {
    for (long di = -k; di <= k; ++di) {
      if (ring_metric(orientation, di, dj) > k) continue;
      out.emplace_back(static_cast<std::size_t>(static_cast<long>(center_ix) + di),
                       static_cast<std::size_t>(static_cast<long>(center_iy) + dj));
    }
  }
  return out;
}

std::vector<std::pair<double, double>> SquareWorkspace::outline(double step) const {
  const double r = (radius_cells + 0.5) * step;
  const double cx = center_x, cy = center_y;
  if (orientation == SquareOrientation::AxisAligned)
    return {{cx - r, cy - r}, {cx + r, cy - r}, {cx + r, cy + r}, {cx - r, cy + r}};
  return {{cx, cy - r}, {cx + r, cy}, {cx, cy + r}, {cx - r, cy}};
}

SquareWorkspace max_square(const WorkspaceMap& map, SquareOrientation orientation, double psi) {
  if (map.nb() != 1 || map.ng() != 1)
    throw Error(ErrorKind::Config, "max_square: map must be a single (x, y) slice");
  if (!(psi > 1.0)) throw Error(ErrorKind::Config, "psi must be > 1");
  const double hx = map.box.x.step(), hy = map.box.y.step();
  if (!map.box.x.degenerate() && !map.box.y.degenerate() &&
      std::abs(hx - hy) > 1e-9 * std::max(hx, hy))
    throw Error(ErrorKind::Config, "max_square: x and y grid steps must be equal");
  const double h = map.box.x.degenerate() ? hy : hx;

  const long nx = static_cast<long>(map.nx()), ny = static_cast<long>(map.ny());
  std::vector<char> ok(map.size());
  for (std::size_t k = 0; k < map.size(); ++k) ok[k] = map.cells[k].admissible(psi);
  auto admissible = [&](long ix, long iy) {
    return ix >= 0 && iy >= 0 && ix < nx && iy < ny &&
           ok[static_cast<std::size_t>(iy * nx + ix)];
  };

  int best = -1;
  long best_ix = 0, best_iy = 0;
  // x outer, y inner: the first center reaching a radius is the
  // lexicographically smallest (x, y).
  for (long ix = 0; ix < nx; ++ix) {
    for (long iy = 0; iy < ny; ++iy) {
      if (!admissible(ix, iy)) continue;
      int k = 0;
      for (;;) {
        const int ring = k + 1;
        bool full = true;
        for (long dj = -ring; dj <= ring && full; ++dj) {
          for (long di = -ring; di <= ring; ++di) {
            if (ring_metric(orientation, di, dj) != ring) continue;
            if (!admissible(ix + di, iy + dj)) {
              full = false;
              break;
            }
          }
        }
        if (!full) break;
        k = ring;
      }
      if (k > best) {
        best = k;
        best_ix = ix;
        best_iy = iy;
      }
    }
  }
  if (best < 0)
    throw Error(ErrorKind::EmptyWorkspace,
                fmt::format("no admissible cell for psi = {:.9g}", psi));

  SquareWorkspace sq;
  sq.center_ix = static_cast<std::size_t>(best_ix);
  sq.center_iy = static_cast<std::size_t>(best_iy);
  sq.center_x = map.box.x.at(sq.center_ix);
  sq.center_y = map.box.y.at(sq.center_iy);
  sq.radius_cells = best;
  sq.orientation = orientation;
  sq.psi_bound = psi;
  sq.half_side = (best + 0.5) * h;
  if (orientation == SquareOrientation::Oblique45) sq.half_side /= std::sqrt(2.0);
  return sq;
}

bool joint_box_admissible(const MechanismGeometry& geom,
                          const std::array<std::pair<double, double>, 2>& box, int assembly,
                          double psi, int samples_per_axis, const Tolerances& tol) {
  const MechanismGeometry stage = translation_stage(geom);
  auto axis = [&](std::size_t i) {
    return GridAxis{box[i].first, box[i].second, samples_per_axis};
  };
  const GridAxis a1 = axis(0), a2 = axis(1);
  for (std::size_t i = 0; i < a1.count(); ++i) {
    for (std::size_t j = 0; j < a2.count(); ++j) {
      const JointVector joints{{a1.at(i), a2.at(j)}, std::nullopt};
      try {
        const AssemblySolution sol = forward_kinematics_planar(stage, joints, assembly, tol);
        const JacobianPair jp = build_planar(stage, sol.pose, joints, tol);
        if (classify(jp, stage, sol.pose, joints, tol).any()) return false;
        if (!amplification(jp).within(psi)) return false;
      } catch (const Error&) {
        return false;
      }
    }
  }
  return true;
}

JointRanges joint_range_limits(const MechanismGeometry& geom, double psi,
                               const WorkingMode& mode, const RangeOptions& opts) {
  if (!(psi > 1.0)) throw Error(ErrorKind::Config, "psi must be > 1");
  if (mode.signs.size() < 2)
    throw Error(ErrorKind::Config, "working mode: need signs for the two translation legs");
  const MechanismGeometry stage = translation_stage(geom);
  const WorkingMode stage_mode{{mode.signs[0], mode.signs[1]}};

  JointRanges out;
  Pose anchor_pose;
  bool anchored = false;
  const IsotropyReport iso = isotropy_locus_check(stage);
  if (iso.exists) {
    for (const auto& cfg : iso.configurations) {
      if (cfg.mode.signs == stage_mode.signs && cfg.within_limits) {
        out.anchor = cfg.joints;
        anchor_pose = *iso.pose;
        anchored = out.anchored_at_isotropic = true;
      }
    }
  }
  if (!anchored) {
    // Minimum-condition node of a scan over the stage's bounding box.
    double lo[2] = {-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    double hi[2] = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i < 2; ++i) {
      const auto& leg = stage.translation_legs[i];
      const Vec3 s0 = leg.foot(leg.rho_min) - stage.platform_offsets[i];
      const Vec3 s1 = leg.foot(leg.rho_max) - stage.platform_offsets[i];
      for (int c = 0; c < 2; ++c) {
        lo[c] = std::max(lo[c], std::min(s0[c], s1[c]) - leg.leg_length);
        hi[c] = std::min(hi[c], std::max(s0[c], s1[c]) + leg.leg_length);
      }
    }
    if (!(lo[0] <= hi[0] && lo[1] <= hi[1]))
      throw Error(ErrorKind::EmptyWorkspace, "translation legs have no common reach");
    const WorkspaceBox box{{lo[0], hi[0], 101}, {lo[1], hi[1], 101}, {}, {}};
    ScanOptions so;
    so.tolerances = opts.tolerances;
    const WorkspaceMap map = scan(stage, box, stage_mode, psi, so);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < map.size(); ++k) {
      const CellRecord& c = map.cells[k];
      if (!c.reachable || c.singular() || c.condition.infinite) continue;
      if (c.condition.value < best) {
        best = c.condition.value;
        anchor_pose = map.pose_at(map.unflat(k));
      }
    }
    if (!std::isfinite(best))
      throw Error(ErrorKind::EmptyWorkspace, "no regular configuration found for this mode");
    out.anchor = inverse_kinematics(stage, anchor_pose, stage_mode, opts.tolerances).joints;
  }

  out.assembly = planar_assembly_of(stage, anchor_pose, out.anchor);
  if (out.assembly == 0)
    throw Error(ErrorKind::EmptyWorkspace, "anchor configuration is parallel-singular");

  auto box_at = [&](double s) {
    std::array<std::pair<double, double>, 2> b;
    for (std::size_t i = 0; i < 2; ++i) {
      const auto& leg = stage.translation_legs[i];
      b[i] = {std::max(out.anchor.rho[i] - s, leg.rho_min),
              std::min(out.anchor.rho[i] + s, leg.rho_max)};
    }
    return b;
  };
  auto pred = [&](double s) {
    return joint_box_admissible(stage, box_at(s), out.assembly, psi, opts.samples_per_axis,
                                opts.tolerances);
  };

  if (!pred(0.0))
    throw Error(ErrorKind::EmptyWorkspace,
                fmt::format("anchor configuration violates psi = {:.9g}", psi));
  double s_hi = 0.0;
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& leg = stage.translation_legs[i];
    s_hi = std::max({s_hi, out.anchor.rho[i] - leg.rho_min, leg.rho_max - out.anchor.rho[i]});
  }
  double s_lo = 0.0;
  if (pred(s_hi)) {
    s_lo = s_hi;
  } else {
    for (int it = 0; it < opts.bisection_steps && s_hi - s_lo > 1e-13 * (1.0 + s_hi); ++it) {
      const double mid = 0.5 * (s_lo + s_hi);
      (pred(mid) ? s_lo : s_hi) = mid;
    }
  }
  out.scale = s_lo;
  out.ranges = box_at(s_lo);
  return out;
}

}  // namespace pkm
