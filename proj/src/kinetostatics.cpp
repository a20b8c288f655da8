#include "pkmkit/kinetostatics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "pkmkit/workspace.hpp"

namespace pkm {

namespace {

double defect(const Eigen::MatrixXd& J) {
  const Eigen::MatrixXd D = J.transpose() * J - Eigen::MatrixXd::Identity(J.rows(), J.cols());
  return D.cwiseAbs().maxCoeff();
}

std::string pose_text(const Pose& p) {
  std::string s = fmt::format("({:.9g}, {:.9g}", p.x, p.y);
  if (p.beta) s += fmt::format(", beta {:.9g}", *p.beta);
  if (p.gamma) s += fmt::format(", gamma {:.9g}", *p.gamma);
  return s + ")";
}

}  // namespace

bool AmplificationProfile::within(double psi) const {
  for (const auto& s : singular_values) {
    if (s.infinite || s.value < 1.0 / psi || s.value > psi) return false;
  }
  return !singular_values.empty();
}

AmplificationProfile amplification(const Eigen::MatrixXd& J) {
  if (J.rows() != J.cols())
    throw Error(ErrorKind::Config,
                fmt::format("amplification: J must be square, got {}x{}", J.rows(), J.cols()));
  if (J.rows() < 2 || J.rows() > 5)
    throw Error(ErrorKind::Config,
                fmt::format("amplification: unsupported size {}", J.rows()));
  if (!J.allFinite()) throw Error(ErrorKind::Config, "amplification: non-finite J");

  const Eigen::VectorXd s = Eigen::JacobiSVD<Eigen::MatrixXd>(J).singularValues();
  const double n = static_cast<double>(J.rows());
  const double zero = std::numeric_limits<double>::epsilon() * n * s[0];

  AmplificationProfile out;
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    out.singular_values.push_back(Magnitude::finite(s[k]));
    out.force_factors.push_back(s[k] <= zero ? Magnitude::unbounded()
                                             : Magnitude::finite(1.0 / s[k]));
  }
  const double smin = s[s.size() - 1];
  out.condition_number =
      smin <= zero ? Magnitude::unbounded() : Magnitude::finite(s[0] / smin);
  out.isotropy_defect = Magnitude::finite(defect(J));
  return out;
}

AmplificationProfile amplification(const JacobianPair& jp, std::optional<double> char_len,
                                   const Tolerances& tol) {
  JacobianPair h = char_len ? homogenize(jp, *char_len) : jp;
  if (h.rotational_rows > 0 && !h.scale)
    throw Error(ErrorKind::Units,
                "Jacobian mixes translational and rotational rows; a characteristic length "
                "is required");
  if (h.J) return amplification(*h.J);

  // Parallel singularity: use the inverse Jacobian B^-1 A, whose singular
  // values are the force factors.
  const Eigen::VectorXd b = h.B.diagonal();
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    if (b[i] == 0.0)
      throw Error(ErrorKind::Singular,
                  "configuration is both parallel- and serial-singular; amplification "
                  "undefined");
  }
  const Eigen::MatrixXd K = b.cwiseInverse().asDiagonal() * h.A;
  Eigen::VectorXd k = Eigen::JacobiSVD<Eigen::MatrixXd>(K).singularValues();  // descending
  const double n = static_cast<double>(K.rows());
  const double zero =
      std::max(std::numeric_limits<double>::epsilon() * n, tol.parallel) * k[0];

  AmplificationProfile out;
  // Velocity factors descending = force factors ascending.
  for (Eigen::Index idx = k.size() - 1; idx >= 0; --idx) {
    const bool null = k[idx] <= zero || idx == k.size() - 1;
    out.singular_values.push_back(null ? Magnitude::unbounded()
                                       : Magnitude::finite(1.0 / k[idx]));
    out.force_factors.push_back(Magnitude::finite(k[idx]));
  }
  out.condition_number = Magnitude::unbounded();
  out.isotropy_defect = Magnitude::unbounded();
  return out;
}

IsotropyReport isotropy_locus_check(const MechanismGeometry& geom) {
  const MechanismGeometry stage = translation_stage(geom);
  const LegGeometry& l1 = stage.translation_legs[0];
  const LegGeometry& l2 = stage.translation_legs[1];

  IsotropyReport rep;
  rep.e1_dot_e2 = l1.rail_axis.dot(l2.rail_axis);
  if (std::abs(rep.e1_dot_e2) >= 1e-12) {
    rep.summary = fmt::format("e1·e2 = {:.9g}: no isotropic configuration exists", rep.e1_dot_e2);
    return rep;
  }

  // Both rods along their rails: p + d_i lies on rail line i.
  const Vec3 o1 = l1.rail_origin - stage.platform_offsets[0];
  const Vec3 o2 = l2.rail_origin - stage.platform_offsets[1];
  Eigen::Matrix2d M;
  M << l1.rail_axis.x(), -l2.rail_axis.x(), l1.rail_axis.y(), -l2.rail_axis.y();
  const Eigen::Vector2d t = M.partialPivLu().solve(Eigen::Vector2d(o2.x() - o1.x(), o2.y() - o1.y()));
  const Vec3 p = o1 + t[0] * l1.rail_axis;
  // +0.0 turns a signed zero into a plain zero for reporting.
  const Pose pose{p.x() + 0.0, p.y() + 0.0, std::nullopt, std::nullopt, std::nullopt};

  rep.exists = true;
  rep.pose = pose;
  const std::array<double, 2> along{l1.rail_axis.dot(pose.point() + stage.platform_offsets[0] - l1.rail_origin),
                                    l2.rail_axis.dot(pose.point() + stage.platform_offsets[1] - l2.rail_origin)};
  for (const WorkingMode& mode : WorkingMode::all(2)) {
    IsotropicConfiguration cfg;
    cfg.mode = mode;
    for (std::size_t i = 0; i < 2; ++i)
      cfg.joints.rho.push_back(along[i] + mode.signs[i] * stage.translation_legs[i].leg_length);
    cfg.within_limits = true;
    for (std::size_t i = 0; i < 2; ++i) {
      const auto& leg = stage.translation_legs[i];
      cfg.within_limits = cfg.within_limits && cfg.joints.rho[i] >= leg.rho_min &&
                          cfg.joints.rho[i] <= leg.rho_max;
    }
    if (cfg.within_limits) {
      const JacobianPair jp = build_planar(stage, pose, cfg.joints);
      cfg.condition = amplification(jp).condition_number;
    }
    rep.configurations.push_back(std::move(cfg));
  }
  rep.summary = fmt::format("e1·e2 = 0, isotropic pose ({:.9g}, {:.9g})", pose.x, pose.y);
  return rep;
}

TransmissionVerdict transmission_bounds(const MechanismGeometry& geom, const WorkspaceBox& region,
                                        double psi, const WorkingMode& mode,
                                        const Tolerances& tol, unsigned workers) {
  if (!(psi > 1.0)) throw Error(ErrorKind::Config, "psi must be > 1");
  ScanOptions opts;
  opts.tolerances = tol;
  opts.workers = workers;
  const WorkspaceMap map = scan(geom, region, mode, psi, opts);

  TransmissionVerdict v;
  v.samples = map.size();
  for (std::size_t k = 0; k < map.size(); ++k) {
    const CellRecord& cell = map.cells[k];
    const Pose pose = map.pose_at(map.unflat(k));
    if (!cell.reachable)
      throw Error(ErrorKind::Unreachable,
                  "region leaves the workspace; first unreachable pose " + pose_text(pose));
    if (!v.first_violation && !cell.admissible(psi)) v.first_violation = pose;
  }
  v.within = !v.first_violation.has_value();
  return v;
}

}  // namespace pkm
