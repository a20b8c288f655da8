#include "cli.hpp"

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "pkmkit/config.hpp"
#include "pkmkit/jacobians.hpp"
#include "pkmkit/kinematics.hpp"
#include "pkmkit/kinetostatics.hpp"
#include "pkmkit/map_export.hpp"
#include "pkmkit/workspace.hpp"

#ifndef PKMKIT_VERSION
#define PKMKIT_VERSION "0.0.0"
#endif
#ifndef PKMKIT_DEFAULT_CONFIG_DIR
#define PKMKIT_DEFAULT_CONFIG_DIR "configs"
#endif

namespace pkm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::Units: return kConfig;
    case ErrorKind::Unreachable:
    case ErrorKind::JointLimit: return kUnreachable;
    case ErrorKind::Singular: return kSingular;
    case ErrorKind::NoAssembly:
    case ErrorKind::NoConvergence: return kNoAssembly;
    default: return kOther;
  }
}

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(',', start), text.size());
    std::string item = text.substr(start, end - start);
    const auto first = item.find_first_not_of(" \t");
    const auto last = item.find_last_not_of(" \t");
    item = first == std::string::npos ? "" : item.substr(first, last - first + 1);
    const char* b = item.data();
    if (!item.empty() && *b == '+') ++b;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(b, item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size())
      throw Error(ErrorKind::Config, fmt::format("{}: cannot parse '{}' as a number", what, item));
    out.push_back(v);
    start = end + 1;
  }
  return out;
}

fs::path resolve_config(const std::string& arg) {
  if (arg.empty()) throw Error(ErrorKind::Config, "--config is required");
  const fs::path direct(arg);
  if (fs::exists(direct)) return direct;
  std::vector<fs::path> dirs;
  if (const char* env = std::getenv("PKMKIT_CONFIG_DIR")) {
    std::stringstream ss(env);
    for (std::string d; std::getline(ss, d, ':');)
      if (!d.empty()) dirs.emplace_back(d);
  }
  dirs.emplace_back(PKMKIT_DEFAULT_CONFIG_DIR);
  if (direct.is_relative()) {
    for (const auto& d : dirs) {
      for (const fs::path& cand : {d / direct, d / fs::path(arg + ".json")})
        if (fs::exists(cand)) return cand;
    }
  }
  throw Error(ErrorKind::Config, "config '" + arg + "' not found");
}

namespace {

std::string g9(double v) { return fmt::format("{:.9g}", v + 0.0); }

std::string mag9(const Magnitude& m) { return m.infinite ? "inf" : g9(m.value); }

std::string vec_text(const Vec3& v) {
  return fmt::format("({}, {}, {})", g9(v.x()), g9(v.y()), g9(v.z()));
}

std::string list_text(const std::vector<double>& v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + g9(v[i]);
  return s + ")";
}

std::string mode_text(const WorkingMode& m) {
  std::string s = "(";
  for (std::size_t i = 0; i < m.signs.size(); ++i) s += (i ? "," : "") + fmt::format("{:+d}", m.signs[i]);
  return s + ")";
}

std::vector<double> pose_values(const Pose& p) {
  std::vector<double> v{p.x, p.y};
  if (p.beta) v.push_back(*p.beta);
  if (p.gamma) v.push_back(*p.gamma);
  if (p.z) v.push_back(*p.z);
  return v;
}

std::vector<double> joint_values(const JointVector& j) {
  std::vector<double> v = j.rho;
  if (j.z) v.push_back(*j.z);
  return v;
}

json error_json(const Error& e) {
  return json{{"kind", to_string(e.kind())}, {"message", e.what()}};
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c) + 0.0);
    rows.push_back(std::move(row));
  }
  return rows;
}

void print_matrix(std::ostream& out, const char* name, const Eigen::MatrixXd& m) {
  out << name << " =\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out << " ";
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << fmt::format(" {:>16}", g9(m(r, c)));
    out << "\n";
  }
}

json mags_json(const std::vector<Magnitude>& v) {
  json a = json::array();
  for (const auto& m : v) a.push_back(to_json(m));
  return a;
}

std::string mags_text(const std::vector<Magnitude>& v) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + mag9(v[i]);
  return s + ")";
}

struct Options {
  std::string config;
  std::optional<double> tol_parallel;
  std::optional<double> tol_serial;
  std::string mode;
  std::string assembly = "all";
  std::string json_path;
  std::string csv_path;
  std::string svg_path;
  unsigned workers = 1;
  std::string pose;
  std::string joints;
  bool literal = false;
  std::optional<double> char_len;
  std::string box;
  std::string resolution = "101";
  std::optional<double> psi;
  std::string orientation = "both";
  std::string map_path;
  double degraded = 100.0;
  int samples = 33;
};

class Runner {
 public:
  Runner(std::vector<std::string> args, std::ostream& out, std::ostream& err)
      : args_(std::move(args)), out_(out), err_(err) {}

  int operator()(const std::string& command, const Options& opt) {
    cmd_ = command;
    opt_ = opt;
    tol_.parallel = opt.tol_parallel.value_or(tol_.parallel);
    tol_.serial = opt.tol_serial.value_or(tol_.serial);
    if (!(tol_.parallel > 0.0) || !(tol_.serial > 0.0))
      throw Error(ErrorKind::Config, "tolerances must be positive");
    int code = kOk;
    if (command == "describe") code = describe();
    else if (command == "ik") code = ik();
    else if (command == "fk") code = fk();
    else if (command == "jacobian") code = jacobian();
    else if (command == "scan") code = scan_cmd();
    else if (command == "square") code = square();
    else if (command == "ranges") code = ranges();
    write_manifests();
    return code;
  }

 private:
  const MechanismGeometry& geometry() {
    if (!loaded_) {
      config_path_ = resolve_config(opt_.config);
      loaded_ = load_geometry(config_path_);
      for (const auto& w : loaded_->warnings) err_ << "warning: " << w << "\n";
    }
    return loaded_->geometry;
  }

  std::optional<WorkingMode> parse_mode(std::size_t legs, bool allow_all) {
    if (opt_.mode.empty() || opt_.mode == "all") {
      if (allow_all) return std::nullopt;
      if (opt_.mode == "all") throw Error(ErrorKind::Config, "--mode: a single working mode is required");
      return WorkingMode::uniform(legs, -1);
    }
    WorkingMode m;
    for (double v : parse_list(opt_.mode, "--mode")) {
      if (v != 1.0 && v != -1.0) throw Error(ErrorKind::Config, "--mode: signs must be +1 or -1");
      m.signs.push_back(static_cast<int>(v));
    }
    if (m.signs.size() == 1) m = WorkingMode::uniform(legs, m.signs[0]);
    if (m.signs.size() != legs)
      throw Error(ErrorKind::Config,
                  fmt::format("--mode: expected {} signs, got {}", legs, m.signs.size()));
    return m;
  }

  Pose parse_pose(const MechanismGeometry& g) {
    if (opt_.pose.empty()) throw Error(ErrorKind::Config, "--pose is required");
    const auto v = parse_list(opt_.pose, "--pose");
    const std::size_t n_rot = static_cast<std::size_t>(rotational_dof(g.variant));
    const std::size_t expect = 2 + n_rot + (g.stacked_z ? 1 : 0);
    if (v.size() != expect)
      throw Error(ErrorKind::Config, fmt::format("--pose: expected {} values for {}, got {}",
                                                 expect, to_string(g.variant), v.size()));
    Pose p{v[0], v[1], std::nullopt, std::nullopt, std::nullopt};
    if (n_rot >= 1) p.beta = v[2];
    if (n_rot >= 2) p.gamma = v[3];
    if (g.stacked_z) p.z = v.back();
    return p;
  }

  JointVector parse_joints(const MechanismGeometry& g) {
    if (opt_.joints.empty()) throw Error(ErrorKind::Config, "--joints is required");
    auto v = parse_list(opt_.joints, "--joints");
    const std::size_t expect = g.legs() + (g.stacked_z ? 1 : 0);
    if (v.size() != expect)
      throw Error(ErrorKind::Config, fmt::format("--joints: expected {} values for {}, got {}",
                                                 expect, to_string(g.variant), v.size()));
    JointVector j;
    if (g.stacked_z) {
      j.z = v.back();
      v.pop_back();
    }
    j.rho = std::move(v);
    return j;
  }

  std::vector<int> parse_assembly() {
    if (opt_.assembly == "all") return {+1, -1};
    if (opt_.assembly == "+1" || opt_.assembly == "1") return {+1};
    if (opt_.assembly == "-1") return {-1};
    throw Error(ErrorKind::Config, "--assembly: expected +1, -1 or all");
  }

  std::optional<double> char_len(const MechanismGeometry& g) {
    if (opt_.char_len) {
      if (!(*opt_.char_len > 0.0)) throw Error(ErrorKind::Config, "--char-len must be positive");
      return opt_.char_len;
    }
    if (rotational_dof(g.variant) > 0) return g.tool->char_length();
    return std::nullopt;
  }

  WorkspaceBox parse_box(const MechanismGeometry& g) {
    if (opt_.box.empty()) throw Error(ErrorKind::Config, "--box is required");
    const auto b = parse_list(opt_.box, "--box");
    if (b.size() != 4 && b.size() != 6 && b.size() != 8)
      throw Error(ErrorKind::Config, "--box: expected xlo,xhi,ylo,yhi[,blo,bhi[,glo,ghi]]");
    const auto r = parse_list(opt_.resolution, "--resolution");
    const std::size_t axes = b.size() / 2;
    if (r.size() != 1 && r.size() != axes)
      throw Error(ErrorKind::Config, fmt::format("--resolution: expected 1 or {} values", axes));
    auto res = [&](std::size_t i) {
      const double v = r.size() == 1 ? r[0] : r[i];
      if (v != std::floor(v) || v < 1 || v > 1e6)
        throw Error(ErrorKind::Config, "--resolution: expected positive integers");
      return static_cast<int>(v);
    };
    WorkspaceBox box;
    box.x = GridAxis{b[0], b[1], res(0)};
    box.y = GridAxis{b[2], b[3], res(1)};
    if (axes >= 3) box.beta = GridAxis{b[4], b[5], res(2)};
    if (axes >= 4) box.gamma = GridAxis{b[6], b[7], res(3)};
    if (box.beta && rotational_dof(g.variant) < 1)
      throw Error(ErrorKind::Config, "--box: beta range requires a spatial variant");
    if (box.gamma && rotational_dof(g.variant) < 2)
      throw Error(ErrorKind::Config, "--box: gamma range requires spatial_2t2r");
    return box;
  }

  void write_output(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::Config, "cannot write '" + path + "'");
    f << content;
    if (!f) throw Error(ErrorKind::Config, "cannot write '" + path + "'");
    outputs_.push_back(path);
  }

  void write_json(const json& doc) {
    if (!opt_.json_path.empty()) write_output(opt_.json_path, doc.dump(2) + "\n");
  }

  void write_manifests() {
    if (outputs_.empty()) return;
    json m;
    m["command"] = args_;
    m["subcommand"] = cmd_;
    m["toolkit_version"] = PKMKIT_VERSION;
    if (loaded_) {
      m["config"] = config_path_.string();
      m["geometry_hash"] = geometry_hash(loaded_->geometry);
    }
    json overrides = json::object();
    if (opt_.tol_parallel) overrides["parallel"] = *opt_.tol_parallel;
    if (opt_.tol_serial) overrides["serial"] = *opt_.tol_serial;
    m["tolerance_overrides"] = overrides;
    m["tolerances"] = {{"parallel", tol_.parallel}, {"serial", tol_.serial}};
    m["outputs"] = outputs_;
    m["timestamp"] = fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::time(nullptr)));
    const std::string text = m.dump(2) + "\n";
    for (const auto& path : outputs_) {
      std::ofstream f(path + ".manifest.json", std::ios::binary);
      f << text;
    }
  }

  int describe() {
    const MechanismGeometry& g = geometry();
    out_ << "variant   " << to_string(g.variant) << "\n";
    out_ << "config    " << config_path_.string() << "\n";
    out_ << "hash      " << geometry_hash(g) << "\n\n";
    out_ << fmt::format("{:<5}{:<28}{:<28}{:>12}  {}\n", "leg", "rail origin", "rail axis", "length",
                        "rho range");
    for (std::size_t i = 0; i < g.legs(); ++i) {
      const LegGeometry& l = g.leg(i);
      out_ << fmt::format("{:<5}{:<28}{:<28}{:>12}  [{}, {}]\n", i + 1, vec_text(l.rail_origin),
                          vec_text(l.rail_axis), g9(l.leg_length), g9(l.rho_min), g9(l.rho_max));
    }
    for (std::size_t i = 0; i < 2; ++i)
      if (!g.platform_offsets[i].isZero())
        out_ << fmt::format("platform offset {}: {}\n", i + 1, vec_text(g.platform_offsets[i]));
    if (g.tool) {
      out_ << "\ntool\n";
      for (std::size_t k = 0; k < g.tool->anchor_offsets.size(); ++k)
        out_ << fmt::format("  anchor {}      {}\n", k + 3, vec_text(g.tool->anchor_offsets[k]));
      out_ << "  beta axis     " << vec_text(g.tool->beta_axis) << "\n";
      if (g.variant == Variant::Spatial2T2R)
        out_ << "  gamma axis    " << vec_text(g.tool->gamma_axis) << "\n";
      out_ << "  char length   " << g9(g.tool->char_length()) << "\n";
    }
    if (g.stacked_z)
      out_ << fmt::format("\nstacked z axis {} range [{}, {}]\n", vec_text(g.stacked_z->axis),
                          g9(g.stacked_z->rho_min), g9(g.stacked_z->rho_max));

    const IsotropyReport iso = isotropy_locus_check(g);
    out_ << "\nisotropy: " << iso.summary << "\n";
    json iso_json{{"e1_dot_e2", iso.e1_dot_e2}, {"exists", iso.exists}, {"summary", iso.summary}};
    if (iso.exists) {
      iso_json["pose"] = {iso.pose->x, iso.pose->y};
      json configs = json::array();
      for (const auto& c : iso.configurations) {
        std::string line = fmt::format("  mode {}  rho {}", mode_text(c.mode), list_text(c.joints.rho));
        json cj{{"mode", c.mode.signs}, {"rho", c.joints.rho}, {"within_limits", c.within_limits}};
        if (c.condition) {
          line += "  condition " + mag9(*c.condition);
          cj["condition"] = to_json(*c.condition);
        } else {
          line += "  outside joint limits";
        }
        out_ << line << "\n";
        configs.push_back(std::move(cj));
      }
      iso_json["configurations"] = std::move(configs);
    }
    if (!loaded_->warnings.empty()) {
      out_ << "\nwarnings\n";
      for (const auto& w : loaded_->warnings) out_ << "  " << w << "\n";
    }
    write_json(json{{"command", "describe"},
                    {"geometry", to_json(g)},
                    {"geometry_hash", geometry_hash(g)},
                    {"isotropy", std::move(iso_json)},
                    {"warnings", loaded_->warnings}});
    return kOk;
  }

  int ik() {
    const MechanismGeometry& g = geometry();
    const Pose pose = parse_pose(g);
    const auto requested = parse_mode(g.legs(), true);
    const std::vector<WorkingMode> modes =
        requested ? std::vector<WorkingMode>{*requested} : WorkingMode::all(g.legs());

    out_ << "pose " << list_text(pose_values(pose)) << "\n";
    out_ << fmt::format("{:<16}", "mode");
    for (std::size_t i = 0; i < g.legs(); ++i) out_ << fmt::format("{:>16}", fmt::format("rho{}", i + 1));
    if (g.stacked_z) out_ << fmt::format("{:>16}", "z");
    out_ << "  status\n";

    json rows = json::array();
    std::optional<Error> first_error;
    std::size_t solved = 0;
    for (const auto& m : modes) {
      out_ << fmt::format("{:<16}", mode_text(m));
      json row{{"mode", m.signs}};
      try {
        const InverseSolution s = inverse_kinematics(g, pose, m, tol_);
        for (double r : joint_values(s.joints)) out_ << fmt::format("{:>16}", g9(r));
        std::string status = "ok";
        if (!s.serial_singular_legs.empty()) {
          status = "serial-singular leg";
          for (auto l : s.serial_singular_legs) status += fmt::format(" {}", l + 1);
        }
        out_ << "  " << status << "\n";
        row["rho"] = s.joints.rho;
        if (s.joints.z) row["z"] = *s.joints.z;
        json legs = json::array();
        for (auto l : s.serial_singular_legs) legs.push_back(l + 1);
        row["serial_singular_legs"] = std::move(legs);
        ++solved;
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::Config) throw;
        out_ << "  " << to_string(e.kind()) << ": " << e.what() << "\n";
        row["error"] = error_json(e);
        if (!first_error) first_error = e;
      }
      rows.push_back(std::move(row));
    }
    write_json(json{{"command", "ik"}, {"pose", pose_values(pose)}, {"solutions", std::move(rows)}});
    if (solved == 0 && first_error) {
      err_ << "error: " << first_error->what() << "\n";
      return exit_code(first_error->kind());
    }
    return kOk;
  }

  int fk() {
    const MechanismGeometry& g = geometry();
    const JointVector joints = parse_joints(g);
    const auto assemblies = parse_assembly();
    out_ << "joints " << list_text(joint_values(joints)) << "\n";
    out_ << fmt::format("{:<10}{:<48}{:>14}  {}\n", "assembly", "pose", "residual", "flags");

    json rows = json::array();
    std::optional<Error> first_error;
    for (int a : assemblies) {
      try {
        const auto sols = forward_kinematics(g, joints, AssemblySelector{a, std::nullopt}, tol_);
        bool merged = false;
        for (const auto& s : sols) {
          std::string flags;
          if (s.branches_merged) flags = "branches-merged";
          if (s.boundary) flags += flags.empty() ? "serial-boundary" : " serial-boundary";
          if (flags.empty()) flags = "-";
          out_ << fmt::format("{:<10}{:<48}{:>14}  {}\n", fmt::format("{:+d}", a),
                              list_text(pose_values(s.pose)), g9(s.residual_norm), flags);
          json theta = json::array({s.passive.theta[0], s.passive.theta[1]});
          json ea = json::array();
          for (const auto& [e, z] : s.passive.elevation_azimuth) ea.push_back({e, z});
          rows.push_back(json{{"assembly", a},
                              {"pose", pose_values(s.pose)},
                              {"residual_norm", s.residual_norm},
                              {"branches_merged", s.branches_merged},
                              {"boundary", s.boundary},
                              {"passive", {{"theta", std::move(theta)},
                                           {"elevation_azimuth", std::move(ea)}}}});
          merged = merged || s.branches_merged;
        }
        if (merged) break;
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::Config) throw;
        out_ << fmt::format("{:<10}{}: {}\n", fmt::format("{:+d}", a), to_string(e.kind()), e.what());
        rows.push_back(json{{"assembly", a}, {"error", error_json(e)}});
        if (!first_error) first_error = e;
      }
    }
    write_json(json{{"command", "fk"}, {"joints", joint_values(joints)}, {"solutions", std::move(rows)}});
    if (first_error) {
      err_ << "error: " << first_error->what() << "\n";
      return exit_code(first_error->kind());
    }
    return kOk;
  }

  int jacobian() {
    const MechanismGeometry& g = geometry();
    const Pose pose = parse_pose(g);
    const WorkingMode mode = *parse_mode(g.legs(), false);
    const JacobianMode jm = opt_.literal ? JacobianMode::Literal : JacobianMode::Consistent;
    const InverseSolution ik = inverse_kinematics(g, pose, mode, tol_);
    const JacobianPair jp = build_jacobians(g, pose, ik.joints, jm, tol_);
    const SingularityReport rep = classify(jp, g, pose, ik.joints, tol_);

    out_ << "pose  " << list_text(pose_values(pose)) << "\n";
    out_ << "mode  " << mode_text(mode) << "\n";
    out_ << "rho   " << list_text(joint_values(ik.joints)) << "\n\n";
    print_matrix(out_, "A", jp.A);
    print_matrix(out_, "B", jp.B);
    if (jp.J) print_matrix(out_, "J", *jp.J);
    else out_ << "J = undefined (parallel singularity)\n";
    out_ << fmt::format("\ndet A {}   det B {}   normalized det A {}\n", g9(jp.det_A), g9(jp.det_B),
                        g9(jp.normalized_det_A));

    json serial = json::array();
    std::string serial_text;
    for (std::size_t i = 0; i < rep.serial_singular.size(); ++i) {
      serial.push_back(rep.serial_singular[i]);
      if (rep.serial_singular[i]) serial_text += fmt::format(" {}", i + 1);
    }
    out_ << "\nserial singular legs:" << (serial_text.empty() ? " none" : serial_text) << "\n";
    out_ << "parallel singular:    " << (rep.parallel_singular ? "yes" : "no") << "\n";
    for (const auto& w : rep.geometric_witnesses) out_ << "  witness: " << w << "\n";

    json doc{{"command", "jacobian"},
             {"pose", pose_values(pose)},
             {"mode", mode.signs},
             {"jacobian_mode", opt_.literal ? "literal" : "consistent"},
             {"rho", joint_values(ik.joints)},
             {"A", matrix_json(jp.A)},
             {"B", matrix_json(jp.B)},
             {"J", jp.J ? matrix_json(*jp.J) : json(nullptr)},
             {"det_A", jp.det_A},
             {"det_B", jp.det_B},
             {"normalized_det_A", jp.normalized_det_A},
             {"singularities",
              {{"serial_singular", std::move(serial)},
               {"parallel_singular", rep.parallel_singular},
               {"witnesses", rep.geometric_witnesses}}}};

    const auto cl = char_len(g);
    try {
      const AmplificationProfile prof = amplification(jp, cl, tol_);
      out_ << "\nvelocity factors     " << mags_text(prof.singular_values) << "\n";
      out_ << "force factors        " << mags_text(prof.force_factors) << "\n";
      out_ << "condition number     " << mag9(prof.condition_number) << "\n";
      if (cl) out_ << "char length          " << g9(*cl) << "\n";
      doc["amplification"] = {{"singular_values", mags_json(prof.singular_values)},
                              {"force_factors", mags_json(prof.force_factors)},
                              {"condition_number", to_json(prof.condition_number)},
                              {"isotropy_defect", to_json(prof.isotropy_defect)}};
      if (cl) doc["amplification"]["char_len"] = *cl;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Singular) throw;
      out_ << "\namplification: " << e.what() << "\n";
      doc["amplification"] = {{"error", error_json(e)}};
    }
    write_json(doc);
    if (rep.any()) {
      err_ << "error: singular configuration\n";
      return kSingular;
    }
    return kOk;
  }

  ScanOptions scan_options(const MechanismGeometry& g) {
    ScanOptions so;
    so.tolerances = tol_;
    so.jacobian_mode = opt_.literal ? JacobianMode::Literal : JacobianMode::Consistent;
    so.degraded_condition = opt_.degraded;
    so.char_len = char_len(g);
    so.workers = std::max(1u, opt_.workers);
    return so;
  }

  WorkspaceMap run_scan(const MechanismGeometry& g, double psi) {
    const WorkspaceBox box = parse_box(g);
    const WorkingMode mode = *parse_mode(g.legs(), false);
    return scan(g, box, mode, psi, scan_options(g));
  }

  void summarize(const WorkspaceMap& map) {
    std::size_t reach = 0, adm = 0, sing = 0, degr = 0;
    for (const auto& c : map.cells) {
      reach += c.reachable;
      adm += c.admissible(map.provenance.psi);
      sing += c.reachable && c.singular();
      degr += c.reachable && c.degraded(map.provenance.degraded_condition);
    }
    out_ << fmt::format("cells       {}\n", map.size());
    out_ << fmt::format("reachable   {}\n", reach);
    out_ << fmt::format("singular    {}\n", sing);
    out_ << fmt::format("degraded    {}  (condition > {})\n", degr, g9(map.provenance.degraded_condition));
    out_ << fmt::format("admissible  {}  (psi = {})\n", adm, g9(map.provenance.psi));
  }

  int scan_cmd() {
    const MechanismGeometry& g = geometry();
    const WorkspaceMap map = run_scan(g, opt_.psi.value_or(2.0));
    summarize(map);
    if (!opt_.json_path.empty()) write_output(opt_.json_path, map_to_json(map).dump(2) + "\n");
    if (!opt_.csv_path.empty()) write_output(opt_.csv_path, map_to_csv(map));
    if (!opt_.svg_path.empty()) write_output(opt_.svg_path, map_to_svg(map));
    return kOk;
  }

  int square() {
    WorkspaceMap map;
    if (!opt_.map_path.empty()) {
      std::ifstream in(opt_.map_path);
      if (!in) throw Error(ErrorKind::Config, "cannot open map '" + opt_.map_path + "'");
      json doc;
      try {
        doc = json::parse(in);
      } catch (const json::parse_error& e) {
        throw Error(ErrorKind::Config, opt_.map_path + ": JSON parse error: " + e.what());
      }
      map = map_from_json(doc);
      if (!opt_.config.empty() && geometry_hash(geometry()) != map.provenance.geometry_hash)
        err_ << "warning: map was produced from a different geometry\n";
    } else {
      map = run_scan(geometry(), opt_.psi.value_or(2.0));
    }
    const double psi = opt_.psi.value_or(map.provenance.psi);

    std::vector<SquareOrientation> orients;
    if (opt_.orientation == "both") orients = {SquareOrientation::AxisAligned, SquareOrientation::Oblique45};
    else orients = {square_orientation_from_string(opt_.orientation)};

    out_ << fmt::format("{:<16}{:<28}{:>8}{:>16}{:>8}\n", "orientation", "center", "cells",
                        "half side", "psi");
    std::vector<SquareWorkspace> squares;
    json arr = json::array();
    for (auto o : orients) {
      const SquareWorkspace sq = max_square(map, o, psi);
      out_ << fmt::format("{:<16}{:<28}{:>8}{:>16}{:>8}\n", to_string(o),
                          list_text({sq.center_x, sq.center_y}), sq.radius_cells, g9(sq.half_side),
                          g9(psi));
      arr.push_back(to_json(sq));
      squares.push_back(sq);
    }
    write_json(json{{"command", "square"},
                    {"geometry_hash", map.provenance.geometry_hash},
                    {"psi", psi},
                    {"squares", std::move(arr)}});
    if (!opt_.svg_path.empty()) write_output(opt_.svg_path, map_to_svg(map, squares));
    return kOk;
  }

  int ranges() {
    const MechanismGeometry& g = geometry();
    const double psi = opt_.psi.value_or(2.0);
    WorkingMode mode = WorkingMode::uniform(2, -1);
    if (!opt_.mode.empty()) {
      const auto m = parse_mode(g.legs(), false);
      mode.signs = {m->signs[0], m->signs[1]};
    }
    RangeOptions ro;
    ro.tolerances = tol_;
    ro.samples_per_axis = opt_.samples;
    const JointRanges jr = joint_range_limits(g, psi, mode, ro);
    out_ << "mode     " << mode_text(mode) << "\n";
    out_ << "anchor   " << list_text(jr.anchor.rho)
         << (jr.anchored_at_isotropic ? "  (isotropic configuration)" : "  (best-conditioned sample)")
         << "\n";
    out_ << fmt::format("assembly {:+d}\n", jr.assembly);
    out_ << "half width " << g9(jr.scale) << "\n";
    json arr = json::array();
    for (std::size_t i = 0; i < 2; ++i) {
      out_ << fmt::format("rho{}     [{}, {}]\n", i + 1, g9(jr.ranges[i].first), g9(jr.ranges[i].second));
      arr.push_back({jr.ranges[i].first, jr.ranges[i].second});
    }
    write_json(json{{"command", "ranges"},
                    {"psi", psi},
                    {"mode", mode.signs},
                    {"anchor", jr.anchor.rho},
                    {"anchored_at_isotropic", jr.anchored_at_isotropic},
                    {"assembly", jr.assembly},
                    {"half_width", jr.scale},
                    {"ranges", std::move(arr)}});
    return kOk;
  }

  std::vector<std::string> args_;
  std::ostream& out_;
  std::ostream& err_;
  std::string cmd_;
  Options opt_;
  Tolerances tol_;
  fs::path config_path_;
  std::optional<LoadedGeometry> loaded_;
  std::vector<std::string> outputs_;
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Kinetostatic analysis of 2T, 2T1R and 2T2R parallel kinematic machines",
               "pkmkit"};
  app.set_version_flag("--version", PKMKIT_VERSION);
  app.require_subcommand(1);

  Options opt;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "geometry config (path or name)")->required();
    sub->add_option("--tol-parallel", opt.tol_parallel, "parallel singularity threshold");
    sub->add_option("--tol-serial", opt.tol_serial, "serial singularity threshold");
    sub->add_option("--json", opt.json_path, "write JSON output");
  };
  auto modeflag = [&](CLI::App* sub) {
    sub->add_option("--mode", opt.mode, "working mode signs, e.g. -1,-1 (or all)");
  };

  auto* describe = app.add_subcommand("describe", "print the geometry and its isotropy check");
  common(describe);

  auto* ik = app.add_subcommand("ik", "inverse kinematics for a pose");
  common(ik);
  modeflag(ik);
  ik->add_option("--pose", opt.pose, "x,y[,beta[,gamma]][,z] (radians)")->required();

  auto* fk = app.add_subcommand("fk", "forward kinematics for joint values");
  common(fk);
  fk->add_option("--joints", opt.joints, "rho1,rho2[,rho3[,rho4]][,z]")->required();
  fk->add_option("--assembly", opt.assembly, "+1, -1 or all");

  auto* jac = app.add_subcommand("jacobian", "Jacobians, singularities and amplification at a pose");
  common(jac);
  modeflag(jac);
  jac->add_option("--pose", opt.pose, "x,y[,beta[,gamma]][,z] (radians)")->required();
  jac->add_flag("--literal", opt.literal, "fixed-axis gamma column");
  jac->add_option("--char-len", opt.char_len, "characteristic length for rotational rows");

  auto* scan = app.add_subcommand("scan", "classify every node of a pose grid");
  common(scan);
  modeflag(scan);
  scan->add_option("--box", opt.box, "xlo,xhi,ylo,yhi[,blo,bhi[,glo,ghi]]")->required();
  scan->add_option("--resolution", opt.resolution, "nodes per axis (one value or one per axis)");
  scan->add_option("--psi", opt.psi, "amplification bound (default 2)");
  scan->add_option("--workers", opt.workers, "worker threads");
  scan->add_flag("--literal", opt.literal, "fixed-axis gamma column");
  scan->add_option("--char-len", opt.char_len, "characteristic length for rotational rows");
  scan->add_option("--degraded", opt.degraded, "condition number marking degraded cells");
  scan->add_option("--csv", opt.csv_path, "write CSV map");
  scan->add_option("--svg", opt.svg_path, "write SVG heat map");

  auto* square = app.add_subcommand("square", "largest admissible square workspace");
  square->add_option("--config", opt.config, "geometry config (path or name)");
  square->add_option("--tol-parallel", opt.tol_parallel, "parallel singularity threshold");
  square->add_option("--tol-serial", opt.tol_serial, "serial singularity threshold");
  square->add_option("--json", opt.json_path, "write JSON output");
  modeflag(square);
  square->add_option("--map", opt.map_path, "workspace map JSON from scan");
  square->add_option("--box", opt.box, "scan box when no map is given");
  square->add_option("--resolution", opt.resolution, "nodes per axis");
  square->add_option("--psi", opt.psi, "amplification bound (default: the map's)");
  square->add_option("--workers", opt.workers, "worker threads");
  square->add_option("--char-len", opt.char_len, "characteristic length for rotational rows");
  square->add_option("--orientation", opt.orientation, "axis_aligned, oblique_45deg or both");
  square->add_option("--svg", opt.svg_path, "write SVG heat map with the squares");
  square->callback([&] {
    if (opt.map_path.empty() && (opt.config.empty() || opt.box.empty()))
      throw CLI::ValidationError("square", "either --map or --config with --box is required");
  });

  auto* ranges = app.add_subcommand("ranges", "joint ranges keeping the amplification bound");
  common(ranges);
  modeflag(ranges);
  ranges->add_option("--psi", opt.psi, "amplification bound (default 2)");
  ranges->add_option("--samples", opt.samples, "forward-image samples per joint axis");

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    Runner runner(args, out, err);
    return runner(command, opt);
  } catch (const Error& e) {
    err << "error [" << to_string(e.kind()) << "]: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kOther;
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  return run(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace pkm::cli
