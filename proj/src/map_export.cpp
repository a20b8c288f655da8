#include "pkmkit/map_export.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <fmt/format.h>

namespace pkm {

namespace {

using nlohmann::json;

std::string num(double v) { return fmt::format("{}", v); }

std::string mag_text(const Magnitude& m) { return m.infinite ? "inf" : num(m.value); }

Magnitude mag_from(const json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorKind::Config, std::string("map cell: missing ") + key);
  const json& v = j.at(key);
  if (v.is_string() && v.get<std::string>() == "inf") return Magnitude::unbounded();
  if (v.is_number()) return Magnitude::finite(v.get<double>());
  if (v.is_null()) return Magnitude{};
  throw Error(ErrorKind::Config, std::string("map cell: bad value for ") + key);
}

json axis_json(const GridAxis& a) {
  return json{{"lo", a.lo}, {"hi", a.hi}, {"resolution", a.resolution}};
}

GridAxis axis_from(const json& j) {
  return GridAxis{j.at("lo").get<double>(), j.at("hi").get<double>(),
                  j.at("resolution").get<int>()};
}

const char* jacobian_mode_name(JacobianMode m) {
  return m == JacobianMode::Consistent ? "consistent" : "literal";
}

// Piecewise-linear ramp from dark blue (well conditioned) to yellow.
std::string ramp(double t) {
  static constexpr std::array<std::array<double, 3>, 5> stops{{{68, 1, 84},
                                                               {59, 82, 139},
                                                               {33, 145, 140},
                                                               {94, 201, 98},
                                                               {253, 231, 37}}};
  t = std::clamp(t, 0.0, 1.0) * (stops.size() - 1);
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(t), stops.size() - 2);
  const double f = t - static_cast<double>(k);
  std::array<int, 3> c{};
  for (std::size_t i = 0; i < 3; ++i)
    c[i] = static_cast<int>(std::lround(stops[k][i] + f * (stops[k + 1][i] - stops[k][i])));
  return fmt::format("#{:02x}{:02x}{:02x}", c[0], c[1], c[2]);
}

}  // namespace

json to_json(const Magnitude& m) {
  if (m.infinite) return "inf";
  return m.value;
}

std::string map_to_csv(const WorkspaceMap& map) {
  const double psi = map.provenance.psi;
  const double degraded = map.provenance.degraded_condition;
  std::string out =
      "ix,iy,ib,ig,x,y,beta,gamma,reachable,parallel,serial,admissible,degraded,sigma_min,"
      "sigma_max,condition\n";
  for (std::size_t k = 0; k < map.size(); ++k) {
    const auto idx = map.unflat(k);
    const Pose p = map.pose_at(idx);
    const CellRecord& c = map.cells[k];
    std::string serial;
    for (bool s : c.serial_flags) serial += s ? '1' : '0';
    out += fmt::format("{},{},{},{},{},{},{},{},{:d},{:d},{},{:d},{:d},", idx.ix, idx.iy, idx.ib,
                       idx.ig, num(p.x), num(p.y), p.beta ? num(*p.beta) : "",
                       p.gamma ? num(*p.gamma) : "", c.reachable, c.parallel_flag, serial,
                       c.admissible(psi), c.degraded(degraded));
    if (c.reachable) {
      out += fmt::format("{},{},{}\n", mag_text(c.sigma_min), mag_text(c.sigma_max),
                         mag_text(c.condition));
    } else {
      out += ",,\n";
    }
  }
  return out;
}

json map_to_json(const WorkspaceMap& map) {
  json doc;
  doc["format"] = "pkmkit.workspace_map";
  doc["version"] = 1;
  doc["variant"] = to_string(map.variant);
  json grid{{"x", axis_json(map.box.x)}, {"y", axis_json(map.box.y)}};
  if (map.box.beta) grid["beta"] = axis_json(*map.box.beta);
  if (map.box.gamma) grid["gamma"] = axis_json(*map.box.gamma);
  doc["grid"] = std::move(grid);

  const auto& pv = map.provenance;
  json prov{{"geometry_hash", pv.geometry_hash},
            {"tolerances", {{"parallel", pv.tolerances.parallel}, {"serial", pv.tolerances.serial}}},
            {"mode", pv.mode.signs},
            {"jacobian_mode", jacobian_mode_name(pv.jacobian_mode)},
            {"psi", pv.psi},
            {"degraded_condition", pv.degraded_condition}};
  if (pv.char_len) prov["char_len"] = *pv.char_len;
  doc["provenance"] = std::move(prov);

  json cells = json::array();
  for (std::size_t k = 0; k < map.size(); ++k) {
    const auto idx = map.unflat(k);
    const Pose p = map.pose_at(idx);
    const CellRecord& c = map.cells[k];
    json pose = json::array({p.x, p.y});
    if (p.beta) pose.push_back(*p.beta);
    if (p.gamma) pose.push_back(*p.gamma);
    json cell{{"index", {idx.ix, idx.iy, idx.ib, idx.ig}},
              {"pose", std::move(pose)},
              {"reachable", c.reachable}};
    if (c.reachable) {
      cell["parallel"] = c.parallel_flag;
      cell["serial"] = c.serial_flags;
      cell["sigma_min"] = to_json(c.sigma_min);
      cell["sigma_max"] = to_json(c.sigma_max);
      cell["condition"] = to_json(c.condition);
      cell["admissible"] = c.admissible(pv.psi);
      cell["degraded"] = c.degraded(pv.degraded_condition);
    }
    cells.push_back(std::move(cell));
  }
  doc["cells"] = std::move(cells);
  return doc;
}

WorkspaceMap map_from_json(const json& doc) {
  try {
    if (doc.value("format", "") != "pkmkit.workspace_map")
      throw Error(ErrorKind::Config, "not a workspace map document");
    WorkspaceMap map;
    map.variant = variant_from_string(doc.at("variant").get<std::string>());
    const json& grid = doc.at("grid");
    map.box.x = axis_from(grid.at("x"));
    map.box.y = axis_from(grid.at("y"));
    if (grid.contains("beta")) map.box.beta = axis_from(grid.at("beta"));
    if (grid.contains("gamma")) map.box.gamma = axis_from(grid.at("gamma"));

    const json& prov = doc.at("provenance");
    map.provenance.geometry_hash = prov.at("geometry_hash").get<std::string>();
    map.provenance.tolerances.parallel = prov.at("tolerances").at("parallel").get<double>();
    map.provenance.tolerances.serial = prov.at("tolerances").at("serial").get<double>();
    map.provenance.mode.signs = prov.at("mode").get<std::vector<int>>();
    map.provenance.jacobian_mode = prov.at("jacobian_mode").get<std::string>() == "literal"
                                       ? JacobianMode::Literal
                                       : JacobianMode::Consistent;
    map.provenance.psi = prov.at("psi").get<double>();
    map.provenance.degraded_condition = prov.at("degraded_condition").get<double>();
    if (prov.contains("char_len")) map.provenance.char_len = prov.at("char_len").get<double>();

    const json& cells = doc.at("cells");
    if (cells.size() != map.size())
      throw Error(ErrorKind::Config,
                  fmt::format("map: {} cells listed, grid has {}", cells.size(), map.size()));
    map.cells.reserve(cells.size());
    for (const json& c : cells) {
      CellRecord cell;
      cell.reachable = c.at("reachable").get<bool>();
      if (cell.reachable) {
        cell.parallel_flag = c.at("parallel").get<bool>();
        cell.serial_flags = c.at("serial").get<std::vector<bool>>();
        cell.sigma_min = mag_from(c, "sigma_min");
        cell.sigma_max = mag_from(c, "sigma_max");
        cell.condition = mag_from(c, "condition");
      }
      map.cells.push_back(std::move(cell));
    }
    return map;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, std::string("map: malformed document: ") + e.what());
  }
}

json to_json(const SquareWorkspace& sq) {
  return json{{"orientation", to_string(sq.orientation)},
              {"center", {sq.center_x, sq.center_y}},
              {"center_index", {sq.center_ix, sq.center_iy}},
              {"radius_cells", sq.radius_cells},
              {"half_side", sq.half_side},
              {"psi_bound", sq.psi_bound}};
}

std::string map_to_svg(const WorkspaceMap& map, const std::vector<SquareWorkspace>& squares) {
  const std::size_t nx = map.nx(), ny = map.ny();
  const double px = std::max(2.0, std::floor(600.0 / static_cast<double>(std::max(nx, ny))));
  const double w = px * static_cast<double>(nx), h = px * static_cast<double>(ny);
  const double hx = map.box.x.step(), hy = map.box.y.step();
  // Map a pose to SVG coordinates (y up).
  auto sx = [&](double x) { return hx > 0 ? (x - map.box.x.lo) / hx * px + px / 2 : w / 2; };
  auto sy = [&](double y) { return hy > 0 ? h - ((y - map.box.y.lo) / hy * px + px / 2) : h / 2; };

  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" "
      "viewBox=\"0 0 {} {}\">\n",
      num(w), num(h + 24), num(w), num(h + 24));
  out += "<!-- log10(condition) on [0, 3]; magenta = singular, grey = unreachable -->\n";
  for (std::size_t iy = 0; iy < ny; ++iy) {
    for (std::size_t ix = 0; ix < nx; ++ix) {
      const CellRecord& c = map.at({ix, iy, 0, 0});
      std::string color = "#e6e6e6";
      if (c.reachable) {
        if (c.singular() || c.condition.infinite) {
          color = "#ff00ff";
        } else {
          color = ramp(std::log10(std::max(1.0, c.condition.value)) / 3.0);
        }
      }
      out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n",
                         num(px * static_cast<double>(ix)),
                         num(h - px * static_cast<double>(iy + 1)), num(px), num(px), color);
    }
  }
  for (const auto& sq : squares) {
    std::string pts;
    for (const auto& [x, y] : sq.outline(hx > 0 ? hx : hy)) {
      if (!pts.empty()) pts += ' ';
      pts += fmt::format("{},{}", num(sx(x)), num(sy(y)));
    }
    out += fmt::format(
        "<polygon points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n", pts,
        sq.orientation == SquareOrientation::AxisAligned ? "#000000" : "#d62728");
  }
  out += fmt::format(
      "<text x=\"4\" y=\"{}\" font-family=\"monospace\" font-size=\"12\">{} psi={} "
      "x[{},{}] y[{},{}]</text>\n",
      num(h + 16), to_string(map.variant), num(map.provenance.psi), num(map.box.x.lo),
      num(map.box.x.hi), num(map.box.y.lo), num(map.box.y.hi));
  out += "</svg>\n";
  return out;
}

}  // namespace pkm
