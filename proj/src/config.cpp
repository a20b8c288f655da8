#include "pkmkit/config.hpp"

#include <array>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

namespace pkm {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw Error(ErrorKind::Config, path + ": " + msg);
}

void reject_unknown(const json& obj, const std::string& path,
                    std::initializer_list<const char*> allowed) {
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!keys.count(key)) fail(path + "." + key, "unknown key");
  }
}

const json& field(const json& obj, const std::string& path, const char* key) {
  if (!obj.contains(key)) fail(path + "." + key, "missing required field");
  return obj.at(key);
}

const json& object_at(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  return j;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

Vec3 vec3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) fail(path, "expected an array of 3 numbers");
  Vec3 v;
  for (int k = 0; k < 3; ++k) v[k] = number(j[static_cast<std::size_t>(k)], fmt::format("{}[{}]", path, k));
  return v;
}

Vec3 unit_vec3(const json& j, const std::string& path) {
  Vec3 v = vec3(j, path);
  if (!(v.norm() > 0.0)) fail(path, "axis must be nonzero");
  return v.normalized();
}

LegGeometry leg(const json& j, const std::string& path) {
  object_at(j, path);
  reject_unknown(j, path, {"rail_origin", "rail_axis", "leg_length", "rho_min", "rho_max"});
  LegGeometry out;
  out.rail_origin = vec3(field(j, path, "rail_origin"), path + ".rail_origin");
  out.rail_axis = unit_vec3(field(j, path, "rail_axis"), path + ".rail_axis");
  out.leg_length = number(field(j, path, "leg_length"), path + ".leg_length");
  out.rho_min = number(field(j, path, "rho_min"), path + ".rho_min");
  out.rho_max = number(field(j, path, "rho_max"), path + ".rho_max");
  return out;
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json leg_json(const LegGeometry& leg) {
  return json{{"rail_origin", vec_json(leg.rail_origin)},
              {"rail_axis", vec_json(leg.rail_axis)},
              {"leg_length", leg.leg_length},
              {"rho_min", leg.rho_min},
              {"rho_max", leg.rho_max}};
}

}  // namespace

LoadedGeometry parse_geometry(const json& doc) {
  const std::string root = "$";
  object_at(doc, root);
  reject_unknown(doc, root,
                 {"variant", "translation_legs", "orientation_legs", "tool",
                  "platform_offsets", "stacked_z"});

  MechanismGeometry g;
  const json& variant = field(doc, root, "variant");
  if (!variant.is_string()) fail("$.variant", "expected a string");
  try {
    g.variant = variant_from_string(variant.get<std::string>());
  } catch (const Error& e) {
    fail("$.variant", e.what());
  }

  const json& tlegs = field(doc, root, "translation_legs");
  if (!tlegs.is_array() || tlegs.size() != 2)
    fail("$.translation_legs", "expected an array of exactly 2 legs");
  for (std::size_t i = 0; i < 2; ++i)
    g.translation_legs[i] = leg(tlegs[i], fmt::format("$.translation_legs[{}]", i));

  if (doc.contains("orientation_legs")) {
    const json& olegs = doc.at("orientation_legs");
    if (!olegs.is_array()) fail("$.orientation_legs", "expected an array");
    for (std::size_t k = 0; k < olegs.size(); ++k)
      g.orientation_legs.push_back(leg(olegs[k], fmt::format("$.orientation_legs[{}]", k)));
  }

  if (doc.contains("tool")) {
    const std::string path = "$.tool";
    const json& t = object_at(doc.at("tool"), path);
    reject_unknown(t, path,
                   {"anchor_offsets", "beta_axis", "gamma_axis", "characteristic_length"});
    ToolBody tool;
    const json& anchors = field(t, path, "anchor_offsets");
    if (!anchors.is_array()) fail(path + ".anchor_offsets", "expected an array");
    for (std::size_t k = 0; k < anchors.size(); ++k)
      tool.anchor_offsets.push_back(vec3(anchors[k], fmt::format("{}.anchor_offsets[{}]", path, k)));
    tool.beta_axis = unit_vec3(field(t, path, "beta_axis"), path + ".beta_axis");
    if (t.contains("gamma_axis")) {
      tool.gamma_axis = unit_vec3(t.at("gamma_axis"), path + ".gamma_axis");
    } else if (g.variant == Variant::Spatial2T2R) {
      fail(path + ".gamma_axis", "missing required field");
    }
    if (t.contains("characteristic_length"))
      tool.characteristic_length =
          number(t.at("characteristic_length"), path + ".characteristic_length");
    g.tool = std::move(tool);
  }

  if (doc.contains("platform_offsets")) {
    const json& offs = doc.at("platform_offsets");
    if (!offs.is_array() || offs.size() != 2)
      fail("$.platform_offsets", "expected an array of exactly 2 vectors");
    for (std::size_t i = 0; i < 2; ++i)
      g.platform_offsets[i] = vec3(offs[i], fmt::format("$.platform_offsets[{}]", i));
  }

  if (doc.contains("stacked_z")) {
    const std::string path = "$.stacked_z";
    const json& s = object_at(doc.at("stacked_z"), path);
    reject_unknown(s, path, {"axis", "rho_min", "rho_max"});
    StackedAxis axis;
    axis.axis = unit_vec3(field(s, path, "axis"), path + ".axis");
    axis.rho_min = number(field(s, path, "rho_min"), path + ".rho_min");
    axis.rho_max = number(field(s, path, "rho_max"), path + ".rho_max");
    g.stacked_z = axis;
  }

  LoadedGeometry out{std::move(g), {}};
  out.warnings = validate(out.geometry);
  return out;
}

LoadedGeometry load_geometry(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "cannot open config file '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Config, path.string() + ": JSON parse error: " + e.what());
  }
  try {
    return parse_geometry(doc);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

json to_json(const MechanismGeometry& geom) {
  json doc;
  doc["variant"] = to_string(geom.variant);
  doc["translation_legs"] = json::array(
      {leg_json(geom.translation_legs[0]), leg_json(geom.translation_legs[1])});
  doc["orientation_legs"] = json::array();
  for (const auto& l : geom.orientation_legs) doc["orientation_legs"].push_back(leg_json(l));
  if (geom.tool) {
    json tool;
    tool["anchor_offsets"] = json::array();
    for (const auto& r : geom.tool->anchor_offsets) tool["anchor_offsets"].push_back(vec_json(r));
    tool["beta_axis"] = vec_json(geom.tool->beta_axis);
    tool["gamma_axis"] = vec_json(geom.tool->gamma_axis);
    if (geom.tool->characteristic_length)
      tool["characteristic_length"] = *geom.tool->characteristic_length;
    doc["tool"] = std::move(tool);
  }
  doc["platform_offsets"] =
      json::array({vec_json(geom.platform_offsets[0]), vec_json(geom.platform_offsets[1])});
  if (geom.stacked_z) {
    doc["stacked_z"] = json{{"axis", vec_json(geom.stacked_z->axis)},
                            {"rho_min", geom.stacked_z->rho_min},
                            {"rho_max", geom.stacked_z->rho_max}};
  }
  return doc;
}

std::string sha256_hex(const std::string& bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string geometry_hash(const MechanismGeometry& geom) {
  // nlohmann::json objects are key-sorted, so dump() is canonical.
  return sha256_hex(to_json(geom).dump());
}

}  // namespace pkm
