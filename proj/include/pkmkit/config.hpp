#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pkmkit/geometry.hpp"

namespace pkm {

/// A geometry read from a config file, with the soft-invariant warnings
/// produced while validating it.
struct LoadedGeometry {
  MechanismGeometry geometry;
  std::vector<std::string> warnings;
};

/// Parses the geometry JSON schema. Unknown keys, missing required keys and
/// type mismatches throw ErrorKind::Config naming the offending JSON path.
/// Axis vectors are normalized before validation.
LoadedGeometry parse_geometry(const nlohmann::json& doc);
LoadedGeometry load_geometry(const std::filesystem::path& path);

nlohmann::json to_json(const MechanismGeometry& geom);

/// SHA-256 (hex) of the canonical JSON serialization of a geometry.
std::string geometry_hash(const MechanismGeometry& geom);

/// SHA-256 (hex) of arbitrary bytes.
std::string sha256_hex(const std::string& bytes);

}  // namespace pkm
