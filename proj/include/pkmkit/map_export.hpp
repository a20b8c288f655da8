#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pkmkit/workspace.hpp"

namespace pkm {

/// One row per cell: indices, pose coordinates, flags, sigma_min,
/// sigma_max, condition. Unbounded values are written as "inf",
/// unreachable cells leave the numeric columns empty.
std::string map_to_csv(const WorkspaceMap& map);

nlohmann::json map_to_json(const WorkspaceMap& map);
WorkspaceMap map_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const SquareWorkspace& sq);
nlohmann::json to_json(const Magnitude& m);

/// Heat map of log10(condition) over the first (x, y) slice. Singular cells
/// use a reserved color; squares are drawn as outlines.
std::string map_to_svg(const WorkspaceMap& map, const std::vector<SquareWorkspace>& squares = {});

}  // namespace pkm
