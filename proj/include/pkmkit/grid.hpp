#pragma once

#include <cstddef>
#include <optional>

namespace pkm {

/// Node-centered sampling of [lo, hi]: resolution points including both
/// ends. A degenerate axis (lo == hi) has exactly one node.
struct GridAxis {
  double lo = 0.0;
  double hi = 0.0;
  int resolution = 3;

  std::size_t count() const { return lo == hi ? 1 : static_cast<std::size_t>(resolution); }
  double step() const { return count() > 1 ? (hi - lo) / static_cast<double>(count() - 1) : 0.0; }
  double at(std::size_t i) const {
    if (count() == 1) return lo;
    return i + 1 == count() ? hi : lo + static_cast<double>(i) * step();
  }
  bool degenerate() const { return count() == 1; }
};

/// Pose box. Spatial scans may add beta/gamma axes; without them the
/// orientation is held at zero.
struct WorkspaceBox {
  GridAxis x;
  GridAxis y;
  std::optional<GridAxis> beta;
  std::optional<GridAxis> gamma;
};

/// Throws ErrorKind::Config for non-finite bounds, lo > hi, or a
/// non-degenerate axis with fewer than three nodes.
void validate(const GridAxis& axis, const char* name);

}  // namespace pkm
