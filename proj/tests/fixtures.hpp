#pragma once

#include <cmath>
#include <random>

#include "pkmkit/geometry.hpp"
#include "pkmkit/kinematics.hpp"

namespace fixtures {

using pkm::LegGeometry;
using pkm::MechanismGeometry;
using pkm::Vec3;

inline LegGeometry leg(Vec3 origin, Vec3 axis, double length = 1.0, double lo = -2.0,
                       double hi = 2.0) {
  LegGeometry l;
  l.rail_origin = origin;
  l.rail_axis = axis.normalized();
  l.leg_length = length;
  l.rho_min = lo;
  l.rho_max = hi;
  return l;
}

// Rails along x and y through the origin, unit rods, legs meeting at P.
inline MechanismGeometry g0() {
  MechanismGeometry g;
  g.variant = pkm::Variant::Planar2T;
  g.translation_legs = {leg({0, 0, 0}, {1, 0, 0}), leg({0, 0, 0}, {0, 1, 0})};
  return g;
}

inline MechanismGeometry g1() {
  MechanismGeometry g = g0();
  g.variant = pkm::Variant::Spatial2T1R;
  g.orientation_legs = {leg({0.5, 0, 0}, {0, 0, 1})};
  pkm::ToolBody tool;
  tool.anchor_offsets = {Vec3(0.5, 0, 0)};
  tool.beta_axis = Vec3::UnitY();
  tool.gamma_axis = Vec3::UnitX();
  g.tool = tool;
  return g;
}

inline MechanismGeometry g2() {
  MechanismGeometry g = g0();
  g.variant = pkm::Variant::Spatial2T2R;
  g.orientation_legs = {leg({0.5, 0, 0}, {0, 0, 1}), leg({0, 0.5, 0}, {0, 0, 1})};
  pkm::ToolBody tool;
  tool.anchor_offsets = {Vec3(0.5, 0, 0), Vec3(0, 0.5, 0)};
  tool.beta_axis = Vec3::UnitY();
  tool.gamma_axis = Vec3::UnitX();
  g.tool = tool;
  return g;
}

// Planar stage whose rails meet at 60 degrees.
inline MechanismGeometry rails60() {
  MechanismGeometry g = g0();
  g.translation_legs[1].rail_axis = Vec3(0.5, std::sqrt(3.0) / 2, 0);
  return g;
}

// Rod 3 runs along the tool link: rail 3 passes through the z axis and
// the anchor sits straight above P.
inline MechanismGeometry g1_colinear() {
  MechanismGeometry g = g1();
  g.orientation_legs[0] = leg({0, 0, 0}, {0, 0, 1});
  g.tool->anchor_offsets = {Vec3(0, 0, 0.5)};
  return g;
}

// Both orientation rails in the xz-plane, anchors on the gamma axis.
inline MechanismGeometry g2_coplanar() {
  MechanismGeometry g = g2();
  g.orientation_legs = {leg({0.5, 0, 0}, {0, 0, 1}), leg({-0.5, 0, 0}, {0, 0, 1})};
  g.tool->anchor_offsets = {Vec3(0.5, 0, 0), Vec3(-0.5, 0, 0)};
  return g;
}

inline std::mt19937_64 rng(unsigned long seed) { return std::mt19937_64(seed); }

inline double uniform(std::mt19937_64& r, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(r);
}

// Random pose in the variant's coordinates; orientation angles kept small
// enough for the tool links to stay reachable most of the time.
inline pkm::Pose random_pose(const MechanismGeometry& g, std::mt19937_64& r) {
  pkm::Pose p;
  p.x = uniform(r, -0.9, 0.9);
  p.y = uniform(r, -0.9, 0.9);
  if (g.variant != pkm::Variant::Planar2T) p.beta = uniform(r, -1.2, 1.2);
  if (g.variant == pkm::Variant::Spatial2T2R) p.gamma = uniform(r, -1.2, 1.2);
  return p;
}

inline pkm::Vec3 rod(const MechanismGeometry& g, const pkm::Pose& p, const pkm::JointVector& q,
                     std::size_t leg) {
  return pkm::attachment_points(g, p, q)[leg].rod();
}

}  // namespace fixtures
