#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "pkmkit/config.hpp"
#include "pkmkit/map_export.hpp"
#include "pkmkit/workspace.hpp"

using namespace pkm;
using fixtures::g0;
using fixtures::g1;
using fixtures::g2;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Config;
}

WorkspaceBox square_box(double lo, double hi, int n) { return {{lo, hi, n}, {lo, hi, n}, {}, {}}; }

const WorkingMode kMinus = WorkingMode::uniform(2, -1);

const WorkspaceMap& g0_map_101() {
  static const WorkspaceMap m = scan(g0(), square_box(-1.5, 1.5, 101), kMinus, 2.0);
  return m;
}

// A hand-built map whose admissible cells are exactly those listed.
WorkspaceMap synthetic(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& good) {
  WorkspaceMap m;
  m.box = square_box(0, static_cast<double>(n - 1), static_cast<int>(n));
  m.cells.resize(n * n);
  for (auto& c : m.cells) c.serial_flags = {false, false};
  for (const auto& [ix, iy] : good) {
    auto& c = m.cells[m.flat({ix, iy, 0, 0})];
    c.reachable = true;
    c.sigma_min = c.sigma_max = c.condition = Magnitude::finite(1.0);
  }
  return m;
}

// Largest radius any center reaches, checked cell by cell over the whole shape.
bool some_center_reaches(const WorkspaceMap& m, SquareOrientation o, int k, double psi,
                         std::pair<long, long>* first = nullptr) {
  const long nx = static_cast<long>(m.nx()), ny = static_cast<long>(m.ny());
  for (long cx = 0; cx < nx; ++cx) {
    for (long cy = 0; cy < ny; ++cy) {
      bool all = true;
      for (long dy = -k; dy <= k && all; ++dy) {
        for (long dx = -k; dx <= k && all; ++dx) {
          const long d = o == SquareOrientation::AxisAligned ? std::max(std::labs(dx), std::labs(dy))
                                                             : std::labs(dx) + std::labs(dy);
          if (d > k) continue;
          const long x = cx + dx, y = cy + dy;
          all = x >= 0 && y >= 0 && x < nx && y < ny &&
                m.at({static_cast<std::size_t>(x), static_cast<std::size_t>(y), 0, 0}).admissible(psi);
        }
      }
      if (all) {
        if (first) *first = {cx, cy};
        return true;
      }
    }
  }
  return false;
}

}  // namespace

TEST_SUITE("workspace") {

TEST_CASE("grid axis") {
  const GridAxis a{-1.5, 1.5, 101};
  CHECK(a.count() == 101);
  CHECK(a.at(0) == -1.5);
  CHECK(a.at(100) == 1.5);
  CHECK(a.at(50) == doctest::Approx(0.0));
  CHECK(GridAxis{0.3, 0.3, 101}.count() == 1);
  CHECK_NOTHROW(validate(GridAxis{0.3, 0.3, 3}, "x"));
  CHECK_THROWS_WITH_AS(validate(GridAxis{0, 1, 1}, "x"),
                       doctest::Contains("x axis: resolution must be >= 3 (got 1)"), Error);
  CHECK_THROWS_AS(validate(GridAxis{0, 1, 2}, "y"), Error);
  CHECK_THROWS_AS(validate(GridAxis{1, 0, 11}, "y"), Error);
  CHECK_THROWS_AS(validate(GridAxis{0, std::nan(""), 11}, "y"), Error);
  CHECK(kind_of([] { scan(g0(), square_box(-1, 1, 1), kMinus, 2.0); }) == ErrorKind::Config);
  CHECK(kind_of([] { scan(g0(), square_box(-1, 1, 11), kMinus, 1.0); }) == ErrorKind::Config);
  CHECK(kind_of([] { scan(g0(), square_box(-1, 1, 11), WorkingMode{{1}}, 2.0); }) == ErrorKind::Config);
}

TEST_CASE("scan examples") {
  const auto& m = g0_map_101();
  CHECK(m.size() == 101 * 101);
  CHECK(m.cells.size() == m.size());
  const auto& iso = m.at({50, 50, 0, 0});
  CHECK(iso.reachable);
  CHECK(std::abs(iso.condition.value - 1) < 1e-12);
  CHECK_FALSE(m.at({100, 100, 0, 0}).reachable);

  // A grid through the constructed colinear configuration.
  const double r2 = std::sqrt(2.0);
  const auto on = scan(g0(), square_box(-r2, r2, 101), kMinus, 2.0);
  const auto& c = on.at({75, 75, 0, 0});
  CHECK(c.reachable);
  CHECK(c.parallel_flag);
  CHECK(c.singular());
  CHECK_FALSE(c.admissible(1e6));
  // The coarser box misses the locus by a fraction of a cell; the nodes
  // next to it are degraded.
  CHECK(m.at({73, 74, 0, 0}).degraded(100.0));
  CHECK(m.at({75, 72, 0, 0}).degraded(100.0));
  CHECK_FALSE(m.at({72, 72, 0, 0}).degraded(100.0));

  const auto one = scan(g0(), square_box(0.2, 0.2, 101), kMinus, 2.0);
  REQUIRE(one.size() == 1);
  CHECK(one.cells[0].reachable);
}

TEST_CASE("scan agrees with per-pose evaluation in row-major order") {
  MechanismGeometry g = g1();
  WorkspaceBox box{{-0.6, 0.6, 7}, {-0.4, 0.4, 5}, GridAxis{-0.5, 0.5, 3}, {}};
  const auto m = scan(g, box, WorkingMode::uniform(3, -1), 2.0);
  REQUIRE(m.size() == 7 * 5 * 3);
  ScanOptions opts;
  opts.char_len = g.tool->char_length();
  for (std::size_t k = 0; k < m.size(); ++k) {
    const auto idx = m.unflat(k);
    CHECK(m.flat(idx) == k);
    const Pose p = m.pose_at(idx);
    const auto ref = evaluate_cell(g, p, WorkingMode::uniform(3, -1), opts);
    CHECK(ref.reachable == m.cells[k].reachable);
    CHECK(ref.condition == m.cells[k].condition);
  }
  CHECK(m.unflat(1).ix == 1);
  CHECK(m.unflat(7).iy == 1);
  CHECK(m.unflat(35).ib == 1);
}

TEST_CASE("reachable regular cells carry finite factors") {
  const auto& m = g0_map_101();
  int reachable = 0;
  for (const auto& c : m.cells) {
    if (!c.reachable) continue;
    ++reachable;
    if (c.singular()) continue;
    CHECK_FALSE(c.sigma_min.infinite);
    CHECK_FALSE(c.sigma_max.infinite);
    CHECK(c.sigma_min.value <= c.sigma_max.value);
  }
  CHECK(reachable > 0);
}

TEST_CASE("scans are identical for any worker count") {
  ScanOptions opts;
  std::string ref_json, ref_csv;
  for (unsigned w : {1u, 2u, 8u}) {
    opts.workers = w;
    const auto m = scan(g0(), square_box(-1.5, 1.5, 61), kMinus, 2.0, opts);
    const std::string j = map_to_json(m).dump(), c = map_to_csv(m);
    if (w == 1) {
      ref_json = j;
      ref_csv = c;
    }
    CHECK(j == ref_json);
    CHECK(c == ref_csv);
  }
  WorkspaceBox box{{-0.5, 0.5, 9}, {-0.5, 0.5, 9}, GridAxis{-0.4, 0.4, 3}, GridAxis{-0.4, 0.4, 3}};
  std::string ref2;
  for (unsigned w : {1u, 2u, 8u}) {
    opts.workers = w;
    const std::string j = map_to_json(scan(g2(), box, WorkingMode::uniform(4, -1), 2.0, opts)).dump();
    if (w == 1) ref2 = j;
    CHECK(j == ref2);
  }
}

TEST_CASE("maximal squares re-check cell by cell") {
  const auto& m = g0_map_101();
  for (auto o : {SquareOrientation::AxisAligned, SquareOrientation::Oblique45}) {
    const auto sq = max_square(m, o, 2.0);
    CHECK(sq.orientation == o);
    CHECK(sq.psi_bound == 2.0);
    ScanOptions opts;
    for (const auto& [ix, iy] : sq.cells()) {
      const Pose p = m.pose_at({ix, iy, 0, 0});
      CHECK(evaluate_cell(g0(), p, kMinus, opts).admissible(2.0));
    }
    const std::size_t k = static_cast<std::size_t>(sq.radius_cells);
    CHECK(sq.cells().size() == (o == SquareOrientation::AxisAligned ? (2 * k + 1) * (2 * k + 1)
                                                                    : 2 * k * k + 2 * k + 1));
    CHECK_FALSE(some_center_reaches(m, o, sq.radius_cells + 1, 2.0));
    std::pair<long, long> first;
    REQUIRE(some_center_reaches(m, o, sq.radius_cells, 2.0, &first));
    CHECK(first.first == static_cast<long>(sq.center_ix));
    CHECK(first.second == static_cast<long>(sq.center_iy));
    const double h = m.box.x.step();
    const double expect = (k + 0.5) * h / (o == SquareOrientation::AxisAligned ? 1.0 : std::sqrt(2.0));
    CHECK(sq.half_side == doctest::Approx(expect));
  }
}

TEST_CASE("the oblique square is larger") {
  const auto& m = g0_map_101();
  const auto a = max_square(m, SquareOrientation::AxisAligned, 2.0);
  const auto o = max_square(m, SquareOrientation::Oblique45, 2.0);
  CHECK(o.half_side > a.half_side);
}

TEST_CASE("the square fills a transmission-bounded region") {
  const auto& m = g0_map_101();
  const auto sq = max_square(m, SquareOrientation::AxisAligned, 2.0);
  const double h = m.box.x.step(), k = sq.radius_cells;
  const int n = 2 * sq.radius_cells + 1;
  WorkspaceBox region{{sq.center_x - k * h, sq.center_x + k * h, n},
                      {sq.center_y - k * h, sq.center_y + k * h, n}, {}, {}};
  CHECK(transmission_bounds(g0(), region, 2.0, kMinus).within);
}

TEST_CASE("single admissible cell and empty maps") {
  const auto one = synthetic(7, {{3, 4}});
  for (auto o : {SquareOrientation::AxisAligned, SquareOrientation::Oblique45}) {
    const auto sq = max_square(one, o, 2.0);
    CHECK(sq.radius_cells == 0);
    CHECK(sq.center_ix == 3);
    CHECK(sq.center_iy == 4);
    CHECK(sq.cells().size() == 1);
  }
  CHECK(max_square(one, SquareOrientation::AxisAligned, 2.0).half_side == 0.5);
  CHECK(max_square(one, SquareOrientation::Oblique45, 2.0).half_side ==
        doctest::Approx(0.5 / std::sqrt(2.0)));

  const auto none = synthetic(5, {});
  CHECK(kind_of([&] { max_square(none, SquareOrientation::AxisAligned, 2.0); }) ==
        ErrorKind::EmptyWorkspace);
}

TEST_CASE("ties go to the smallest center in (x, y) order") {
  const auto m = synthetic(5, {{3, 1}, {1, 3}, {4, 0}});
  const auto sq = max_square(m, SquareOrientation::AxisAligned, 2.0);
  CHECK(sq.center_ix == 1);
  CHECK(sq.center_iy == 3);
}

TEST_CASE("squares shrink monotonically with psi") {
  const auto& base = g0_map_101();
  for (auto o : {SquareOrientation::AxisAligned, SquareOrientation::Oblique45}) {
    double prev = 1e300;
    for (double psi : {3.0, 2.0, 1.5, 1.2, 1.1, 1.05, 1.01}) {
      const auto sq = max_square(base, o, psi);
      CHECK(sq.half_side <= prev);
      prev = sq.half_side;
    }
  }
  // Near psi = 1 only a neighbourhood of the isotropic pose survives.
  CHECK(base.at({50, 50, 0, 0}).admissible(1.0 + 1e-9));
  for (std::size_t k = 0; k < base.size(); ++k) {
    if (!base.cells[k].admissible(1.01)) continue;
    const Pose p = base.pose_at(base.unflat(k));
    CHECK(std::hypot(p.x, p.y) < 0.2);
  }
}

TEST_CASE("square sizes converge under grid refinement") {
  for (auto o : {SquareOrientation::AxisAligned, SquareOrientation::Oblique45}) {
    const auto coarse = scan(g0(), square_box(-1.5, 1.5, 51), kMinus, 2.0);
    const auto fine = scan(g0(), square_box(-1.5, 1.5, 101), kMinus, 2.0);
    const double dh = std::abs(max_square(coarse, o, 2.0).half_side - max_square(fine, o, 2.0).half_side);
    CHECK(dh <= 2 * coarse.box.x.step());
  }
}

TEST_CASE("max_square rejects unequal steps and stacked slices") {
  const auto m = scan(g0(), WorkspaceBox{{-1, 1, 11}, {-1, 1, 21}, {}, {}}, kMinus, 2.0);
  CHECK(kind_of([&] { max_square(m, SquareOrientation::AxisAligned, 2.0); }) == ErrorKind::Config);
  const auto s = scan(g1(), WorkspaceBox{{-1, 1, 11}, {-1, 1, 11}, GridAxis{-0.2, 0.2, 3}, {}},
                      WorkingMode::uniform(3, -1), 2.0);
  CHECK(kind_of([&] { max_square(s, SquareOrientation::AxisAligned, 2.0); }) == ErrorKind::Config);
}

TEST_CASE("joint ranges collapse at psi = 1") {
  const auto r = joint_range_limits(g0(), 1 + 1e-9, kMinus);
  CHECK(r.anchored_at_isotropic);
  CHECK(r.anchor.rho == std::vector<double>{-1, -1});
  for (const auto& [lo, hi] : r.ranges) {
    CHECK(hi - lo < 1e-6);
    CHECK(lo <= -1.0);
    CHECK(hi >= -1.0);
  }
}

TEST_CASE("joint ranges at psi = 2 hold on a dense rescan") {
  const auto r = joint_range_limits(g0(), 2.0, kMinus);
  CHECK(r.scale > 0.1);
  for (const auto& [lo, hi] : r.ranges) {
    CHECK(lo < -1.0);
    CHECK(hi > -1.0);
  }
  CHECK(joint_box_admissible(g0(), r.ranges, r.assembly, 2.0, 33));
  // Dense re-verification: every forward image of a 201 x 201 joint grid.
  CHECK(joint_box_admissible(g0(), r.ranges, r.assembly, 2.0, 201));
  // The box is maximal: growing it by a small margin breaks the bound.
  auto grown = r.ranges;
  for (auto& [lo, hi] : grown) {
    lo -= 1e-3;
    hi += 1e-3;
  }
  CHECK_FALSE(joint_box_admissible(g0(), grown, r.assembly, 2.0, 33));
}

TEST_CASE("joint ranges with a loose bound stop at singularities and reach") {
  const auto r2 = joint_range_limits(g0(), 2.0, kMinus);
  const auto r100 = joint_range_limits(g0(), 100.0, kMinus);
  const auto r6 = joint_range_limits(g0(), 1e6, kMinus);
  CHECK(r2.scale <= r100.scale);
  CHECK(r100.scale <= r6.scale);
  auto grown = r6.ranges;
  for (auto& [lo, hi] : grown) {
    lo -= 1e-3;
    hi += 1e-3;
  }
  // Not even an unbounded psi admits the grown box.
  CHECK_FALSE(joint_box_admissible(g0(), grown, r6.assembly, 1e300, 33));
}

TEST_CASE("joint ranges anchor at the best-conditioned node without isotropy") {
  const auto g = fixtures::rails60();
  const auto r = joint_range_limits(g, 3.0, kMinus);
  CHECK_FALSE(r.anchored_at_isotropic);
  const auto fk = forward_kinematics_planar(g, r.anchor, r.assembly);
  const double k_anchor = amplification(build_planar(g, fk.pose, r.anchor)).condition_number.value;
  auto rng = fixtures::rng(50);
  int samples = 0;
  while (samples < 500) {
    const Pose p{fixtures::uniform(rng, -1.5, 1.5), fixtures::uniform(rng, -1.5, 1.5)};
    InverseSolution ik;
    try {
      ik = inverse_kinematics(g, p, kMinus);
    } catch (const Error&) {
      continue;
    }
    const auto jp = build_planar(g, p, ik.joints);
    if (!jp.J) continue;
    ++samples;
    // Grid resolution slack.
    CHECK(k_anchor <= amplification(*jp.J).condition_number.value * 1.01);
  }
  CHECK(joint_box_admissible(g, r.ranges, r.assembly, 3.0, 33));
}

TEST_CASE("map export round trips") {
  const double r2 = std::sqrt(2.0);
  auto m = scan(g0(), square_box(-r2, r2, 21), kMinus, 2.0);
  const auto doc = map_to_json(m);
  CHECK(doc["format"] == "pkmkit.workspace_map");
  const auto back = map_from_json(doc);
  CHECK(map_to_json(back).dump() == doc.dump());
  CHECK(map_to_csv(back) == map_to_csv(m));
  CHECK(back.provenance.geometry_hash == geometry_hash(g0()));

  const std::string csv = map_to_csv(m);
  CHECK(csv.rfind("ix,iy,ib,ig,x,y,beta,gamma,reachable,parallel,serial,admissible,degraded,sigma_min,"
                  "sigma_max,condition\n",
                  0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(m.size() + 1));
  CHECK(csv.find(",inf") != std::string::npos);

  const auto sq = max_square(m, SquareOrientation::Oblique45, 2.0);
  const std::string svg = map_to_svg(m, {sq});
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("#ff00ff") != std::string::npos);
  CHECK(svg.find("<polygon") != std::string::npos);
  CHECK(to_json(sq)["orientation"] == "oblique_45deg");

  auto bad = doc;
  bad["cells"].erase(0);
  CHECK(kind_of([&] { map_from_json(bad); }) == ErrorKind::Config);
  auto wrong = doc;
  wrong["format"] = "something else";
  CHECK(kind_of([&] { map_from_json(wrong); }) == ErrorKind::Config);
}

}  // TEST_SUITE
