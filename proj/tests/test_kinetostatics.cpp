#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "pkmkit/jacobians.hpp"
#include "pkmkit/kinematics.hpp"
#include "pkmkit/kinetostatics.hpp"

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

Eigen::MatrixXd random_matrix(std::mt19937_64& r, int n) {
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) M(i, k) = fixtures::uniform(r, -1, 1);
  return M;
}

Eigen::Matrix2d planar_rotation(double a) {
  Eigen::Matrix2d R;
  R << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  return R;
}

const double kDiag = std::sqrt(2.0) / 2;

}  // namespace

TEST_SUITE("kinetostatics") {

TEST_CASE("identity profile") {
  const auto prof = amplification(Eigen::MatrixXd::Identity(2, 2));
  REQUIRE(prof.singular_values.size() == 2);
  for (const auto& s : prof.singular_values) CHECK(s == Magnitude::finite(1.0));
  for (const auto& f : prof.force_factors) CHECK(f == Magnitude::finite(1.0));
  CHECK(prof.condition_number == Magnitude::finite(1.0));
  CHECK(prof.isotropy_defect == Magnitude::finite(0.0));
  CHECK(prof.within(1.0 + 1e-12));

  const auto jp = build_planar(g0(), Pose{0, 0}, JointVector{{-1, -1}});
  const auto iso = amplification(jp);
  CHECK(iso.condition_number.value == 1.0);
}

TEST_CASE("homogenized reference Jacobians are isotropic") {
  const auto p1 = amplification(build_2t1r(g1(), Pose{0, 0, 0.0}, JointVector{{-1, -1, -1}}), 0.5);
  for (const auto& s : p1.singular_values) CHECK(std::abs(s.value - 1) < 1e-12);
  CHECK(std::abs(p1.condition_number.value - 1) < 1e-10);
  CHECK(p1.isotropy_defect.value < 1e-10);

  const auto p2 =
      amplification(build_2t2r(g2(), Pose{0, 0, 0.0, 0.0}, JointVector{{-1, -1, -1, -1}}), 0.5);
  CHECK(p2.singular_values.size() == 4);
  CHECK(std::abs(p2.condition_number.value - 1) < 1e-10);

  // Without homogenization the raw diag(1, 1, -2) has condition 2.
  const auto raw = amplification(*build_2t1r(g1(), Pose{0, 0, 0.0}, JointVector{{-1, -1, -1}}).J);
  CHECK(raw.condition_number.value == doctest::Approx(2.0));
}

TEST_CASE("error paths") {
  const auto jp1 = build_2t1r(g1(), Pose{0, 0, 0.0}, JointVector{{-1, -1, -1}});
  CHECK(kind_of([&] { amplification(jp1); }) == ErrorKind::Units);
  CHECK(kind_of([] { amplification(Eigen::MatrixXd::Identity(2, 3)); }) == ErrorKind::Config);
  CHECK(kind_of([] { amplification(Eigen::MatrixXd::Identity(1, 1)); }) == ErrorKind::Config);
  CHECK(kind_of([] { amplification(Eigen::MatrixXd::Identity(6, 6)); }) == ErrorKind::Config);
  CHECK_NOTHROW(amplification(homogenize(jp1, 0.5)));
}

TEST_CASE("parallel singular profile") {
  const JointVector q{{0, 0}};
  const auto jp = build_planar(g0(), Pose{kDiag, kDiag}, q);
  REQUIRE(jp.parallel_singular());
  const auto prof = amplification(jp);
  CHECK(prof.sigma_max().infinite);
  CHECK(prof.condition_number.infinite);
  double fmin = 1e300;
  for (const auto& f : prof.force_factors) fmin = std::min(fmin, f.value);
  CHECK(fmin < 1e-10);
  CHECK_FALSE(prof.within(1e6));

  // The locus of mode (-1, -1) is the unit circle; step inward along the radius.
  const Pose near{kDiag * (1 - 1e-6), kDiag * (1 - 1e-6)};
  const auto ik = inverse_kinematics(g0(), near, WorkingMode::uniform(2, -1));
  const auto close = amplification(build_planar(g0(), near, ik.joints));
  REQUIRE_FALSE(close.condition_number.infinite);
  CHECK(close.condition_number.value > 1e5);
}

TEST_CASE("singular values agree with the eigenvalue oracle") {
  auto r = fixtures::rng(40);
  for (int n = 2; n <= 5; ++n) {
    for (int trial = 0; trial < 200; ++trial) {
      const Eigen::MatrixXd J = random_matrix(r, n);
      const auto prof = amplification(J);
      const auto ref = oracle::singular_values(J);
      REQUIRE(prof.singular_values.size() == ref.size());
      for (std::size_t k = 0; k < ref.size(); ++k) {
        CHECK(std::abs(prof.singular_values[k].value - ref[k]) < 1e-10 * std::max(1.0, ref[0]));
        if (k > 0) CHECK(prof.singular_values[k].value <= prof.singular_values[k - 1].value);
        CHECK(prof.singular_values[k].value >= 0.0);
        CHECK(prof.force_factors[k].value == doctest::Approx(1 / prof.singular_values[k].value));
      }
      CHECK(prof.condition_number.value ==
            doctest::Approx(ref.front() / ref.back()).epsilon(1e-8));
      CHECK(prof.isotropy_defect.value > 1e-10);
    }
  }
  for (int trial = 0; trial < 500; ++trial) {
    const Eigen::Matrix2d M = random_matrix(r, 2);
    const auto [s1, s2] = oracle::singular_values_2x2(M);
    const auto prof = amplification(Eigen::MatrixXd(M));
    CHECK(std::abs(prof.singular_values[0].value - s1) < 1e-12);
    CHECK(std::abs(prof.singular_values[1].value - s2) < 1e-10);
  }
}

TEST_CASE("isotropy defect vanishes exactly for orthogonal Jacobians") {
  auto r = fixtures::rng(41);
  for (int n = 2; n <= 5; ++n) {
    for (int trial = 0; trial < 50; ++trial) {
      const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(random_matrix(r, n)).householderQ();
      const auto prof = amplification(Q);
      CHECK(prof.isotropy_defect.value < 1e-10);
      for (const auto& s : prof.singular_values) CHECK(std::abs(s.value - 1) < 1e-12);
    }
  }
}

TEST_CASE("velocity and force factors are dual") {
  auto r = fixtures::rng(42);
  for (const auto& g : {g0(), fixtures::rails60()}) {
    int done = 0;
    while (done < 200) {
      const Pose p = fixtures::random_pose(g, r);
      InverseSolution ik;
      try {
        ik = inverse_kinematics(g, p, WorkingMode{{r() % 2 ? 1 : -1, r() % 2 ? 1 : -1}});
      } catch (const Error&) {
        continue;
      }
      const auto jp = build_planar(g, p, ik.joints);
      if (!jp.J || std::abs(jp.det_B) < 1e-3) continue;
      ++done;
      const Eigen::MatrixXd K = jp.B.inverse() * jp.A;
      const auto sk = oracle::singular_values(K);
      const auto prof = amplification(*jp.J);
      CHECK(std::abs(prof.sigma_min().value - 1 / sk.front()) < 1e-9 * std::max(1.0, 1 / sk.front()));
      CHECK(std::abs(prof.sigma_max().value - 1 / sk.back()) < 1e-9 * std::max(1.0, 1 / sk.back()));
    }
  }
}

TEST_CASE("planar factors are invariant under a rotation of the task frame") {
  auto r = fixtures::rng(43);
  int done = 0;
  while (done < 200) {
    const Pose p = fixtures::random_pose(g0(), r);
    InverseSolution ik;
    try {
      ik = inverse_kinematics(g0(), p, WorkingMode{{r() % 2 ? 1 : -1, r() % 2 ? 1 : -1}});
    } catch (const Error&) {
      continue;
    }
    const auto jp = build_planar(g0(), p, ik.joints);
    if (!jp.J) continue;
    ++done;
    const Eigen::Matrix2d R = planar_rotation(fixtures::uniform(r, -M_PI, M_PI));
    const auto a = amplification(*jp.J);
    const auto b = amplification(Eigen::MatrixXd(R * *jp.J));
    const auto c = amplification(Eigen::MatrixXd(R * *jp.J * R.transpose()));
    for (std::size_t k = 0; k < 2; ++k) {
      const double tol = 1e-12 * std::max(1.0, a.singular_values[0].value);
      CHECK(std::abs(a.singular_values[k].value - b.singular_values[k].value) < tol);
      CHECK(std::abs(a.singular_values[k].value - c.singular_values[k].value) < tol);
    }
  }
}

TEST_CASE("isotropy locus examples") {
  const auto rep = isotropy_locus_check(g0());
  CHECK(rep.e1_dot_e2 == 0.0);
  REQUIRE(rep.exists);
  CHECK(rep.pose->x == 0.0);
  CHECK(rep.pose->y == 0.0);
  CHECK(rep.summary.find("isotropic pose (0, 0)") != std::string::npos);
  REQUIRE(rep.configurations.size() == 4);
  bool found = false;
  for (const auto& c : rep.configurations) {
    if (c.mode.signs != std::vector<int>{-1, -1}) continue;
    found = true;
    CHECK(c.joints.rho == std::vector<double>{-1, -1});
    REQUIRE(c.condition);
    CHECK(std::abs(c.condition->value - 1) < 1e-12);
  }
  CHECK(found);

  const auto r60 = isotropy_locus_check(fixtures::rails60());
  CHECK(r60.e1_dot_e2 == doctest::Approx(0.5));
  CHECK_FALSE(r60.exists);
  CHECK(r60.summary.find("no isotropic configuration exists") != std::string::npos);

  const Pose off{0.3, 0.2};
  const auto ik = inverse_kinematics(g0(), off, WorkingMode::uniform(2, -1));
  CHECK(amplification(build_planar(g0(), off, ik.joints)).condition_number.value > 1.0);
}

TEST_CASE("reported isotropic configurations have unit factors on random orthogonal designs") {
  auto r = fixtures::rng(44);
  for (int trial = 0; trial < 200; ++trial) {
    MechanismGeometry g = g0();
    const double a = fixtures::uniform(r, -M_PI, M_PI);
    const Vec3 e1(std::cos(a), std::sin(a), 0), e2(-std::sin(a), std::cos(a), 0);
    g.translation_legs[0] = fixtures::leg({fixtures::uniform(r, -1, 1), fixtures::uniform(r, -1, 1), 0},
                                          e1, fixtures::uniform(r, 0.5, 1.5), -5, 5);
    g.translation_legs[1] = fixtures::leg({fixtures::uniform(r, -1, 1), fixtures::uniform(r, -1, 1), 0},
                                          e2, fixtures::uniform(r, 0.5, 1.5), -5, 5);
    g.platform_offsets = {Vec3(fixtures::uniform(r, -0.3, 0.3), fixtures::uniform(r, -0.3, 0.3), 0),
                          Vec3(fixtures::uniform(r, -0.3, 0.3), fixtures::uniform(r, -0.3, 0.3), 0)};
    const auto rep = isotropy_locus_check(g);
    CHECK(std::abs(rep.e1_dot_e2) < 1e-12);
    REQUIRE(rep.exists);
    for (const auto& c : rep.configurations) {
      if (!c.within_limits) continue;
      CHECK(closure_residual(g, *rep.pose, c.joints).cwiseAbs().maxCoeff() < 1e-12);
      for (std::size_t i = 0; i < 2; ++i) {
        const Vec3 rod = fixtures::rod(g, *rep.pose, c.joints, i);
        CHECK(rod.cross(g.leg(i).rail_axis).norm() < 1e-12);
      }
      REQUIRE(c.condition);
      CHECK(std::abs(c.condition->value - 1) < 1e-10);
    }
  }
}

TEST_CASE("transmission bounds examples") {
  WorkspaceBox origin{{0, 0, 3}, {0, 0, 3}};
  const auto v = transmission_bounds(g0(), origin, 1.001, WorkingMode::uniform(2, -1));
  CHECK(v.within);
  CHECK(v.samples == 1);

  WorkspaceBox across{{kDiag, kDiag, 3}, {kDiag - 0.1, kDiag + 0.1, 3}};
  const auto s = transmission_bounds(g0(), across, 1e6, WorkingMode::uniform(2, -1));
  CHECK_FALSE(s.within);
  REQUIRE(s.first_violation);
  CHECK(s.first_violation->y == kDiag);

  WorkspaceBox outside{{1.2, 1.6, 5}, {1.2, 1.6, 5}};
  CHECK_THROWS_WITH_AS(transmission_bounds(g0(), outside, 2.0, WorkingMode::uniform(2, -1)),
                       doctest::Contains("first unreachable pose (1.2, 1.2)"), Error);
  CHECK(kind_of([&] { transmission_bounds(g0(), outside, 2.0, WorkingMode::uniform(2, -1)); }) ==
        ErrorKind::Unreachable);
  CHECK(kind_of([&] { transmission_bounds(g0(), origin, 1.0, WorkingMode::uniform(2, -1)); }) ==
        ErrorKind::Config);
}

}  // TEST_SUITE
