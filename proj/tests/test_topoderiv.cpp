#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "support/benchmarks.hpp"
#include "tdt/topoderiv.hpp"

using namespace tdt;
using tdt_test::bench_corrector;
using tdt_test::disk_benchmark;
using tdt_test::grad_tracking;
using tdt_test::linear_contrast;

namespace {

CorrectorSettings bench_settings() { return bench_corrector(); }

struct BenchFixture {
  ProblemData data = disk_benchmark();
  StateSolution state;
  BenchFixture() { state = solve_state_and_adjoint(data, build_state_mesh(data)); }
};

const BenchFixture& bench() {
  static const BenchFixture fx;
  return fx;
}

}  // namespace

TEST_CASE("partial Lagrangian derivative is the flux jump against P0",
          "[topoderiv]") {
  TwoPhaseMaterial m;
  m.a1 = reluctivity_material(1.0, 3.0, 1.0, 1);
  m.a2 = linear_material(1.0);
  const Vec2 U0{1.0, 0.0};
  const Vec2 P0{0.5, 2.0};
  // a1(U0) = (nu(1), 0) = (2, 0); a2(U0) = (1, 0); jump.P0 = 0.5.
  CHECK(dl_G(m, U0, P0) == Catch::Approx(0.5).margin(1e-15));
  m.swap = true;
  CHECK(dl_G(m, U0, P0) == Catch::Approx(-0.5).margin(1e-15));
}

TEST_CASE("evaluate_td reproduces the analytic disk limit", "[topoderiv][slow]") {
  const TwoPhaseMaterial m = linear_contrast();
  const TdBreakdown td = evaluate_td(m, Vec2{1.0, 0.0}, Vec2{1.0, 0.0},
                                     /*removal=*/false, grad_tracking(),
                                     bench_settings());
  // dl_G = (2-1) * 1 exactly; R1 -> rho^2 + 2 pi rho^2 / |omega| = 2/9;
  // R2 -> (2-1) rho = -1/3 for rho = -1/3.
  CHECK(td.dl_g == Catch::Approx(1.0).margin(1e-14));
  CHECK(td.r1 == Catch::Approx(2.0 / 9.0).epsilon(0.01));
  CHECK(td.r2 == Catch::Approx(-1.0 / 3.0).epsilon(0.01));
  CHECK(td.td_lagrangian == Catch::Approx(8.0 / 9.0).epsilon(0.01));
  // The sum identity is structural, not approximate.
  CHECK(td.td_lagrangian == td.dl_g + td.r1 + td.r2);
  // All three routes agree far below the discretization error.
  CHECK(std::abs(td.td_alternative - td.td_lagrangian) <=
        1e-10 * (1.0 + std::abs(td.td_lagrangian)));
  CHECK(std::abs(td.td_averaged - td.td_lagrangian) <=
        1e-10 * (1.0 + std::abs(td.td_lagrangian)));
}

TEST_CASE("route agreement holds for the nonlinear law", "[topoderiv][slow]") {
  TwoPhaseMaterial m;
  m.a1 = reluctivity_material(1.0, 3.0, 1.0, 1);
  m.a2 = linear_material(1.0);
  const TdBreakdown td = evaluate_td(m, Vec2{1.0, 0.0}, Vec2{1.0, 0.0},
                                     /*removal=*/false, grad_tracking(),
                                     bench_settings());
  CHECK(td.dl_g == Catch::Approx(1.0).margin(1e-14));  // nu(1) = 2 again
  CHECK(td.td_lagrangian == td.dl_g + td.r1 + td.r2);
  // The s-quadrature is essentially exact for the smooth law; the routes
  // agree to a much tighter level than the 1% acceptance band.
  CHECK(std::abs(td.td_alternative - td.td_lagrangian) <=
        1e-8 * (1.0 + std::abs(td.td_lagrangian)));
  CHECK(std::abs(td.td_averaged - td.td_lagrangian) <=
        1e-8 * (1.0 + std::abs(td.td_lagrangian)));
}

TEST_CASE("zero contrast makes every component vanish", "[topoderiv]") {
  TwoPhaseMaterial m;
  m.a1 = linear_material(3.0);
  m.a2 = linear_material(3.0);
  CorrectorSettings s;
  s.radius = 10.0;
  s.h_near = 0.1;
  const TdBreakdown td = evaluate_td(m, Vec2{1.0, 0.0}, Vec2{1.0, 0.0},
                                     /*removal=*/false, grad_tracking(), s);
  CHECK(td.dl_g == 0.0);
  CHECK(std::abs(td.r1) <= 1e-12);
  CHECK(std::abs(td.r2) <= 1e-12);
  CHECK(std::abs(td.td_lagrangian) <= 1e-12);
  CHECK(std::abs(td.td_alternative) <= 1e-12);
  CHECK(std::abs(td.td_averaged) <= 1e-12);
}

TEST_CASE("point evaluation recovers the benchmark limit", "[topoderiv][slow]") {
  const BenchFixture& fx = bench();
  const TdBreakdown td =
      td_point(fx.data, fx.state, bench_settings(), Vec2{0.25, 0.5}, 0.02);
  CHECK(td.z.x == 0.25);
  CHECK(td.z.y == 0.5);
  CHECK_FALSE(td.removal);
  CHECK(td.U0.x == Catch::Approx(1.0).epsilon(0.01));
  CHECK(std::abs(td.U0.y) <= 1e-6);
  CHECK(td.P0.x == Catch::Approx(1.0).epsilon(0.01));
  CHECK(td.td_lagrangian == Catch::Approx(8.0 / 9.0).epsilon(0.05));
  CHECK(td.td_lagrangian == td.dl_g + td.r1 + td.r2);
}

TEST_CASE("point evaluation respects the mesh symmetry", "[topoderiv][slow]") {
  const BenchFixture& fx = bench();
  const TdBreakdown lo =
      td_point(fx.data, fx.state, bench_settings(), Vec2{0.25, 0.35}, 0.02);
  const TdBreakdown hi =
      td_point(fx.data, fx.state, bench_settings(), Vec2{0.25, 0.65}, 0.02);
  CHECK(std::abs(lo.td_lagrangian - hi.td_lagrangian) <=
        1e-3 * std::abs(lo.td_lagrangian));
}

TEST_CASE("degenerate center point yields a negligible derivative",
          "[topoderiv][slow]") {
  // grad u0 vanishes at the symmetry center, so every term is tiny; the
  // pipeline must handle U0 ~ 0 without blowing up.
  const BenchFixture& fx = bench();
  CorrectorSettings s;
  s.radius = 10.0;
  s.h_near = 0.1;
  const TdBreakdown td = td_point(fx.data, fx.state, s, Vec2{0.5, 0.5}, 0.02);
  CHECK(std::abs(td.td_lagrangian) <= 1e-6);
}

TEST_CASE("point classification distinguishes the branches", "[topoderiv]") {
  ProblemData d = disk_benchmark();
  d.omega = PlacedShape{InclusionShape::disk(0.18), Vec2{0.65, 0.5}, 1.0};
  CHECK(classify_removal(d, Vec2{0.65, 0.5}, 0.02));
  CHECK_FALSE(classify_removal(d, Vec2{0.25, 0.5}, 0.02));
  // Inside the exclusion band around the Omega interface, on either side.
  CHECK_THROWS_AS(classify_removal(d, Vec2{0.82, 0.5}, 0.02), ConfigError);
  CHECK_THROWS_AS(classify_removal(d, Vec2{0.84, 0.5}, 0.02), ConfigError);
  CHECK_FALSE(classify_removal(d, Vec2{0.86, 0.5}, 0.02));
  // Hold-all boundary and exterior.
  CHECK_THROWS_AS(classify_removal(d, Vec2{1.2, 0.5}, 0.02), ConfigError);
  CHECK_THROWS_AS(classify_removal(d, Vec2{0.999, 0.5}, 0.02), ConfigError);
  // Without Omega everything is an insertion point.
  d.omega.reset();
  CHECK_FALSE(classify_removal(d, Vec2{0.65, 0.5}, 0.02));
}

TEST_CASE("removal equals insertion in the role-swapped configuration",
          "[topoderiv][slow]") {
  // Literally exchanging a1 and a2 while setting the swap flag yields the
  // same effective two-phase law through a different code path; the whole
  // computation must agree bit for bit.
  ProblemData base = disk_benchmark();
  base.omega = PlacedShape{InclusionShape::disk(0.18), Vec2{0.65, 0.5}, 1.0};

  ProblemData exchanged = base;
  exchanged.materials.a1 = base.materials.a2;
  exchanged.materials.a2 = base.materials.a1;
  exchanged.materials.swap = true;

  const Vec2 z{0.65, 0.5};
  CorrectorSettings s;
  s.radius = 20.0;
  s.h_near = 0.05;

  const StateSolution state_a =
      solve_state_and_adjoint(base, build_state_mesh(base));
  const StateSolution state_b =
      solve_state_and_adjoint(exchanged, build_state_mesh(exchanged));
  const TdBreakdown a = td_point(base, state_a, s, z, 0.02);
  const TdBreakdown b = td_point(exchanged, state_b, s, z, 0.02);

  CHECK(a.removal);
  CHECK(b.removal);
  CHECK(a.U0.x == b.U0.x);
  CHECK(a.U0.y == b.U0.y);
  CHECK(a.P0.x == b.P0.x);
  CHECK(a.P0.y == b.P0.y);
  CHECK(a.dl_g == b.dl_g);
  CHECK(a.r1 == b.r1);
  CHECK(a.r2 == b.r2);
  CHECK(a.td_lagrangian == b.td_lagrangian);
  CHECK(a.td_alternative == b.td_alternative);
  CHECK(a.td_averaged == b.td_averaged);
  // The removal derivative at this off-center point is distinctly nonzero.
  CHECK(std::abs(a.td_lagrangian) > 0.05);
}

TEST_CASE("field evaluation records values and per-point failures",
          "[topoderiv][slow]") {
  const BenchFixture& fx = bench();
  CorrectorSettings s;
  s.radius = 20.0;
  s.h_near = 0.05;
  const std::vector<Vec2> points = {
      Vec2{0.25, 0.5},   // valid
      Vec2{0.25, 0.5},   // duplicate: shares the corrector solve
      Vec2{1.5, 0.5},    // outside the hold-all
      Vec2{0.999, 0.999}  // inside the boundary exclusion band
  };
  const auto rows = td_field(fx.data, fx.state, s, points, 0.02);
  REQUIRE(rows.size() == 4);

  REQUIRE(rows[0].td.has_value());
  REQUIRE(rows[1].td.has_value());
  CHECK(rows[0].error.empty());
  // The duplicate point reuses the cluster: identical numbers.
  CHECK(rows[0].td->td_lagrangian == rows[1].td->td_lagrangian);
  CHECK(rows[0].td->r1 == rows[1].td->r1);

  CHECK_FALSE(rows[2].td.has_value());
  CHECK_FALSE(rows[2].error.empty());
  CHECK_FALSE(rows[3].td.has_value());
  CHECK_FALSE(rows[3].error.empty());

  // A field row matches the dedicated point evaluation exactly.
  const TdBreakdown direct = td_point(fx.data, fx.state, s, points[0], 0.02);
  CHECK(rows[0].td->td_lagrangian == direct.td_lagrangian);
  CHECK(rows[0].td->td_averaged == direct.td_averaged);
}
