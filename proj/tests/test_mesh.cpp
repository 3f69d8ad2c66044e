#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <set>

#include "tdt/mesh.hpp"

using namespace tdt;

namespace {

double total_area(const Mesh& m) {
  double a = 0.0;
  for (int t = 0; t < m.num_triangles(); ++t) a += m.element(t).area;
  return a;
}

double tagged_area(const Mesh& m, RegionTag tag) {
  double a = 0.0;
  for (int t = 0; t < m.num_triangles(); ++t)
    if (m.region_tag[t] == tag) a += m.element(t).area;
  return a;
}

HoldallSpec unit_square_spec(double h) {
  HoldallSpec spec;
  spec.domain = Rect{0.0, 0.0, 1.0, 1.0};
  spec.h = h;
  return spec;
}

}  // namespace

TEST_CASE("structured grid of the unit square at h=0.5", "[mesh]") {
  const Mesh m = structured_grid(Rect{0.0, 0.0, 1.0, 1.0}, 0.5);
  CHECK(m.num_vertices() == 9);
  CHECK(m.num_triangles() == 8);
  CHECK_NOTHROW(validate_mesh(m));
  CHECK(total_area(m) == Catch::Approx(1.0).margin(1e-14));
  for (int t = 0; t < m.num_triangles(); ++t) {
    CHECK(m.region_tag[t] == RegionTag::matrix_complement);
    CHECK(m.element(t).area > 0.0);  // consistent orientation
  }
  // Corner vertices are boundary, the center is interior.
  int boundary_count = 0;
  for (int v = 0; v < m.num_vertices(); ++v) boundary_count += m.boundary_vertex[v];
  CHECK(boundary_count == 8);
}

TEST_CASE("structured grid respects h as an upper bound", "[mesh]") {
  const Mesh m = structured_grid(Rect{0.0, 0.0, 1.0, 2.0}, 0.3);
  CHECK_NOTHROW(validate_mesh(m));
  for (int t = 0; t < m.num_triangles(); ++t)
    CHECK(m.longest_edge(t) <= std::sqrt(2.0) * 0.3 + 1e-12);
  CHECK(total_area(m) == Catch::Approx(2.0).margin(1e-13));
}

TEST_CASE("uniform refinement quadruples triangles and preserves area", "[mesh]") {
  Mesh m = structured_grid(Rect{0.0, 0.0, 1.0, 1.0}, 0.5);
  const Mesh fine = refine_uniform(m);
  CHECK(fine.num_triangles() == 4 * m.num_triangles());
  CHECK_NOTHROW(validate_mesh(fine));
  CHECK(total_area(fine) == Catch::Approx(1.0).margin(1e-14));
  const Mesh finer = refine_uniform(fine);
  CHECK(finer.num_triangles() == 16 * m.num_triangles());
  CHECK_NOTHROW(validate_mesh(finer));
}

TEST_CASE("newest-vertex bisection meets a local sizing target", "[mesh]") {
  Mesh m = structured_grid(Rect{0.0, 0.0, 1.0, 1.0}, 0.25);
  NvbRefiner refiner(std::move(m));
  const Vec2 c{0.3, 0.6};
  auto sizing = [&](const Vec2& p) {
    return norm(p - c) < 0.2 ? 0.02 : 0.25;
  };
  refiner.refine_to_sizing(sizing);
  const Mesh fine = refiner.take();
  CHECK_NOTHROW(validate_mesh(fine));
  CHECK(total_area(fine) == Catch::Approx(1.0).margin(1e-13));
  for (int t = 0; t < fine.num_triangles(); ++t)
    CHECK(fine.longest_edge(t) <= sizing(fine.centroid(t)) * 1.000001);
}

TEST_CASE("point location returns valid barycentric coordinates", "[mesh]") {
  const Mesh m = structured_grid(Rect{0.0, 0.0, 1.0, 1.0}, 0.25);
  Rng rng(12345);
  for (int i = 0; i < 200; ++i) {
    const Vec2 p{rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)};
    const auto hit = m.locate(p);
    REQUIRE(hit.has_value());
    const auto& [t, bc] = *hit;
    Vec2 rec{0.0, 0.0};
    double sum = 0.0;
    for (int k = 0; k < 3; ++k) {
      CHECK(bc[k] >= -1e-10);
      CHECK(bc[k] <= 1.0 + 1e-10);
      sum += bc[k];
      rec = rec + bc[k] * m.vertices[m.triangles[t][k]];
    }
    CHECK(sum == Catch::Approx(1.0).margin(1e-12));
    CHECK(norm(rec - p) < 1e-12);
  }
  CHECK_FALSE(m.locate(Vec2{1.5, 0.5}).has_value());
}

TEST_CASE("mesh validation rejects broken connectivity", "[mesh]") {
  // An edge shared by three triangles.
  Mesh m;
  m.vertices = {{0, 0}, {1, 0}, {0, 1}, {1, 1}, {-1, 0.5}};
  m.boundary_vertex = {1, 1, 1, 1, 1};
  m.triangles = {{0, 1, 2}, {1, 3, 2}, {0, 2, 4}, {0, 1, 2}};
  m.region_tag.assign(4, RegionTag::matrix_complement);
  m.finalize();
  CHECK_THROWS_AS(validate_mesh(m), ConfigError);

  // Boundary flag claimed on an interior vertex.
  Mesh g = structured_grid(Rect{0.0, 0.0, 1.0, 1.0}, 0.5);
  for (int v = 0; v < g.num_vertices(); ++v)
    if (!g.boundary_vertex[v]) g.boundary_vertex[v] = 1;
  CHECK_THROWS_AS(validate_mesh(g), ConfigError);
}

TEST_CASE("hold-all mesh with an accepted perturbation partitions cleanly",
          "[mesh]") {
  // Perturbation disk of radius 0.3 at (0.8, 0.5) next to Omega = disk(0.2)
  // at (0.25, 0.5); both strictly inside the widened rectangle with a gap of
  // 0.05 between them.
  HoldallSpec spec;
  spec.domain = Rect{0.0, 0.0, 1.5, 1.0};
  spec.h = 0.1;
  spec.omega = PlacedShape{InclusionShape::disk(0.2), Vec2{0.25, 0.5}, 1.0};
  spec.perturbation = PlacedShape{InclusionShape::disk(1.0), Vec2{0.8, 0.5}, 0.3};
  const Mesh m = generate_holdall_mesh(spec);
  CHECK_NOTHROW(validate_mesh(m));
  CHECK(total_area(m) == Catch::Approx(1.5).margin(1e-12));

  const double a_incl = tagged_area(m, RegionTag::inclusion);
  const double a_omega = tagged_area(m, RegionTag::matrix_omega);
  const double a_rest = tagged_area(m, RegionTag::matrix_complement);
  CHECK(a_incl > 0.0);
  CHECK(a_omega > 0.0);
  CHECK(a_rest > 0.0);
  CHECK(a_incl + a_omega + a_rest == Catch::Approx(1.5).margin(1e-12));
  // Interface resolution: tagged areas close to the exact disk areas.
  CHECK(a_incl ==
        Catch::Approx(std::numbers::pi * 0.09).epsilon(0.01));
  CHECK(a_omega ==
        Catch::Approx(std::numbers::pi * 0.04).epsilon(0.01));
}

TEST_CASE("hold-all interfaces are resolved by element boundaries", "[mesh]") {
  HoldallSpec spec = unit_square_spec(0.1);
  spec.omega = PlacedShape{InclusionShape::disk(0.2), Vec2{0.4, 0.5}, 1.0};
  const Mesh m = generate_holdall_mesh(spec);
  CHECK_NOTHROW(validate_mesh(m));
  // No triangle may straddle the Omega circle: vertices sit on one closed
  // side up to the polyline sampling error of the curve.
  const double tol = 1e-4;
  for (int t = 0; t < m.num_triangles(); ++t) {
    int strictly_inside = 0, strictly_outside = 0;
    for (int k = 0; k < 3; ++k) {
      const double r = norm(m.vertices[m.triangles[t][k]] - Vec2{0.4, 0.5});
      if (r < 0.2 - tol) ++strictly_inside;
      if (r > 0.2 + tol) ++strictly_outside;
    }
    INFO("triangle " << t);
    CHECK((strictly_inside == 0 || strictly_outside == 0));
  }
}

TEST_CASE("touching perturbation and subdomain are rejected", "[mesh]") {
  // Exact tangency: |z - c| = 0.5 = 0.3 + 0.2.
  HoldallSpec spec = unit_square_spec(0.1);
  spec.omega = PlacedShape{InclusionShape::disk(0.2), Vec2{0.25, 0.5}, 1.0};
  spec.perturbation = PlacedShape{InclusionShape::disk(1.0), Vec2{0.75, 0.5}, 0.3};
  CHECK_THROWS_AS(check_holdall_preconditions(spec), ConfigError);
  // Perturbation reaching the hold-all boundary is rejected as well.
  HoldallSpec edge = unit_square_spec(0.1);
  edge.perturbation = PlacedShape{InclusionShape::disk(1.0), Vec2{0.9, 0.5}, 0.1};
  CHECK_THROWS_AS(check_holdall_preconditions(edge), ConfigError);
  // A perturbation strictly inside Omega (removal branch) is fine.
  HoldallSpec removal = unit_square_spec(0.1);
  removal.omega = PlacedShape{InclusionShape::disk(0.2), Vec2{0.5, 0.5}, 1.0};
  removal.perturbation = PlacedShape{InclusionShape::disk(1.0), Vec2{0.5, 0.5}, 0.05};
  CHECK_NOTHROW(check_holdall_preconditions(removal));
  // ... but not one that pokes through the Omega interface.
  removal.perturbation->scale = 0.25;
  CHECK_THROWS_AS(check_holdall_preconditions(removal), ConfigError);
}

TEST_CASE("hold-all generation is deterministic", "[mesh]") {
  HoldallSpec spec = unit_square_spec(0.07);
  spec.omega = PlacedShape{InclusionShape::disk(0.2), Vec2{0.4, 0.5}, 1.0};
  spec.perturbation = PlacedShape{InclusionShape::disk(1.0), Vec2{0.75, 0.6}, 0.08};
  const Mesh a = generate_holdall_mesh(spec);
  const Mesh b = generate_holdall_mesh(spec);
  REQUIRE(a.num_vertices() == b.num_vertices());
  REQUIRE(a.num_triangles() == b.num_triangles());
  for (int v = 0; v < a.num_vertices(); ++v) {
    CHECK(a.vertices[v].x == b.vertices[v].x);
    CHECK(a.vertices[v].y == b.vertices[v].y);
  }
  for (int t = 0; t < a.num_triangles(); ++t) {
    CHECK(a.triangles[t] == b.triangles[t]);
    CHECK(a.region_tag[t] == b.region_tag[t]);
  }
}

TEST_CASE("corrector disk mesh at coarse settings", "[mesh]") {
  DiskMeshSpec spec;
  spec.shape = InclusionShape::disk(0.25);
  spec.radius = 1.0;
  spec.h_near = 1.0;
  spec.h_far = 1.0;
  const Mesh m = generate_disk_mesh(spec);
  CHECK_NOTHROW(validate_mesh(m));
  CHECK(std::abs(total_area(m) - std::numbers::pi) <= 2.0);
  CHECK(std::abs(tagged_area(m, RegionTag::inclusion) -
                 std::numbers::pi * 0.25 * 0.25) <= 2.0);
  // Every |x| = R vertex must carry the boundary flag.
  for (int v = 0; v < m.num_vertices(); ++v) {
    const bool on_rim = std::abs(norm(m.vertices[v]) - 1.0) < 1e-9;
    CHECK(static_cast<bool>(m.boundary_vertex[v]) == on_rim);
  }
}

TEST_CASE("corrector disk mesh resolves the inclusion boundary", "[mesh]") {
  DiskMeshSpec spec;
  spec.shape = InclusionShape::disk(1.0);
  spec.radius = 50.0;
  spec.h_near = 0.02;
  const Mesh m = generate_disk_mesh(spec);
  CHECK_NOTHROW(validate_mesh(m));
  // Triangles touching the inclusion interface stay at the near size.
  for (int t = 0; t < m.num_triangles(); ++t) {
    bool on_interface = false;
    for (int k = 0; k < 3; ++k)
      on_interface = on_interface ||
                     std::abs(norm(m.vertices[m.triangles[t][k]]) - 1.0) < 1e-9;
    if (on_interface) {
      INFO("triangle " << t << " diameter " << m.longest_edge(t));
      CHECK(m.longest_edge(t) <= 2.0 * 0.02);
    }
  }
  // Tag split: the inclusion area matches |omega| closely at this resolution.
  CHECK(tagged_area(m, RegionTag::inclusion) ==
        Catch::Approx(std::numbers::pi).epsilon(2e-3));
  CHECK(total_area(m) ==
        Catch::Approx(std::numbers::pi * 50.0 * 50.0).epsilon(2e-3));
}

TEST_CASE("corrector disk mesh for a polygonal inclusion", "[mesh]") {
  // Square inclusion with half-diagonal 1.
  const auto square = InclusionShape::polygon(
      {{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}});
  DiskMeshSpec spec;
  spec.shape = square;
  spec.radius = 20.0;
  spec.h_near = 0.1;
  const Mesh m = generate_disk_mesh(spec);
  CHECK_NOTHROW(validate_mesh(m));
  // Exact polygon: corners are in the angle set, so the tagged area matches
  // the shoelace area (2.0) to interface-snapping accuracy.
  CHECK(tagged_area(m, RegionTag::inclusion) == Catch::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("disk mesh sizing preconditions", "[mesh]") {
  DiskMeshSpec spec;
  spec.shape = InclusionShape::disk(1.0);
  spec.radius = 50.0;
  spec.h_far = 60.0;  // farther apart than the domain itself
  CHECK_THROWS_AS(generate_disk_mesh(spec), ConfigError);
  spec.h_far = 0.0;
  spec.radius = 3.0;  // inclusion no longer fits in R/4
  CHECK_THROWS_AS(generate_disk_mesh(spec), ConfigError);
}

TEST_CASE("inclusion shapes expose geometry helpers", "[mesh]") {
  const auto disk = InclusionShape::disk(2.0);
  CHECK(disk.max_radius() == Catch::Approx(2.0));
  CHECK(disk.area() == Catch::Approx(4.0 * std::numbers::pi));
  CHECK(disk.contains(Vec2{1.9, 0.0}));
  CHECK_FALSE(disk.contains(Vec2{2.1, 0.0}));

  const auto tri = InclusionShape::polygon({{1, 0}, {-1, 1}, {-1, -1}});
  CHECK(tri.area() == Catch::Approx(2.0));
  CHECK(tri.contains(Vec2{0.0, 0.0}));
  CHECK_FALSE(tri.contains(Vec2{1.0, 1.0}));
  // Radial support function hits the vertices exactly.
  CHECK(tri.radial(0.0) == Catch::Approx(1.0));

  // An L-shape contains the origin but is not star-shaped with respect to
  // it (the notch hides part of the boundary): rejected.
  CHECK_THROWS_AS(
      InclusionShape::polygon(
          {{1, -1}, {1, 1}, {2, 1}, {2, 2}, {-1, 2}, {-1, -1}}),
      ConfigError);
  // Origin outside the polygon: rejected.
  CHECK_THROWS_AS(InclusionShape::polygon({{1, 1}, {2, 1}, {2, 2}, {1, 2}}),
                  ConfigError);

  // Placed shapes scale and translate.
  const PlacedShape placed{disk, Vec2{3.0, 0.0}, 0.5};
  CHECK(placed.contains(Vec2{3.9, 0.0}));
  CHECK_FALSE(placed.contains(Vec2{4.1, 0.0}));
  CHECK(placed.area() == Catch::Approx(std::numbers::pi));
}

TEST_CASE("radial distance to the subdomain boundary", "[mesh]") {
  const PlacedShape omega{InclusionShape::disk(0.2), Vec2{0.5, 0.5}, 1.0};
  CHECK(radial_distance_to_boundary(omega, Vec2{0.75, 0.5}) ==
        Catch::Approx(0.05).margin(1e-9));
  CHECK(radial_distance_to_boundary(omega, Vec2{0.5, 0.65}) ==
        Catch::Approx(0.05).margin(1e-9));
}
