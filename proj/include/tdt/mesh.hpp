#pragma once

// Conforming P1 triangle meshes and their generators.
//
// Two generators cover the library's needs:
//   * generate_holdall_mesh: structured grid on a rectangle, locally refined
//     by newest-vertex bisection toward material interfaces, then cut/snapped
//     so the interfaces (fixed subdomain boundary and the scaled perturbation)
//     are resolved by element edges and every triangle is tagged with the
//     region it lies in.
//   * generate_disk_mesh: graded concentric-ring mesh on a truncation disk
//     B_R around a reference inclusion, fine (h_near) at the inclusion
//     boundary and coarsening linearly in distance up to h_far at radius R.
//
// All meshes are immutable after construction; derived data (element areas,
// P1 basis gradients, point-location buckets) is computed once in finalize().

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <unordered_map>
#include <vector>

#include "tdt/common.hpp"
#include "tdt/geometry.hpp"

namespace tdt {

enum class RegionTag { inclusion, matrix_omega, matrix_complement };

inline const char* to_string(RegionTag t) {
  switch (t) {
    case RegionTag::inclusion: return "inclusion";
    case RegionTag::matrix_omega: return "matrix_omega";
    case RegionTag::matrix_complement: return "matrix_complement";
  }
  return "?";
}

inline RegionTag region_tag_from_string(const std::string& s) {
  if (s == "inclusion") return RegionTag::inclusion;
  if (s == "matrix_omega") return RegionTag::matrix_omega;
  if (s == "matrix_complement") return RegionTag::matrix_complement;
  throw ConfigError("mesh: unknown region tag '" + s + "'");
}

// Per-element P1 data: area and the constant gradients of the three nodal
// basis functions.
struct ElementGeometry {
  double area = 0.0;
  std::array<Vec2, 3> grad{};
};

// Description of the curve the boundary-flagged vertices lie on; lets the
// validator make a geometric check when the provenance is known.
struct OuterBoundary {
  enum class Kind { unspecified, rectangle, circle } kind = Kind::unspecified;
  Rect rect;
  double circle_radius = 0.0;
};

class Mesh {
 public:
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> triangles;   // CCW vertex indices
  std::vector<RegionTag> region_tag;           // per triangle
  std::vector<std::uint8_t> boundary_vertex;   // per vertex, 1 on outer boundary
  OuterBoundary outer;

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }

  const ElementGeometry& element(int t) const { return elem_geo_[t]; }

  Vec2 centroid(int t) const {
    const auto& tri = triangles[t];
    return (vertices[tri[0]] + vertices[tri[1]] + vertices[tri[2]]) / 3.0;
  }

  double longest_edge(int t) const {
    const auto& tri = triangles[t];
    const double e0 = norm(vertices[tri[1]] - vertices[tri[0]]);
    const double e1 = norm(vertices[tri[2]] - vertices[tri[1]]);
    const double e2 = norm(vertices[tri[0]] - vertices[tri[2]]);
    return std::max(e0, std::max(e1, e2));
  }

  double total_area() const { return total_area_; }
  double area_of(RegionTag tag) const {
    switch (tag) {
      case RegionTag::inclusion: return area_tag_[0];
      case RegionTag::matrix_omega: return area_tag_[1];
      case RegionTag::matrix_complement: return area_tag_[2];
    }
    return 0.0;
  }

  // Computes derived data and checks orientation. Must be called once after
  // the raw arrays are filled; generators and readers do this.
  void finalize() {
    if (region_tag.size() != triangles.size())
      throw ConfigError("mesh: region tag count does not match triangle count");
    if (boundary_vertex.size() != vertices.size())
      throw ConfigError("mesh: boundary flag count does not match vertex count");
    elem_geo_.resize(triangles.size());
    total_area_ = 0.0;
    area_tag_ = {0.0, 0.0, 0.0};
    for (std::size_t t = 0; t < triangles.size(); ++t) {
      auto& tri = triangles[t];
      for (int k = 0; k < 3; ++k)
        if (tri[k] < 0 || tri[k] >= num_vertices())
          throw ConfigError("mesh: triangle vertex index out of range");
      const Vec2 p0 = vertices[tri[0]], p1 = vertices[tri[1]], p2 = vertices[tri[2]];
      double twice_area = cross(p1 - p0, p2 - p0);
      if (twice_area < 0.0) {
        std::swap(tri[1], tri[2]);
        twice_area = -twice_area;
      }
      if (!(twice_area > 0.0))
        throw ConfigError("mesh: degenerate triangle (zero area)");
      ElementGeometry g;
      g.area = 0.5 * twice_area;
      // grad of barycentric basis i: rotate the opposite edge by 90 degrees.
      const Vec2 q0 = vertices[tri[0]], q1 = vertices[tri[1]], q2 = vertices[tri[2]];
      g.grad[0] = Vec2{q1.y - q2.y, q2.x - q1.x} / twice_area;
      g.grad[1] = Vec2{q2.y - q0.y, q0.x - q2.x} / twice_area;
      g.grad[2] = Vec2{q0.y - q1.y, q1.x - q0.x} / twice_area;
      elem_geo_[t] = g;
      total_area_ += g.area;
      area_tag_[static_cast<int>(region_tag[t])] += g.area;
    }
    build_buckets();
  }

  // Locates the triangle whose closure contains p; returns triangle index and
  // barycentric coordinates, or nullopt if p is outside the mesh.
  std::optional<std::pair<int, std::array<double, 3>>> locate(const Vec2& p) const {
    if (bucket_nx_ == 0) return std::nullopt;
    const int bx = std::clamp(
        static_cast<int>((p.x - bb_min_.x) / bucket_dx_), 0, bucket_nx_ - 1);
    const int by = std::clamp(
        static_cast<int>((p.y - bb_min_.y) / bucket_dy_), 0, bucket_ny_ - 1);
    constexpr double tol = 1e-10;
    for (int t : buckets_[static_cast<std::size_t>(by) * bucket_nx_ + bx]) {
      const auto bc = barycentric(t, p);
      if (bc[0] >= -tol && bc[1] >= -tol && bc[2] >= -tol) return std::make_pair(t, bc);
    }
    return std::nullopt;
  }

  std::array<double, 3> barycentric(int t, const Vec2& p) const {
    const auto& tri = triangles[t];
    const auto& g = elem_geo_[t];
    // lambda_i(p) is affine with gradient g.grad[i] and value 1 at vertex i.
    std::array<double, 3> bc{};
    for (int k = 0; k < 3; ++k)
      bc[k] = 1.0 + dot(g.grad[k], p - vertices[tri[k]]);
    return bc;
  }

 private:
  void build_buckets() {
    bb_min_ = Vec2{std::numeric_limits<double>::max(), std::numeric_limits<double>::max()};
    Vec2 bb_max{-bb_min_.x, -bb_min_.y};
    for (const auto& v : vertices) {
      bb_min_.x = std::min(bb_min_.x, v.x);
      bb_min_.y = std::min(bb_min_.y, v.y);
      bb_max.x = std::max(bb_max.x, v.x);
      bb_max.y = std::max(bb_max.y, v.y);
    }
    const int n = std::max(1, static_cast<int>(std::sqrt(triangles.size() / 2.0)));
    bucket_nx_ = bucket_ny_ = n;
    bucket_dx_ = std::max((bb_max.x - bb_min_.x) / n, 1e-300);
    bucket_dy_ = std::max((bb_max.y - bb_min_.y) / n, 1e-300);
    buckets_.assign(static_cast<std::size_t>(n) * n, {});
    for (int t = 0; t < num_triangles(); ++t) {
      Vec2 lo = vertices[triangles[t][0]], hi = lo;
      for (int k : {1, 2}) {
        const Vec2& v = vertices[triangles[t][k]];
        lo.x = std::min(lo.x, v.x);
        lo.y = std::min(lo.y, v.y);
        hi.x = std::max(hi.x, v.x);
        hi.y = std::max(hi.y, v.y);
      }
      const int ix0 = std::clamp(static_cast<int>((lo.x - bb_min_.x) / bucket_dx_), 0, n - 1);
      const int ix1 = std::clamp(static_cast<int>((hi.x - bb_min_.x) / bucket_dx_), 0, n - 1);
      const int iy0 = std::clamp(static_cast<int>((lo.y - bb_min_.y) / bucket_dy_), 0, n - 1);
      const int iy1 = std::clamp(static_cast<int>((hi.y - bb_min_.y) / bucket_dy_), 0, n - 1);
      for (int iy = iy0; iy <= iy1; ++iy)
        for (int ix = ix0; ix <= ix1; ++ix)
          buckets_[static_cast<std::size_t>(iy) * n + ix].push_back(t);
    }
  }

  std::vector<ElementGeometry> elem_geo_;
  double total_area_ = 0.0;
  std::array<double, 3> area_tag_{};
  std::vector<std::vector<int>> buckets_;
  Vec2 bb_min_;
  int bucket_nx_ = 0, bucket_ny_ = 0;
  double bucket_dx_ = 1.0, bucket_dy_ = 1.0;
};

namespace detail {

inline std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Validation: positive areas (finalize guarantees), conformity (every edge
// shared by at most two triangles, interior edges traversed once in each
// direction), and boundary-flag consistency (flags match the set of vertices
// on single-triangle edges, and lie on the declared outer curve when known).
// ---------------------------------------------------------------------------
inline void validate_mesh(const Mesh& mesh) {
  std::unordered_map<std::uint64_t, int> edge_count;
  std::unordered_map<std::uint64_t, int> edge_orientation;  // +1 fwd, -1 bwd
  edge_count.reserve(mesh.triangles.size() * 2);
  for (const auto& tri : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      const int a = tri[k], b = tri[(k + 1) % 3];
      const auto key = detail::edge_key(a, b);
      edge_count[key] += 1;
      edge_orientation[key] += (a < b) ? 1 : -1;
    }
  }
  std::vector<std::uint8_t> on_boundary_edge(mesh.vertices.size(), 0);
  for (const auto& [key, count] : edge_count) {
    if (count > 2) throw ConfigError("mesh: edge shared by more than two triangles");
    if (count == 2 && edge_orientation[key] != 0)
      throw ConfigError("mesh: interior edge traversed twice in the same direction");
    if (count == 1) {
      on_boundary_edge[key >> 32] = 1;
      on_boundary_edge[key & 0xffffffffu] = 1;
    }
  }
  std::vector<std::uint8_t> used(mesh.vertices.size(), 0);
  for (const auto& tri : mesh.triangles)
    for (int k = 0; k < 3; ++k) used[tri[k]] = 1;
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    if (!used[v]) throw ConfigError("mesh: unused vertex " + std::to_string(v));
    if (on_boundary_edge[v] != (mesh.boundary_vertex[v] ? 1 : 0))
      throw ConfigError("mesh: boundary flag mismatch at vertex " + std::to_string(v));
    if (mesh.boundary_vertex[v] && mesh.outer.kind != OuterBoundary::Kind::unspecified) {
      const Vec2 p = mesh.vertices[v];
      double dist = 0.0;
      if (mesh.outer.kind == OuterBoundary::Kind::rectangle) {
        const Rect& r = mesh.outer.rect;
        dist = std::min(std::min(std::abs(p.x - r.x0), std::abs(r.x1 - p.x)),
                        std::min(std::abs(p.y - r.y0), std::abs(r.y1 - p.y)));
      } else {
        dist = std::abs(norm(p) - mesh.outer.circle_radius);
      }
      if (dist > 1e-9 * (1.0 + norm(p)))
        throw ConfigError("mesh: flagged vertex off the declared outer boundary");
    }
  }
}

// ---------------------------------------------------------------------------
// Uniform ("red") refinement: every triangle is split into four via edge
// midpoints. Region tags are inherited; midpoints of boundary edges become
// boundary vertices. Areas are preserved exactly on polygonal domains.
// ---------------------------------------------------------------------------
inline Mesh refine_uniform(const Mesh& mesh) {
  Mesh out;
  out.vertices = mesh.vertices;
  out.boundary_vertex = mesh.boundary_vertex;
  out.outer = mesh.outer;

  std::unordered_map<std::uint64_t, int> edge_tris;
  for (const auto& tri : mesh.triangles)
    for (int k = 0; k < 3; ++k)
      edge_tris[detail::edge_key(tri[k], tri[(k + 1) % 3])] += 1;

  std::unordered_map<std::uint64_t, int> midpoint;
  auto midpoint_of = [&](int a, int b) {
    const auto key = detail::edge_key(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    const int idx = static_cast<int>(out.vertices.size());
    out.vertices.push_back((mesh.vertices[a] + mesh.vertices[b]) * 0.5);
    const bool bdry = edge_tris.at(key) == 1 && mesh.boundary_vertex[a] &&
                      mesh.boundary_vertex[b];
    out.boundary_vertex.push_back(bdry ? 1 : 0);
    midpoint.emplace(key, idx);
    return idx;
  };

  out.triangles.reserve(mesh.triangles.size() * 4);
  out.region_tag.reserve(mesh.triangles.size() * 4);
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    const int a = tri[0], b = tri[1], c = tri[2];
    const int mab = midpoint_of(a, b), mbc = midpoint_of(b, c), mca = midpoint_of(c, a);
    const RegionTag tag = mesh.region_tag[t];
    for (const auto& child : {std::array<int, 3>{a, mab, mca},
                              std::array<int, 3>{mab, b, mbc},
                              std::array<int, 3>{mca, mbc, c},
                              std::array<int, 3>{mab, mbc, mca}}) {
      out.triangles.push_back(child);
      out.region_tag.push_back(tag);
    }
  }
  out.finalize();
  return out;
}

// ---------------------------------------------------------------------------
// Local refinement by newest-vertex bisection (NVB). Triangles carry their
// refinement edge implicitly: vertex 0 is the "peak", the refinement edge is
// (v1, v2). Structured grids start with the right-angle vertex as peak, so
// the refinement edge is the hypotenuse and bisection preserves the
// right-isosceles shape family. Conformity is maintained by the usual
// compatibility recursion.
// ---------------------------------------------------------------------------
class NvbRefiner {
 public:
  explicit NvbRefiner(Mesh mesh) : mesh_(std::move(mesh)) {
    rebuild_edge_map();
  }

  // Bisects every triangle whose longest edge exceeds sizing(centroid) until
  // none does. The sizing function must be bounded below by a positive h_min.
  void refine_to_sizing(const std::function<double(const Vec2&)>& sizing,
                        int max_passes = 64) {
    for (int pass = 0; pass < max_passes; ++pass) {
      const std::size_t count = mesh_.triangles.size();
      for (std::size_t t = 0; t < count; ++t)
        if (oversized(static_cast<int>(t), sizing)) bisect(static_cast<int>(t), 0);
      // Triangles appended during this pass are checked on the next sweep.
      bool any = false;
      for (std::size_t t = 0; t < mesh_.triangles.size(); ++t)
        if (oversized(static_cast<int>(t), sizing)) {
          any = true;
          break;
        }
      if (!any) return;
    }
    throw ConfigError("mesh: local refinement did not terminate (sizing too demanding)");
  }

  Mesh take() {
    mesh_.finalize();
    return std::move(mesh_);
  }

 private:
  bool oversized(int t, const std::function<double(const Vec2&)>& sizing) const {
    const auto& tri = mesh_.triangles[t];
    const Vec2 c = (mesh_.vertices[tri[0]] + mesh_.vertices[tri[1]] +
                    mesh_.vertices[tri[2]]) / 3.0;
    double longest = 0.0;
    for (int k = 0; k < 3; ++k)
      longest = std::max(longest,
                         norm(mesh_.vertices[tri[(k + 1) % 3]] - mesh_.vertices[tri[k]]));
    return longest > sizing(c) * 1.000001;
  }

  void rebuild_edge_map() {
    edge_tris_.clear();
    edge_tris_.reserve(mesh_.triangles.size() * 2);
    for (std::size_t t = 0; t < mesh_.triangles.size(); ++t)
      for (int k = 0; k < 3; ++k)
        register_edge(mesh_.triangles[t][k], mesh_.triangles[t][(k + 1) % 3],
                      static_cast<int>(t));
  }

  void register_edge(int a, int b, int t) {
    auto& slot = edge_tris_[detail::edge_key(a, b)];
    if (slot[0] == t || slot[1] == t) return;
    if (slot[0] == -1)
      slot[0] = t;
    else if (slot[1] == -1)
      slot[1] = t;
    else
      throw ConfigError("mesh: non-conforming edge during refinement");
  }

  void unregister_edge(int a, int b, int t) {
    auto it = edge_tris_.find(detail::edge_key(a, b));
    if (it == edge_tris_.end()) return;
    if (it->second[0] == t) it->second[0] = -1;
    if (it->second[1] == t) it->second[1] = -1;
    if (it->second[0] == -1 && it->second[1] == -1) edge_tris_.erase(it);
  }

  int neighbor_across(int a, int b, int t) const {
    auto it = edge_tris_.find(detail::edge_key(a, b));
    if (it == edge_tris_.end()) return -1;
    if (it->second[0] == t) return it->second[1];
    if (it->second[1] == t) return it->second[0];
    return -1;
  }

  // Splits triangle t across its refinement edge, first making the neighbor
  // compatible. One recursion level per incompatible neighbor; chains are
  // finite for longest-edge-rooted assignments.
  void bisect(int t, int depth) {
    if (depth > 4096)
      throw ConfigError("mesh: refinement compatibility recursion overflow");
    const auto tri = mesh_.triangles[t];
    const int p = tri[0], a = tri[1], b = tri[2];
    int n = neighbor_across(a, b, t);
    if (n >= 0) {
      const auto& ntri = mesh_.triangles[n];
      const auto nkey = detail::edge_key(ntri[1], ntri[2]);
      if (nkey != detail::edge_key(a, b)) {
        bisect(n, depth + 1);
        n = neighbor_across(a, b, t);
        if (n >= 0) {
          const auto& ntri2 = mesh_.triangles[n];
          if (detail::edge_key(ntri2[1], ntri2[2]) != detail::edge_key(a, b))
            throw ConfigError("mesh: refinement compatibility failed");
        }
      }
    }
    // Shared midpoint vertex.
    const int m = static_cast<int>(mesh_.vertices.size());
    mesh_.vertices.push_back((mesh_.vertices[a] + mesh_.vertices[b]) * 0.5);
    const bool bdry = (n < 0) && mesh_.boundary_vertex[a] && mesh_.boundary_vertex[b];
    mesh_.boundary_vertex.push_back(bdry ? 1 : 0);

    split_one(t, m);
    if (n >= 0) split_one(n, m);
  }

  // Replaces triangle t = (p; a, b) by children (m; p, a) and (m; b, p).
  void split_one(int t, int m) {
    const auto tri = mesh_.triangles[t];
    const int p = tri[0], a = tri[1], b = tri[2];
    unregister_edge(p, a, t);
    unregister_edge(a, b, t);
    unregister_edge(b, p, t);
    const int t2 = static_cast<int>(mesh_.triangles.size());
    mesh_.triangles[t] = {m, p, a};
    mesh_.triangles.push_back({m, b, p});
    mesh_.region_tag.push_back(mesh_.region_tag[t]);
    register_edge(m, p, t);
    register_edge(p, a, t);
    register_edge(a, m, t);
    register_edge(m, b, t2);
    register_edge(b, p, t2);
    register_edge(p, m, t2);
  }

  Mesh mesh_;
  struct EdgeSlot {
    std::array<int, 2> data{-1, -1};
    int& operator[](int i) { return data[i]; }
    int operator[](int i) const { return data[i]; }
  };
  std::unordered_map<std::uint64_t, EdgeSlot> edge_tris_;
};

// ---------------------------------------------------------------------------
// Interface cut/snap. Given a closed curve (a placed shape boundary), vertices
// very close to the curve are snapped onto it, edges crossing it gain a cut
// vertex at the crossing, and crossed triangles are split so the curve is
// resolved by element edges. Afterwards triangles are retagged by centroid
// classification.
// ---------------------------------------------------------------------------
namespace detail {

// Nearest point on a closed polyline.
inline Vec2 closest_on_polyline(const std::vector<Vec2>& poly, const Vec2& p,
                                double* dist_out = nullptr) {
  double best = std::numeric_limits<double>::max();
  Vec2 best_q = p;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % poly.size()];
    const Vec2 e = b - a;
    const double len2 = norm_sq(e);
    const double t = len2 > 0.0 ? std::clamp(dot(p - a, e) / len2, 0.0, 1.0) : 0.0;
    const Vec2 q = a + t * e;
    const double d = norm(p - q);
    if (d < best) {
      best = d;
      best_q = q;
    }
  }
  if (dist_out) *dist_out = best;
  return best_q;
}

// First intersection of segment [p,q] with the closed polyline, as a parameter
// along [p,q]; nullopt if none.
inline std::optional<double> segment_curve_intersection(const std::vector<Vec2>& poly,
                                                        const Vec2& p, const Vec2& q) {
  double best = std::numeric_limits<double>::max();
  const Vec2 d = q - p;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % poly.size()];
    const Vec2 e = b - a;
    const double denom = cross(d, e);
    if (std::abs(denom) < 1e-300) continue;
    const double t = cross(a - p, e) / denom;
    const double s = cross(a - p, d) / denom;
    if (t >= -1e-12 && t <= 1.0 + 1e-12 && s >= -1e-9 && s <= 1.0 + 1e-9)
      best = std::min(best, std::clamp(t, 0.0, 1.0));
  }
  if (best == std::numeric_limits<double>::max()) return std::nullopt;
  return best;
}

}  // namespace detail

// Cuts the mesh along the boundary of `curve_shape`. The mesh must already be
// fine enough that the curve does not traverse a triangle more than once.
inline Mesh cut_along_interface(const Mesh& mesh, const PlacedShape& curve_shape) {
  const auto poly = curve_shape.boundary_polyline(4096);

  Mesh out;
  out.vertices = mesh.vertices;
  out.boundary_vertex = mesh.boundary_vertex;
  out.outer = mesh.outer;

  // Minimum incident edge length per vertex: snap radius is a fraction of it.
  std::vector<double> min_edge(mesh.vertices.size(),
                               std::numeric_limits<double>::max());
  for (const auto& tri : mesh.triangles)
    for (int k = 0; k < 3; ++k) {
      const int a = tri[k], b = tri[(k + 1) % 3];
      const double len = norm(mesh.vertices[a] - mesh.vertices[b]);
      min_edge[a] = std::min(min_edge[a], len);
      min_edge[b] = std::min(min_edge[b], len);
    }

  // Pass 1: snap near-curve vertices onto the curve. Outer-boundary vertices
  // are never moved (the perturbation is strictly interior by precondition).
  // The curve lies in the annulus [scale*rho_min, scale*rho_max] around the
  // shape center, which gives a cheap reject before the O(samples) search.
  const double rho_min_s = curve_shape.scale * curve_shape.shape.min_radius();
  const double rho_max_s = curve_shape.scale * curve_shape.shape.max_radius();
  std::vector<std::uint8_t> on_curve(mesh.vertices.size(), 0);
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    if (mesh.boundary_vertex[v]) continue;
    const double snap_radius = 0.2 * min_edge[v];
    const double r = norm(mesh.vertices[v] - curve_shape.center);
    if (std::max(r - rho_max_s, rho_min_s - r) > snap_radius) continue;
    double dist = 0.0;
    const Vec2 q = detail::closest_on_polyline(poly, mesh.vertices[v], &dist);
    if (dist <= snap_radius) {
      out.vertices[v] = q;
      on_curve[v] = 1;
    }
  }

  // Pass 2: cut vertices on crossing edges. An edge crosses when its
  // endpoints are strictly on opposite sides and neither lies on the curve.
  auto side = [&](int v) -> int {
    if (on_curve[v]) return 0;
    return curve_shape.contains(out.vertices[v]) ? 1 : -1;
  };
  std::unordered_map<std::uint64_t, int> cut_vertex;
  // Deterministic order: iterate triangles, then local edges.
  for (const auto& tri : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      const int a = tri[k], b = tri[(k + 1) % 3];
      const auto key = detail::edge_key(a, b);
      if (cut_vertex.count(key)) continue;
      if (side(a) * side(b) >= 0) continue;
      const auto t = detail::segment_curve_intersection(poly, out.vertices[a],
                                                        out.vertices[b]);
      double tc = t.value_or(0.5);
      tc = std::clamp(tc, 0.05, 0.95);  // keep children non-degenerate
      const int idx = static_cast<int>(out.vertices.size());
      out.vertices.push_back(out.vertices[a] + tc * (out.vertices[b] - out.vertices[a]));
      out.boundary_vertex.push_back(0);
      cut_vertex.emplace(key, idx);
    }
  }

  // Pass 3: rebuild triangles.
  auto emit = [&](int i, int j, int k) {
    // Orientation is fixed in finalize(); just avoid degenerate duplicates.
    out.triangles.push_back({i, j, k});
    out.region_tag.push_back(RegionTag::matrix_complement);  // retagged below
  };
  for (const auto& tri : mesh.triangles) {
    std::array<int, 3> cut{};
    int ncut = 0;
    for (int k = 0; k < 3; ++k) {
      auto it = cut_vertex.find(detail::edge_key(tri[k], tri[(k + 1) % 3]));
      cut[k] = (it == cut_vertex.end()) ? -1 : it->second;
      if (cut[k] >= 0) ++ncut;
    }
    if (ncut == 0) {
      emit(tri[0], tri[1], tri[2]);
    } else if (ncut == 1) {
      // Curve enters through one edge and leaves through a vertex (snapped).
      for (int k = 0; k < 3; ++k) {
        if (cut[k] < 0) continue;
        const int a = tri[k], b = tri[(k + 1) % 3], c = tri[(k + 2) % 3], m = cut[k];
        emit(a, m, c);
        emit(m, b, c);
      }
    } else if (ncut == 2) {
      // Generic crossing: apex triangle plus a quad split along its shorter
      // diagonal (tie broken toward the first diagonal for determinism).
      int ke = -1;  // the uncut edge
      for (int k = 0; k < 3; ++k)
        if (cut[k] < 0) ke = k;
      const int a = tri[ke], b = tri[(ke + 1) % 3], c = tri[(ke + 2) % 3];
      const int mbc = cut[(ke + 1) % 3];  // on edge (b, c)
      const int mca = cut[(ke + 2) % 3];  // on edge (c, a)
      emit(c, mca, mbc);
      // Quad a, b, mbc, mca.
      const double d1 = norm(out.vertices[a] - out.vertices[mbc]);
      const double d2 = norm(out.vertices[b] - out.vertices[mca]);
      if (d1 <= d2) {
        emit(a, b, mbc);
        emit(a, mbc, mca);
      } else {
        emit(a, b, mca);
        emit(b, mbc, mca);
      }
    } else {
      // Curve clips all three edges: fall back to a midpoint-style split; the
      // centroid classification below keeps the tags consistent.
      const int a = tri[0], b = tri[1], c = tri[2];
      const int mab = cut[0], mbc = cut[1], mca = cut[2];
      emit(a, mab, mca);
      emit(mab, b, mbc);
      emit(mca, mbc, c);
      emit(mab, mbc, mca);
    }
  }
  out.finalize();
  return out;
}

// ---------------------------------------------------------------------------
// Structured hold-all mesh with optional fixed subdomain Omega and optional
// perturbation omega_eps(z): uniform union-jack grid, NVB refinement toward
// the interfaces, interface cut/snap, then centroid retagging.
// ---------------------------------------------------------------------------
struct HoldallSpec {
  Rect domain;
  double h = 0.05;                       // base mesh size
  std::optional<PlacedShape> omega;      // fixed subdomain Omega (scale 1)
  std::optional<PlacedShape> perturbation;  // omega_eps(z)
  double interface_factor = 3.0;         // refine to h/this near the Omega curve
  double perturbation_factor = 8.0;      // elements across the perturbation radius
  double grading_slope = 0.6;            // size growth per unit distance
};

inline Mesh structured_grid(const Rect& d, double h) {
  d.validate();
  if (!(h > 0.0)) throw ConfigError("mesh: grid size must be positive");
  const int nx = std::max(1, static_cast<int>(std::ceil(d.width() / h - 1e-9)));
  const int ny = std::max(1, static_cast<int>(std::ceil(d.height() / h - 1e-9)));
  Mesh mesh;
  mesh.outer.kind = OuterBoundary::Kind::rectangle;
  mesh.outer.rect = d;
  mesh.vertices.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      mesh.vertices.push_back(Vec2{d.x0 + d.width() * i / nx, d.y0 + d.height() * j / ny});
      mesh.boundary_vertex.push_back((i == 0 || i == nx || j == 0 || j == ny) ? 1 : 0);
    }
  auto vid = [&](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int v00 = vid(i, j), v10 = vid(i + 1, j), v01 = vid(i, j + 1),
                v11 = vid(i + 1, j + 1);
      // Union-jack diagonals; peak-first storage puts the right angle at the
      // peak so the NVB refinement edge (v1, v2) is the hypotenuse.
      if ((i + j) % 2 == 0) {
        mesh.triangles.push_back({v10, v11, v00});
        mesh.triangles.push_back({v01, v00, v11});
      } else {
        mesh.triangles.push_back({v11, v01, v10});
        mesh.triangles.push_back({v00, v10, v01});
      }
      mesh.region_tag.push_back(RegionTag::matrix_complement);
      mesh.region_tag.push_back(RegionTag::matrix_complement);
    }
  mesh.finalize();
  return mesh;
}

// Approximate distance from x to the boundary of a placed star-shaped shape,
// measured radially from the shape center. Adequate for sizing functions.
inline double radial_distance_to_boundary(const PlacedShape& s, const Vec2& x) {
  const Vec2 rel = (x - s.center) / s.scale;
  const double r = norm(rel);
  if (r < 1e-14) return s.scale * s.shape.min_radius();
  const double rho = s.shape.radial(std::atan2(rel.y, rel.x));
  return s.scale * std::abs(r - rho);
}

inline void check_holdall_preconditions(const HoldallSpec& spec) {
  spec.domain.validate();
  if (spec.omega) {
    if (shape_rect_gap(*spec.omega, spec.domain) <= 1e-12)
      throw ConfigError("mesh: subdomain Omega must lie strictly inside the hold-all");
  }
  if (spec.perturbation) {
    const auto& pert = *spec.perturbation;
    if (shape_rect_gap(pert, spec.domain) <= 1e-12)
      throw ConfigError("mesh: perturbation must lie strictly inside the hold-all");
    if (spec.omega) {
      const bool center_inside = spec.omega->contains(pert.center);
      if (center_inside) {
        // Removal branch: the perturbation must sit strictly inside Omega.
        const auto& om = *spec.omega;
        if (pert.shape.kind() == InclusionShape::Kind::disk &&
            om.shape.kind() == InclusionShape::Kind::disk) {
          const double inner_gap = om.scale * om.shape.disk_radius() -
                                   norm(pert.center - om.center) -
                                   pert.scale * pert.shape.disk_radius();
          if (inner_gap <= 1e-12)
            throw ConfigError("mesh: perturbation touches the Omega interface");
        } else {
          for (const auto& p : pert.boundary_polyline())
            if (!om.contains(p))
              throw ConfigError(
                  "mesh: perturbation must lie strictly inside Omega or "
                  "strictly outside it");
          if (polyline_min_distance(pert.boundary_polyline(),
                                    om.boundary_polyline()) <= 1e-12)
            throw ConfigError("mesh: perturbation touches the Omega interface");
        }
      } else {
        if (shape_gap(pert, *spec.omega) <= 1e-12)
          throw ConfigError("mesh: perturbation touches the Omega interface");
      }
    }
  }
}

inline Mesh generate_holdall_mesh(const HoldallSpec& spec) {
  check_holdall_preconditions(spec);
  Mesh grid = structured_grid(spec.domain, spec.h);

  const bool refine = spec.omega.has_value() || spec.perturbation.has_value();
  if (refine) {
    auto sizing = [&spec](const Vec2& x) {
      double s = spec.h;
      if (spec.omega) {
        const double d = radial_distance_to_boundary(*spec.omega, x);
        s = std::min(s, std::max(spec.h / spec.interface_factor,
                                 spec.grading_slope * d));
      }
      if (spec.perturbation) {
        const auto& p = *spec.perturbation;
        const double h_min =
            p.scale * p.shape.max_radius() / spec.perturbation_factor;
        const double d_out = norm(x - p.center) - p.bounding_radius();
        s = std::min(s, std::max(h_min, spec.grading_slope * std::max(0.0, d_out)));
      }
      return s;
    };
    NvbRefiner refiner(std::move(grid));
    refiner.refine_to_sizing(sizing);
    grid = refiner.take();
  }

  if (spec.omega) grid = cut_along_interface(grid, *spec.omega);
  if (spec.perturbation) grid = cut_along_interface(grid, *spec.perturbation);

  // Retag by centroid classification.
  for (int t = 0; t < grid.num_triangles(); ++t) {
    const Vec2 c = grid.centroid(t);
    if (spec.perturbation && spec.perturbation->contains(c))
      grid.region_tag[t] = RegionTag::inclusion;
    else if (spec.omega && spec.omega->contains(c))
      grid.region_tag[t] = RegionTag::matrix_omega;
    else
      grid.region_tag[t] = RegionTag::matrix_complement;
  }
  grid.finalize();
  return grid;
}

// ---------------------------------------------------------------------------
// Graded ring mesh on the truncation disk B_R around a reference inclusion.
// ---------------------------------------------------------------------------
struct DiskMeshSpec {
  InclusionShape shape = InclusionShape::disk(1.0);
  double radius = 50.0;   // truncation radius R
  double h_near = 0.0;    // defaults to diam(omega)/50
  double h_far = 0.0;     // defaults to R/25
};

namespace detail {

// One ring level: sorted angles plus the corresponding vertex indices.
struct RingLevel {
  std::vector<double> angles;
  std::vector<int> vertex;
};

// Triangulates the annular strip between an inner and an outer ring. When the
// rings share the same angle list, quads are split with parity-alternating
// diagonals (preserves the dihedral symmetry of disk meshes); otherwise the
// two angle lists are merged zipper-style.
inline void connect_rings(const RingLevel& inner, const RingLevel& outer,
                          std::vector<std::array<int, 3>>& tris) {
  const std::size_t ni = inner.angles.size(), no = outer.angles.size();
  bool same = ni == no;
  if (same)
    for (std::size_t k = 0; k < ni; ++k)
      if (std::abs(inner.angles[k] - outer.angles[k]) > 1e-12) {
        same = false;
        break;
      }
  if (same) {
    for (std::size_t k = 0; k < ni; ++k) {
      const std::size_t k1 = (k + 1) % ni;
      const int a = inner.vertex[k], b = inner.vertex[k1];
      const int c = outer.vertex[k1], d = outer.vertex[k];
      if (k % 2 == 0) {
        tris.push_back({a, b, c});
        tris.push_back({a, c, d});
      } else {
        tris.push_back({a, b, d});
        tris.push_back({b, c, d});
      }
    }
    return;
  }
  // Zipper merge by angle; both lists are sorted in [0, 2pi).
  std::size_t i = 0, j = 0;
  auto next_angle = [](const RingLevel& r, std::size_t k) {
    return k + 1 < r.angles.size() ? r.angles[k + 1]
                                   : r.angles[0] + 2.0 * std::numbers::pi;
  };
  while (i < ni || j < no) {
    const bool inner_done = i >= ni;
    const bool outer_done = j >= no;
    const double ai = inner_done ? std::numeric_limits<double>::max()
                                 : next_angle(inner, i);
    const double aj = outer_done ? std::numeric_limits<double>::max()
                                 : next_angle(outer, j);
    if (!inner_done && (outer_done || ai <= aj)) {
      tris.push_back({inner.vertex[i % ni], inner.vertex[(i + 1) % ni],
                      outer.vertex[j % no]});
      ++i;
    } else {
      tris.push_back({inner.vertex[i % ni], outer.vertex[(j + 1) % no],
                      outer.vertex[j % no]});
      ++j;
    }
  }
}

// Thins an angle list by dropping every second entry while keeping mandatory
// angles (polygon corners).
inline std::vector<double> halve_angles(const std::vector<double>& angles,
                                        const std::vector<double>& keep) {
  std::vector<double> out;
  for (std::size_t k = 0; k < angles.size(); ++k) {
    bool mandatory = false;
    for (double a : keep)
      if (std::abs(angles[k] - a) < 1e-12) mandatory = true;
    if (mandatory || k % 2 == 0) out.push_back(angles[k]);
  }
  return out;
}

}  // namespace detail

inline Mesh generate_disk_mesh(const DiskMeshSpec& spec) {
  const InclusionShape& omega = spec.shape;
  const double R = spec.radius;
  const double rho_max = omega.max_radius();
  const double rho_min = omega.min_radius();
  if (!(R > 0.0)) throw ConfigError("mesh: truncation radius must be positive");
  if (rho_max > R / 4.0)
    throw ConfigError("mesh: inclusion must fit in the disk of radius R/4");
  const double diam_hint = 2.0 * rho_max;
  const double h_near = spec.h_near > 0.0 ? spec.h_near : diam_hint / 50.0;
  const double h_far = spec.h_far > 0.0 ? spec.h_far : R / 25.0;
  if (h_far < h_near)
    throw ConfigError("mesh: far mesh size must be at least the near size");
  if (h_far > R)
    throw ConfigError("mesh: far mesh size exceeds the truncation radius");

  Mesh mesh;
  mesh.outer.kind = OuterBoundary::Kind::circle;
  mesh.outer.circle_radius = R;

  // Base angle set: uniform, multiple of 4 (so the parity diagonal pattern is
  // symmetric under both axis reflections), plus polygon corner angles.
  int n_uniform = std::max(8, static_cast<int>(
      std::ceil(2.0 * std::numbers::pi * rho_max / h_near)));
  n_uniform = ((n_uniform + 3) / 4) * 4;
  std::vector<double> corner;
  for (double a : omega.corner_angles())
    corner.push_back(a < 0.0 ? a + 2.0 * std::numbers::pi : a);
  std::vector<double> base_angles;
  for (int k = 0; k < n_uniform; ++k)
    base_angles.push_back(2.0 * std::numbers::pi * k / n_uniform);
  for (double a : corner) base_angles.push_back(a);
  std::sort(base_angles.begin(), base_angles.end());
  base_angles.erase(std::unique(base_angles.begin(), base_angles.end(),
                                [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                    base_angles.end());

  auto make_ring = [&](const std::vector<double>& angles, auto&& radius_fn,
                       bool boundary) {
    detail::RingLevel ring;
    ring.angles = angles;
    for (double a : angles) {
      const double r = radius_fn(a);
      ring.vertex.push_back(static_cast<int>(mesh.vertices.size()));
      mesh.vertices.push_back(Vec2{r * std::cos(a), r * std::sin(a)});
      mesh.boundary_vertex.push_back(boundary ? 1 : 0);
    }
    return ring;
  };

  std::vector<std::array<int, 3>> incl_tris, outer_tris;

  // --- Boundary ring of the inclusion (level 0, shared). ---
  detail::RingLevel ring0 =
      make_ring(base_angles, [&](double a) { return omega.radial(a); }, false);

  // --- Inward levels: fractions tau of the way to the origin. ---
  {
    const double rho_bar = 0.5 * (rho_min + rho_max);
    std::vector<double> dist{0.0};
    double h = h_near;
    while (true) {
      const double next = dist.back() + h;
      const double remaining = rho_bar - next;
      if (remaining <= std::max(1.5 * h, 0.05 * rho_bar)) break;
      dist.push_back(next);
      h = h_near + 0.7 * next;
    }
    detail::RingLevel prev = ring0;
    for (std::size_t lev = 1; lev < dist.size(); ++lev) {
      const double tau = dist[lev] / rho_bar;
      std::vector<double> angles = prev.angles;
      // Thin the ring when chords get much shorter than the local spacing.
      const double r_here = (1.0 - tau) * rho_bar;
      const double h_here = h_near + 0.7 * dist[lev];
      while (angles.size() > 12 &&
             2.0 * std::numbers::pi * r_here / angles.size() < 0.45 * h_here)
        angles = detail::halve_angles(angles, corner);
      detail::RingLevel ring = make_ring(
          angles, [&](double a) { return (1.0 - tau) * omega.radial(a); }, false);
      detail::connect_rings(ring, prev, incl_tris);
      prev = ring;
    }
    // Central fan.
    const int center = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(Vec2{0.0, 0.0});
    mesh.boundary_vertex.push_back(0);
    const std::size_t n = prev.vertex.size();
    for (std::size_t k = 0; k < n; ++k)
      incl_tris.push_back({center, prev.vertex[k], prev.vertex[(k + 1) % n]});
  }

  // --- Outward levels: graded distances from the inclusion boundary to R. ---
  {
    const double span = R - rho_max;
    const double slope = (h_far - h_near) / std::max(span, 1e-12);
    std::vector<double> dist{0.0};
    while (dist.back() < span) {
      const double h = h_near + slope * dist.back();
      dist.push_back(dist.back() + h);
    }
    // Rescale so the final level lands exactly on R in every direction.
    const double scale = span / dist.back();
    for (double& d : dist) d *= scale;
    dist.back() = span;

    detail::RingLevel prev = ring0;
    for (std::size_t lev = 1; lev < dist.size(); ++lev) {
      const double t = dist[lev] / span;  // in (0, 1]
      const bool last = lev + 1 == dist.size();
      std::vector<double> angles = prev.angles;
      const double r_here = rho_max + dist[lev];
      const double h_here = h_near + slope * dist[lev];
      while (angles.size() > 12 &&
             4.0 * std::numbers::pi * r_here / angles.size() <= 1.2 * h_here)
        angles = detail::halve_angles(angles, corner);
      detail::RingLevel ring = make_ring(
          angles,
          [&](double a) {
            if (last) return R;
            const double rho = omega.radial(a);
            return rho + t * (R - rho);
          },
          last);
      detail::connect_rings(prev, ring, outer_tris);
      prev = ring;
    }
  }

  for (const auto& t : incl_tris) {
    mesh.triangles.push_back(t);
    mesh.region_tag.push_back(RegionTag::inclusion);
  }
  for (const auto& t : outer_tris) {
    mesh.triangles.push_back(t);
    mesh.region_tag.push_back(RegionTag::matrix_complement);
  }
  mesh.finalize();
  return mesh;
}

}  // namespace tdt
