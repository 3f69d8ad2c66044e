#pragma once

// Continuum geometry: the rectangular hold-all, inclusion shapes (disk or
// star-shaped polygon around the origin), and the predicates the mesh
// generators and precondition checks need. Areas here are *exact* continuum
// measures (pi r^2, shoelace); all topological-derivative scalings divide by
// these, never by mesh areas.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "tdt/common.hpp"

namespace tdt {

struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  bool contains(const Vec2& p) const {
    return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1;
  }
  // Distance from p to the rectangle boundary (p assumed inside).
  double interior_margin(const Vec2& p) const {
    return std::min(std::min(p.x - x0, x1 - p.x), std::min(p.y - y0, y1 - p.y));
  }
  void validate() const {
    if (!(x1 > x0) || !(y1 > y0))
      throw ConfigError("geometry: rectangle must have positive extent");
  }
};

inline double polygon_signed_area(const std::vector<Vec2>& pts) {
  double s = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec2& a = pts[i];
    const Vec2& b = pts[(i + 1) % pts.size()];
    s += cross(a, b);
  }
  return 0.5 * s;
}

// Even-odd point-in-polygon test; robust enough for centroid classification,
// where query points stay away from edges by construction.
inline bool point_in_polygon(const std::vector<Vec2>& pts, const Vec2& p) {
  bool inside = false;
  for (std::size_t i = 0, j = pts.size() - 1; i < pts.size(); j = i++) {
    const Vec2& a = pts[i];
    const Vec2& b = pts[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double t = (p.y - a.y) / (b.y - a.y);
      if (p.x < a.x + t * (b.x - a.x)) inside = !inside;
    }
  }
  return inside;
}

// Reference inclusion shape omega, described in its own coordinates with the
// origin strictly inside. Polygons must be star-shaped with respect to the
// origin (counter-clockwise orientation); the graded corrector mesh walks
// outward along rays from the origin and needs a single-valued radial
// function.
class InclusionShape {
 public:
  enum class Kind { disk, polygon };

  static InclusionShape disk(double radius) {
    if (!(radius > 0.0)) throw ConfigError("geometry: disk radius must be positive");
    InclusionShape s;
    s.kind_ = Kind::disk;
    s.radius_ = radius;
    return s;
  }

  static InclusionShape polygon(std::vector<Vec2> vertices) {
    if (vertices.size() < 3)
      throw ConfigError("geometry: polygon needs at least 3 vertices");
    InclusionShape s;
    s.kind_ = Kind::polygon;
    if (polygon_signed_area(vertices) < 0.0)
      std::reverse(vertices.begin(), vertices.end());
    s.poly_ = std::move(vertices);
    if (!point_in_polygon(s.poly_, Vec2{0.0, 0.0}))
      throw ConfigError("geometry: polygon inclusion must contain the origin");
    s.check_star_shaped();
    return s;
  }

  Kind kind() const { return kind_; }
  const std::vector<Vec2>& polygon_vertices() const { return poly_; }
  double disk_radius() const { return radius_; }

  // Exact continuum measure |omega|.
  double area() const {
    if (kind_ == Kind::disk) return std::numbers::pi * radius_ * radius_;
    return polygon_signed_area(poly_);
  }

  // Radial support function rho(theta): the boundary point along direction
  // theta is rho(theta) * (cos theta, sin theta).
  double radial(double theta) const {
    if (kind_ == Kind::disk) return radius_;
    const Vec2 dir{std::cos(theta), std::sin(theta)};
    double best = -1.0;
    for (std::size_t i = 0; i < poly_.size(); ++i) {
      const Vec2& a = poly_[i];
      const Vec2& b = poly_[(i + 1) % poly_.size()];
      // Solve origin + t*dir on segment a + s*(b-a), s in [0,1], t > 0.
      const Vec2 e = b - a;
      const double denom = cross(dir, e);
      if (std::abs(denom) < 1e-300) continue;
      const double t = cross(a, e) / denom;
      const double s = cross(a, dir) / denom;
      if (t > 0.0 && s >= -1e-12 && s <= 1.0 + 1e-12) best = std::max(best, t);
    }
    if (best <= 0.0)
      throw ConfigError("geometry: polygon radial function undefined (not star-shaped?)");
    return best;
  }

  double max_radius() const {
    if (kind_ == Kind::disk) return radius_;
    double r = 0.0;
    for (const auto& p : poly_) r = std::max(r, norm(p));
    return r;
  }

  double min_radius() const {
    if (kind_ == Kind::disk) return radius_;
    // Minimum distance from origin to the boundary polyline.
    double r = std::numeric_limits<double>::max();
    for (std::size_t i = 0; i < poly_.size(); ++i) {
      const Vec2& a = poly_[i];
      const Vec2& b = poly_[(i + 1) % poly_.size()];
      const Vec2 e = b - a;
      const double t = std::clamp(-dot(a, e) / norm_sq(e), 0.0, 1.0);
      r = std::min(r, norm(a + t * e));
    }
    return r;
  }

  bool contains(const Vec2& p) const {
    if (kind_ == Kind::disk) return norm_sq(p) < radius_ * radius_;
    return point_in_polygon(poly_, p);
  }

  // Angles of polygon corners, used so ring meshes sample corners exactly.
  std::vector<double> corner_angles() const {
    std::vector<double> out;
    if (kind_ == Kind::polygon)
      for (const auto& p : poly_) out.push_back(std::atan2(p.y, p.x));
    return out;
  }

 private:
  void check_star_shaped() const {
    // Star-shaped wrt the origin iff every edge subtends a positive-orientation
    // wedge as seen from the origin (CCW polygon assumed).
    for (std::size_t i = 0; i < poly_.size(); ++i) {
      const Vec2& a = poly_[i];
      const Vec2& b = poly_[(i + 1) % poly_.size()];
      if (cross(a, b) <= 0.0)
        throw ConfigError(
            "geometry: polygon inclusion must be star-shaped with respect to "
            "the origin");
    }
  }

  Kind kind_ = Kind::disk;
  double radius_ = 1.0;
  std::vector<Vec2> poly_;
};

// A placed instance of a shape: center z and scale eps; covers both the
// perturbation omega_eps(z) and the fixed subdomain Omega (scale 1).
struct PlacedShape {
  InclusionShape shape = InclusionShape::disk(1.0);
  Vec2 center{0.0, 0.0};
  double scale = 1.0;

  bool contains(const Vec2& p) const {
    return shape.contains((p - center) / scale);
  }
  double bounding_radius() const { return scale * shape.max_radius(); }
  double area() const { return scale * scale * shape.area(); }

  // Boundary polyline sampled densely enough for separation checks and for
  // cut/snap; polygon corners are always included.
  std::vector<Vec2> boundary_polyline(int min_samples = 256) const {
    std::vector<double> angles;
    for (int i = 0; i < min_samples; ++i)
      angles.push_back(2.0 * std::numbers::pi * i / min_samples);
    for (double a : shape.corner_angles()) angles.push_back(a);
    std::sort(angles.begin(), angles.end());
    angles.erase(std::unique(angles.begin(), angles.end(),
                             [](double a, double b) { return std::abs(a - b) < 1e-13; }),
                 angles.end());
    std::vector<Vec2> out;
    out.reserve(angles.size());
    for (double t : angles) {
      const double r = shape.radial(t) * scale;
      out.push_back(center + Vec2{r * std::cos(t), r * std::sin(t)});
    }
    return out;
  }
};

inline double polyline_min_distance(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
  double d = std::numeric_limits<double>::max();
  for (const auto& p : a)
    for (const auto& q : b) d = std::min(d, norm(p - q));
  return d;
}

// Strict separation of two placed shapes (positive gap). Disks are exact;
// other combinations use dense boundary sampling, which is adequate for the
// preconditions this library enforces.
inline double shape_gap(const PlacedShape& s1, const PlacedShape& s2) {
  if (s1.shape.kind() == InclusionShape::Kind::disk &&
      s2.shape.kind() == InclusionShape::Kind::disk) {
    return norm(s1.center - s2.center) - s1.scale * s1.shape.disk_radius() -
           s2.scale * s2.shape.disk_radius();
  }
  if (s1.contains(s2.center) || s2.contains(s1.center)) return -1.0;
  return polyline_min_distance(s1.boundary_polyline(), s2.boundary_polyline());
}

// Gap between a placed shape and the rectangle boundary (positive when the
// shape is strictly inside).
inline double shape_rect_gap(const PlacedShape& s, const Rect& d) {
  double g = std::numeric_limits<double>::max();
  for (const auto& p : s.boundary_polyline())
    g = std::min(g, d.contains(p) ? d.interior_margin(p) : -1.0);
  return g;
}

}  // namespace tdt
