#pragma once

// Exterior corrector problems on the truncation disk B_R. All three live on
// the same graded ring mesh and share the two-phase dispatch (phase 1 inside
// the reference inclusion omega, phase 2 outside):
//
//   K:  int (a(grad K + U0) - a(U0)) . grad phi
//          = -int_omega (a1(U0) - a2(U0)) . grad phi        (nonlinear)
//   Qt: int da(U0)(grad phi) . grad Qt
//          = -int_omega (da1(U0) - da2(U0))(grad phi) . P0  (transposed linear)
//   Q:  int [S da(s grad K + U0) ds](grad phi) . grad Q
//          = -int ([S da(s grad K + U0) ds] - da(U0))(grad phi) . P0
//            -int_omega (da1(U0) - da2(U0))(grad phi) . P0
//            - b int grad K . grad phi                       (transposed linear)
//
// with homogeneous Dirichlet data on the outer circle |x| = R. The Qt and Q
// systems carry the unknown on the Jacobian output leg, so their matrices are
// the transposes of the assembled tangents.

#include <array>
#include <cmath>
#include <memory>
#include <vector>

#include "tdt/materials.hpp"
#include "tdt/mesh.hpp"
#include "tdt/pde.hpp"

namespace tdt {

struct CorrectorSettings {
  InclusionShape shape = InclusionShape::disk(1.0);
  double radius = 50.0;
  double h_near = 0.0;  // 0 = diam(omega)/50
  double h_far = 0.0;   // 0 = R/25
  NewtonOptions newton;
};

struct CorrectorDomain {
  std::shared_ptr<const Mesh> mesh;
  double omega_area = 0.0;  // exact continuum |omega|
};

inline CorrectorDomain make_corrector_domain(const CorrectorSettings& s) {
  DiskMeshSpec spec;
  spec.shape = s.shape;
  spec.radius = s.radius;
  spec.h_near = s.h_near;
  spec.h_far = s.h_far;
  CorrectorDomain d;
  d.mesh = std::make_shared<const Mesh>(generate_disk_mesh(spec));
  d.omega_area = s.shape.area();
  return d;
}

struct CorrectorResult {
  std::shared_ptr<const Mesh> mesh;
  FeField field;
  Vec2 U0{}, P0{};
  double omega_area = 0.0;
  double grad_energy = 0.0;       // int_{B_R} |grad field|^2
  Vec2 inclusion_mean_grad{};     // (1/|omega|) int_omega grad field
};

inline double grad_energy_of(const Mesh& mesh, const std::vector<double>& values) {
  double e = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t)
    e += mesh.element(t).area * norm_sq(element_gradient(mesh, values, t));
  return e;
}

inline Vec2 inclusion_gradient_integral(const Mesh& mesh,
                                        const std::vector<double>& values) {
  Vec2 s{0.0, 0.0};
  for (int t = 0; t < mesh.num_triangles(); ++t)
    if (mesh.region_tag[t] == RegionTag::inclusion)
      s += element_gradient(mesh, values, t) * mesh.element(t).area;
  return s;
}

namespace detail {

inline CorrectorResult finish_corrector(const CorrectorDomain& domain, FeField field,
                                        const Vec2& U0, const Vec2& P0) {
  CorrectorResult r;
  r.mesh = domain.mesh;
  r.U0 = U0;
  r.P0 = P0;
  r.omega_area = domain.omega_area;
  r.grad_energy = grad_energy_of(*domain.mesh, field.values);
  r.inclusion_mean_grad =
      inclusion_gradient_integral(*domain.mesh, field.values) / domain.omega_area;
  r.field = std::move(field);
  return r;
}

}  // namespace detail

// Nonlinear corrector K for background gradient U0.
inline CorrectorResult solve_K(const TwoPhaseMaterial& m, const Vec2& U0,
                               const CorrectorDomain& domain,
                               const NewtonOptions& opts = {},
                               NewtonReport* report = nullptr) {
  const Mesh& mesh = *domain.mesh;
  const PhaseMapping pm = PhaseMapping::standard(m);
  // residual(K) = int (a(gK + U0)).grad phi - load, with
  // load = int a(U0).grad phi - int_omega (a1(U0) - a2(U0)).grad phi.
  std::vector<double> load =
      assemble_flux_divergence(mesh, pm, std::vector<double>(mesh.num_vertices(), 0.0),
                               U0);
  const Vec2 jump = phase1(m).value(U0) - phase2(m).value(U0);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (mesh.region_tag[t] != RegionTag::inclusion) continue;
    const auto& tri = mesh.triangles[t];
    const auto& g = mesh.element(t);
    for (int k = 0; k < 3; ++k)
      load[tri[k]] -= g.area * dot(jump, g.grad[k]);
  }
  FeField k = newton_solve(domain.mesh, pm, load, opts, report, nullptr, U0);
  return detail::finish_corrector(domain, std::move(k), U0, Vec2{0.0, 0.0});
}

// Linear corrector-adjoint Qt (frozen Jacobians at U0).
inline CorrectorResult solve_Qtilde(const TwoPhaseMaterial& m, const Vec2& U0,
                                    const Vec2& P0, const CorrectorDomain& domain) {
  const Mesh& mesh = *domain.mesh;
  const PhaseMapping pm = PhaseMapping::standard(m);
  FeField q = make_zero_field(domain.mesh);
  SparseMatrix tangent = assemble_tangent(mesh, pm, q.values, q.dirichlet_mask, U0);
  const Mat2 djump = phase1(m).jacobian(U0) - phase2(m).jacobian(U0);
  std::vector<double> rhs(mesh.num_vertices(), 0.0);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (mesh.region_tag[t] != RegionTag::inclusion) continue;
    const auto& tri = mesh.triangles[t];
    const auto& g = mesh.element(t);
    for (int k = 0; k < 3; ++k)
      rhs[tri[k]] -= g.area * dot(djump.apply(g.grad[k]), P0);
  }
  zero_masked_rows(q.dirichlet_mask, rhs);
  q.values = tangent.solve(rhs, /*transpose=*/true);
  return detail::finish_corrector(domain, std::move(q), U0, P0);
}

// Averaged corrector-adjoint Q along the path s -> s grad K + U0. The cost's
// gradient weight b contributes the grad K term; the L2 weight drops out in
// the limit (the rescaled difference vanishes weakly in L2).
inline CorrectorResult solve_Q(const TwoPhaseMaterial& m, const Vec2& U0,
                               const Vec2& P0, const CorrectorResult& K,
                               const CostWeights& w, const CorrectorDomain& domain) {
  const Mesh& mesh = *domain.mesh;
  if (K.mesh.get() != domain.mesh.get())
    throw std::logic_error("corrector: K field lives on a different mesh");
  const PhaseMapping pm = PhaseMapping::standard(m);
  FeField q = make_zero_field(domain.mesh);

  // Per-element s-averaged Jacobians.
  std::vector<Mat2> avg_jac(mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const Vec2 gk = element_gradient(mesh, K.field.values, t);
    const FluxFunction& law = pm.of(mesh.region_tag[t]);
    Mat2 jac{};
    for (int qd = 0; qd < 5; ++qd)
      jac += law.jacobian(U0 + kGauss5Nodes[qd] * gk) * kGauss5Weights[qd];
    avg_jac[t] = jac;
  }
  SparseMatrix avg = assemble_matrix_from(mesh, q.dirichlet_mask,
                                          [&](int t) { return avg_jac[t]; });

  const Mat2 djump = phase1(m).jacobian(U0) - phase2(m).jacobian(U0);
  std::vector<double> rhs(mesh.num_vertices(), 0.0);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const auto& g = mesh.element(t);
    const Mat2 dev = avg_jac[t] - pm.of(mesh.region_tag[t]).jacobian(U0);
    const Vec2 gk = element_gradient(mesh, K.field.values, t);
    const bool incl = mesh.region_tag[t] == RegionTag::inclusion;
    for (int k = 0; k < 3; ++k) {
      double v = dot(dev.apply(g.grad[k]), P0);
      if (incl) v += dot(djump.apply(g.grad[k]), P0);
      if (w.b != 0.0) v += w.b * dot(gk, g.grad[k]);
      rhs[tri[k]] -= g.area * v;
    }
  }
  zero_masked_rows(q.dirichlet_mask, rhs);
  q.values = avg.solve(rhs, /*transpose=*/true);
  return detail::finish_corrector(domain, std::move(q), U0, P0);
}

// Polarization matrix M with columns M e_j = int_omega grad Qt^{(j)}, where
// Qt^{(j)} is the corrector-adjoint for P0 = e_j. The Qt problem is linear in
// P0, so these two solves characterize the whole map P0 -> int_omega grad Qt.
inline Mat2 polarization_matrix(const TwoPhaseMaterial& m, const Vec2& U0,
                                const CorrectorDomain& domain) {
  const CorrectorResult qx = solve_Qtilde(m, U0, Vec2{1.0, 0.0}, domain);
  const CorrectorResult qy = solve_Qtilde(m, U0, Vec2{0.0, 1.0}, domain);
  const Vec2 cx = inclusion_gradient_integral(*domain.mesh, qx.field.values);
  const Vec2 cy = inclusion_gradient_integral(*domain.mesh, qy.field.values);
  return Mat2{cx.x, cy.x, cx.y, cy.y};
}

// Truncation study: re-solves K on a fresh mesh for each radius and reports
// how the inclusion-averaged gradient settles.
struct TruncationRow {
  double radius = 0.0;
  double grad_energy = 0.0;
  Vec2 inclusion_mean_grad{};
  double cauchy_diff = 0.0;  // |mean - previous mean|, 0 for the first row
};

inline std::vector<TruncationRow> truncation_study(const TwoPhaseMaterial& m,
                                                   const Vec2& U0,
                                                   const CorrectorSettings& base,
                                                   const std::vector<double>& radii) {
  if (radii.size() < 2)
    throw ConfigError("corrector: truncation study needs at least two radii");
  const double diam = 2.0 * base.shape.max_radius();
  for (double r : radii)
    if (r < 4.0 * diam)
      throw ConfigError("corrector: truncation radii must be at least 4x the "
                        "inclusion diameter");
  std::vector<TruncationRow> rows;
  for (double r : radii) {
    CorrectorSettings s = base;
    s.radius = r;
    const CorrectorDomain domain = make_corrector_domain(s);
    const CorrectorResult k = solve_K(m, U0, domain, s.newton);
    TruncationRow row;
    row.radius = r;
    row.grad_energy = k.grad_energy;
    row.inclusion_mean_grad = k.inclusion_mean_grad;
    row.cauchy_diff =
        rows.empty() ? 0.0 : norm(k.inclusion_mean_grad - rows.back().inclusion_mean_grad);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace tdt
