#pragma once

// Verification studies tying the asymptotic expansion to computable finite
// differences: cost quotients against the topological derivative, the
// H1 convergence rate of the state difference, strong convergence of the
// rescaled difference toward the corrector K, and the nested-subspace
// projection diagnostic for the truncation of K.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "tdt/corrector.hpp"
#include "tdt/problem.hpp"
#include "tdt/topoderiv.hpp"

namespace tdt {

// One epsilon-indexed study; the columns that a study fills depend on its
// kind, the rest stay empty.
struct EpsStudy {
  std::vector<double> eps;
  std::vector<double> j_perturbed;
  std::vector<double> j_unperturbed;
  std::vector<double> quotient;
  std::vector<double> h1_diff;
  std::vector<double> keps_gap;
  double fitted_slope = std::numeric_limits<double>::quiet_NaN();
  double td_reference = std::numeric_limits<double>::quiet_NaN();
};

// Least-squares slope of log(y) against log(x).
inline double fit_loglog_slope(const std::vector<double>& x,
                               const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw ConfigError("asymptotics: slope fit needs at least two points");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0))
      throw ConfigError("asymptotics: slope fit needs positive data");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// (J(omega_eps) - J) / |omega_eps| with the exact measure
// |omega_eps| = eps^2 |omega|; both states solved on the same mesh with only
// the inclusion material toggled.
struct FdQuotient {
  double eps = 0.0;
  double j_perturbed = 0.0;
  double j_unperturbed = 0.0;
  double quotient = 0.0;
  bool insertion_branch = true;
};

inline FdQuotient fd_quotient(const ProblemData& data, const Vec2& z,
                              const InclusionShape& shape, double eps) {
  if (!(eps > 0.0)) throw ConfigError("asymptotics: eps must be positive");
  PlacedShape pert;
  pert.shape = shape;
  pert.center = z;
  pert.scale = eps;
  const StatePair pair = solve_state_pair(data, pert);
  FdQuotient q;
  q.eps = eps;
  q.j_perturbed = pair.j_perturbed;
  q.j_unperturbed = pair.j_unperturbed;
  q.insertion_branch = pair.insertion_branch;
  const double measure = eps * eps * shape.area();
  q.quotient = (pair.j_perturbed - pair.j_unperturbed) / measure;
  return q;
}

inline EpsStudy fd_study(const ProblemData& data, const Vec2& z,
                         const InclusionShape& shape,
                         const std::vector<double>& eps_list,
                         double td_reference) {
  EpsStudy study;
  study.td_reference = td_reference;
  for (double eps : eps_list) {
    const FdQuotient q = fd_quotient(data, z, shape, eps);
    study.eps.push_back(eps);
    study.j_perturbed.push_back(q.j_perturbed);
    study.j_unperturbed.push_back(q.j_unperturbed);
    study.quotient.push_back(q.quotient);
  }
  return study;
}

// H1 norm of u_eps - u0 over the hold-all, per epsilon, with the fitted
// log-log slope. The expected rate in two dimensions is eps^1.
inline EpsStudy rate_state_difference(const ProblemData& data, const Vec2& z,
                                      const InclusionShape& shape,
                                      const std::vector<double>& eps_list) {
  EpsStudy study;
  for (double eps : eps_list) {
    PlacedShape pert;
    pert.shape = shape;
    pert.center = z;
    pert.scale = eps;
    const StatePair pair = solve_state_pair(data, pert);
    study.eps.push_back(eps);
    study.j_perturbed.push_back(pair.j_perturbed);
    study.j_unperturbed.push_back(pair.j_unperturbed);
    study.h1_diff.push_back(
        norm_h1(field_difference(pair.u_perturbed, pair.u_unperturbed)));
  }
  study.fitted_slope = fit_loglog_slope(study.eps, study.h1_diff);
  return study;
}

// L2 gap between the rescaled discrete difference
//   grad K_eps(x) = grad(u_eps - u0)(z + eps x)
// and grad K, measured on the corrector mesh inside |x| <= comparison_radius.
// The quadrature lives on the corrector mesh: one point per element at the
// centroid for K_eps (the physical gradient is element-constant anyway) and
// the element value of grad K.
inline double keps_gap(const ProblemData& data, const Vec2& z,
                       const InclusionShape& shape, double eps,
                       const CorrectorResult& K, double comparison_radius) {
  if (!(comparison_radius > 0.0))
    throw ConfigError("asymptotics: comparison radius must be positive");
  // The comparison region scaled back to physical coordinates must stay
  // inside the hold-all.
  PlacedShape pert;
  pert.shape = shape;
  pert.center = z;
  pert.scale = eps;
  if (data.domain.interior_margin(z) <= eps * comparison_radius)
    throw ConfigError(
        "asymptotics: comparison region leaves the hold-all; reduce the "
        "comparison radius or eps");
  const StatePair pair = solve_state_pair(data, pert);
  const Mesh& cmesh = *K.mesh;
  const Mesh& pmesh = *pair.mesh;
  double gap2 = 0.0;
  for (int t = 0; t < cmesh.num_triangles(); ++t) {
    const Vec2 c = cmesh.centroid(t);
    if (norm(c) > comparison_radius) continue;
    const Vec2 phys = z + eps * c;
    const auto hit = pmesh.locate(phys);
    if (!hit)
      throw ConfigError("asymptotics: transfer point escaped the hold-all mesh");
    const Vec2 geps =
        element_gradient(pmesh, pair.u_perturbed.values, hit->first) -
        element_gradient(pmesh, pair.u_unperturbed.values, hit->first);
    const Vec2 gk = element_gradient(cmesh, K.field.values, t);
    gap2 += cmesh.element(t).area * norm_sq(geps - gk);
  }
  return std::sqrt(gap2);
}

inline EpsStudy keps_convergence(const ProblemData& data, const Vec2& z,
                                 const InclusionShape& shape,
                                 const std::vector<double>& eps_list,
                                 const CorrectorResult& K,
                                 double comparison_radius) {
  EpsStudy study;
  for (double eps : eps_list) {
    study.eps.push_back(eps);
    study.keps_gap.push_back(keps_gap(data, z, shape, eps, K, comparison_radius));
  }
  return study;
}

// ---------------------------------------------------------------------------
// Projection diagnostic. P_R(K) is the H1_0-projection of K onto the span of
// the corrector-mesh basis functions supported strictly inside |x| < R: the
// discrete realization of solving the Laplace projection on a smaller
// truncation ball. The subspaces are nested in R, so the energy gap
// |grad(P_R K - K)|_{L2} decreases monotonically, and at the mesh's own
// radius the projection is the identity up to solver tolerance.
// ---------------------------------------------------------------------------
struct ProjectionRow {
  double radius = 0.0;
  double grad_gap = 0.0;
};

inline std::vector<ProjectionRow> projection_diagnostic(
    const CorrectorResult& K, const std::vector<double>& radii) {
  const Mesh& mesh = *K.mesh;
  const int n = mesh.num_vertices();
  // Plain stiffness (no boundary treatment): S_ij = int grad phi_j . grad phi_i.
  std::vector<std::uint8_t> no_mask(n, 0);
  SparseMatrix S = assemble_matrix_from(mesh, no_mask,
                                        [](int) { return Mat2::identity(); });
  const std::vector<double> y = S.apply(K.field.values);

  std::vector<ProjectionRow> rows;
  for (double radius : radii) {
    if (!(radius > 0.0))
      throw ConfigError("asymptotics: projection radius must be positive");
    // Active set: vertices strictly inside the ball (the outer Dirichlet ring
    // is at |x| = R_mesh and stays excluded even for radius = R_mesh).
    std::vector<int> local(n, -1);
    std::vector<int> global;
    for (int v = 0; v < n; ++v) {
      if (norm(mesh.vertices[v]) < radius * (1.0 - 1e-12)) {
        local[v] = static_cast<int>(global.size());
        global.push_back(v);
      }
    }
    if (global.empty())
      throw ConfigError("asymptotics: projection radius captures no vertices");
    SparseMatrix S_sub(static_cast<int>(global.size()));
    S.for_each([&](int i, int j, double v) {
      if (local[i] >= 0 && local[j] >= 0) S_sub.add(local[i], local[j], v);
    });
    S_sub.finalize();
    std::vector<double> y_sub(global.size());
    for (std::size_t k = 0; k < global.size(); ++k) y_sub[k] = y[global[k]];
    const std::vector<double> p_sub = S_sub.solve(y_sub);
    std::vector<double> w(n, 0.0);
    for (std::size_t k = 0; k < global.size(); ++k) w[global[k]] = p_sub[k];
    for (int v = 0; v < n; ++v) w[v] -= K.field.values[v];
    const std::vector<double> sw = S.apply(w);
    double gap2 = 0.0;
    for (int v = 0; v < n; ++v) gap2 += w[v] * sw[v];
    rows.push_back({radius, std::sqrt(std::max(0.0, gap2))});
  }
  return rows;
}

}  // namespace tdt
