#pragma once

// P1 finite-element machinery for the quasi-linear state equation
//   div a(x, grad u) = -f  in D,  u = 0 on the outer boundary,
// its linearized (adjoint) problems, and the tracking cost
//   J(u) = a * int (u - u_d)^2 + b * int |grad(u - u_d)|^2.
//
// Conventions used throughout:
//   * Element gradients of P1 fields are constant per triangle; all integrals
//     of piecewise-polynomial integrands are exact (P1 mass matrix for loads
//     and L2 terms, one-point rule for gradient terms).
//   * Dirichlet handling: residual rows at masked vertices are zeroed and
//     system matrices get identity rows/columns there, so solution updates
//     leave the prescribed (zero) boundary values untouched.
//   * Adjoint-type systems are "test function on the Jacobian input leg",
//     i.e. the system matrix is the transpose of the assembled tangent.

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "tdt/common.hpp"
#include "tdt/materials.hpp"
#include "tdt/mesh.hpp"

namespace tdt {

struct CostWeights {
  double a = 0.0;
  double b = 1.0;

  void validate() const {
    if (a < 0.0 || b < 0.0 || (a == 0.0 && b == 0.0))
      throw ConfigError("cost weights must be nonnegative and not both zero");
  }
};

struct FeField {
  std::shared_ptr<const Mesh> mesh;
  std::vector<double> values;              // one per vertex
  std::vector<std::uint8_t> dirichlet_mask;  // 1 = value prescribed (zero here)

  int size() const { return static_cast<int>(values.size()); }
};

inline FeField make_zero_field(std::shared_ptr<const Mesh> mesh) {
  FeField f;
  f.values.assign(mesh->num_vertices(), 0.0);
  f.dirichlet_mask = mesh->boundary_vertex;
  f.mesh = std::move(mesh);
  return f;
}

template <typename Fn>
inline FeField interpolate(std::shared_ptr<const Mesh> mesh, Fn&& fn) {
  FeField f = make_zero_field(std::move(mesh));
  for (int v = 0; v < f.size(); ++v) f.values[v] = fn(f.mesh->vertices[v]);
  return f;
}

inline void require_same_mesh(const FeField& u, const FeField& v) {
  if (u.mesh.get() != v.mesh.get())
    throw std::logic_error("pde: fields live on different meshes");
}

inline Vec2 element_gradient(const Mesh& mesh, const std::vector<double>& values, int t) {
  const auto& tri = mesh.triangles[t];
  const auto& g = mesh.element(t);
  Vec2 grad{0.0, 0.0};
  for (int k = 0; k < 3; ++k) grad += values[tri[k]] * g.grad[k];
  return grad;
}

// Pointwise evaluation of a P1 field (barycentric interpolation).
inline double eval_field(const FeField& u, const Vec2& p) {
  const auto hit = u.mesh->locate(p);
  if (!hit) throw ConfigError("pde: evaluation point outside the mesh");
  const auto& [t, bc] = *hit;
  const auto& tri = u.mesh->triangles[t];
  return bc[0] * u.values[tri[0]] + bc[1] * u.values[tri[1]] + bc[2] * u.values[tri[2]];
}

// ---------------------------------------------------------------------------
// Region-to-material dispatch for one solve. `standard` is the unperturbed
// two-phase configuration; `perturbation` toggles the material inside the
// inclusion-tagged region for the finite-difference studies (ghost = the
// perturbation region still carries its surrounding phase).
// ---------------------------------------------------------------------------
struct PhaseMapping {
  std::array<const FluxFunction*, 3> by_tag{};

  const FluxFunction& of(RegionTag t) const { return *by_tag[static_cast<int>(t)]; }

  static PhaseMapping standard(const TwoPhaseMaterial& m) {
    PhaseMapping pm;
    pm.by_tag[static_cast<int>(RegionTag::inclusion)] = &phase1(m);
    pm.by_tag[static_cast<int>(RegionTag::matrix_omega)] = &phase1(m);
    pm.by_tag[static_cast<int>(RegionTag::matrix_complement)] = &phase2(m);
    return pm;
  }

  // insertion: the perturbation sits in the complement; active inserts phase 1.
  // removal: the perturbation sits inside Omega; active inserts phase 2.
  static PhaseMapping perturbation(const TwoPhaseMaterial& m, bool inclusion_active,
                                   bool insertion_branch) {
    PhaseMapping pm;
    pm.by_tag[static_cast<int>(RegionTag::matrix_omega)] = &phase1(m);
    pm.by_tag[static_cast<int>(RegionTag::matrix_complement)] = &phase2(m);
    const FluxFunction* incl;
    if (insertion_branch)
      incl = inclusion_active ? &phase1(m) : &phase2(m);
    else
      incl = inclusion_active ? &phase2(m) : &phase1(m);
    pm.by_tag[static_cast<int>(RegionTag::inclusion)] = incl;
    return pm;
  }

  bool all_assumptions_hold() const {
    for (const auto* f : by_tag)
      if (f && !f->assumptions_hold) return false;
    return true;
  }
};

// ---------------------------------------------------------------------------
// Sparse matrix facade: triplet accumulation, duplicate-summing compression,
// and direct solves (plain and transposed) with a residual check.
// ---------------------------------------------------------------------------
class SparseMatrix {
 public:
  explicit SparseMatrix(int n) : n_(n) {}

  void add(int i, int j, double v) {
    if (finalized_) throw std::logic_error("pde: add() after finalize()");
    triplets_.emplace_back(i, j, v);
  }

  void finalize() {
    if (finalized_) return;
    mat_.resize(n_, n_);
    mat_.setFromTriplets(triplets_.begin(), triplets_.end());  // sums duplicates
    mat_.makeCompressed();
    triplets_.clear();
    triplets_.shrink_to_fit();
    finalized_ = true;
  }

  int size() const { return n_; }
  bool finalized() const { return finalized_; }

  double coeff(int i, int j) const {
    if (!finalized_) throw std::logic_error("pde: coeff() before finalize()");
    return mat_.coeff(i, j);
  }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    if (!finalized_) throw std::logic_error("pde: for_each() before finalize()");
    for (int k = 0; k < mat_.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(mat_, k); it; ++it)
        fn(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  }

  std::vector<double> apply(const std::vector<double>& x, bool transpose = false) const {
    if (!finalized_) throw std::logic_error("pde: apply() before finalize()");
    Eigen::Map<const Eigen::VectorXd> xv(x.data(), n_);
    Eigen::VectorXd y = transpose ? Eigen::VectorXd(mat_.transpose() * xv)
                                  : Eigen::VectorXd(mat_ * xv);
    return std::vector<double>(y.data(), y.data() + n_);
  }

  // Direct solve via sparse LU; checks the relative residual afterwards so a
  // silently bad factorization cannot leak into results.
  std::vector<double> solve(const std::vector<double>& rhs, bool transpose = false,
                            double rel_tol = 1e-10) const {
    if (!finalized_) throw std::logic_error("pde: solve() before finalize()");
    Eigen::Map<const Eigen::VectorXd> b(rhs.data(), n_);
    Eigen::SparseMatrix<double> a = transpose
        ? Eigen::SparseMatrix<double>(mat_.transpose())
        : mat_;
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(a);
    lu.factorize(a);
    if (lu.info() != Eigen::Success)
      throw SolverError("pde: sparse LU factorization failed", {});
    Eigen::VectorXd x = lu.solve(b);
    const double bn = b.norm();
    const double rn = (a * x - b).norm();
    if (bn > 0.0 && rn > rel_tol * bn)
      throw SolverError("pde: linear solve residual " + format_g17(rn / bn) +
                            " exceeds tolerance",
                        {rn / bn});
    return std::vector<double>(x.data(), x.data() + n_);
  }

 private:
  int n_;
  std::vector<Eigen::Triplet<double>> triplets_;
  Eigen::SparseMatrix<double> mat_;
  bool finalized_ = false;
};

// ---------------------------------------------------------------------------
// Assembly primitives.
// ---------------------------------------------------------------------------

// r_i += int a_tag(grad u + shift) . grad phi_i  (no Dirichlet masking here).
inline std::vector<double> assemble_flux_divergence(const Mesh& mesh,
                                                    const PhaseMapping& pm,
                                                    const std::vector<double>& values,
                                                    const Vec2& shift = Vec2{0.0, 0.0}) {
  std::vector<double> r(mesh.num_vertices(), 0.0);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const auto& g = mesh.element(t);
    const Vec2 flux = pm.of(mesh.region_tag[t]).value(element_gradient(mesh, values, t) + shift);
    for (int k = 0; k < 3; ++k) r[tri[k]] += g.area * dot(flux, g.grad[k]);
  }
  return r;
}

// Load vector (f phi_i) with f a P1 field: exact elementwise mass rule.
inline std::vector<double> assemble_load(const Mesh& mesh,
                                         const std::vector<double>& f_values) {
  std::vector<double> r(mesh.num_vertices(), 0.0);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double area = mesh.element(t).area;
    for (int k = 0; k < 3; ++k) {
      const double fk = f_values[tri[k]], fl = f_values[tri[(k + 1) % 3]],
                   fm = f_values[tri[(k + 2) % 3]];
      r[tri[k]] += area / 12.0 * (2.0 * fk + fl + fm);
    }
  }
  return r;
}

// out_i += factor * int v phi_i (P1 mass application).
inline void accumulate_mass(const Mesh& mesh, const std::vector<double>& v,
                            std::vector<double>& out, double factor) {
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double area = mesh.element(t).area;
    for (int k = 0; k < 3; ++k) {
      const double vk = v[tri[k]], vl = v[tri[(k + 1) % 3]], vm = v[tri[(k + 2) % 3]];
      out[tri[k]] += factor * area / 12.0 * (2.0 * vk + vl + vm);
    }
  }
}

// out_i += factor * int grad v . grad phi_i (unit-coefficient stiffness).
inline void accumulate_unit_stiffness(const Mesh& mesh, const std::vector<double>& v,
                                      std::vector<double>& out, double factor) {
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const auto& g = mesh.element(t);
    const Vec2 gv = element_gradient(mesh, v, t);
    for (int k = 0; k < 3; ++k)
      out[tri[k]] += factor * g.area * dot(gv, g.grad[k]);
  }
}

inline void zero_masked_rows(const std::vector<std::uint8_t>& mask,
                             std::vector<double>& r) {
  for (std::size_t i = 0; i < r.size(); ++i)
    if (mask[i]) r[i] = 0.0;
}

// State residual with Dirichlet rows zeroed: int a(grad u).grad phi - int f phi.
inline std::vector<double> assemble_residual(const FeField& u, const PhaseMapping& pm,
                                             const std::vector<double>& load) {
  std::vector<double> r = assemble_flux_divergence(*u.mesh, pm, u.values);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= load[i];
  zero_masked_rows(u.dirichlet_mask, r);
  return r;
}

// System matrix int J_T grad phi_j . grad phi_i with identity Dirichlet
// rows/columns; J_T is an arbitrary per-element 2x2 matrix.
template <typename ElementJacobian>
inline SparseMatrix assemble_matrix_from(const Mesh& mesh,
                                         const std::vector<std::uint8_t>& mask,
                                         ElementJacobian&& jac_of_element) {
  SparseMatrix m(mesh.num_vertices());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const auto& g = mesh.element(t);
    const Mat2 jac = jac_of_element(t);
    for (int i = 0; i < 3; ++i) {
      if (mask[tri[i]]) continue;
      for (int j = 0; j < 3; ++j) {
        if (mask[tri[j]]) continue;
        m.add(tri[i], tri[j], g.area * dot(jac.apply(g.grad[j]), g.grad[i]));
      }
    }
  }
  for (int v = 0; v < mesh.num_vertices(); ++v)
    if (mask[v]) m.add(v, v, 1.0);
  m.finalize();
  return m;
}

// Tangent at u (optionally gradient-shifted): int da(grad u + shift) grad
// phi_j . grad phi_i.
inline SparseMatrix assemble_tangent(const Mesh& mesh, const PhaseMapping& pm,
                                     const std::vector<double>& values,
                                     const std::vector<std::uint8_t>& mask,
                                     const Vec2& shift = Vec2{0.0, 0.0}) {
  return assemble_matrix_from(mesh, mask, [&](int t) {
    return pm.of(mesh.region_tag[t]).jacobian(element_gradient(mesh, values, t) + shift);
  });
}

// Five-point Gauss rule on [0,1], used for the s-averaged Jacobians.
inline constexpr std::array<double, 5> kGauss5Nodes = {
    0.046910077030668004, 0.23076534494715845, 0.5,
    0.76923465505284155, 0.95308992296933200};
inline constexpr std::array<double, 5> kGauss5Weights = {
    0.11846344252809454, 0.23931433524968324, 0.28444444444444444,
    0.23931433524968324, 0.11846344252809454};

// ---------------------------------------------------------------------------
// Damped Newton iteration for the state problem (and the corrector problems,
// which share the same residual/tangent shape).
// ---------------------------------------------------------------------------
struct NewtonOptions {
  double tolerance = 1e-10;  // relative to the initial residual norm
  int max_iterations = 25;
  int max_backtracks = 30;
  bool allow_unchecked_materials = false;
};

struct NewtonReport {
  std::vector<double> residual_history;
  int iterations = 0;
};

inline double vec_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Solves residual(u) = 0 where residual(u) = flux_divergence(u) - load with
// Dirichlet rows zeroed. The initial iterate defaults to zero.
inline FeField newton_solve(std::shared_ptr<const Mesh> mesh, const PhaseMapping& pm,
                            const std::vector<double>& load,
                            const NewtonOptions& opts = {},
                            NewtonReport* report = nullptr,
                            const FeField* initial = nullptr,
                            const Vec2& gradient_shift = Vec2{0.0, 0.0}) {
  if (!pm.all_assumptions_hold() && !opts.allow_unchecked_materials)
    throw ConfigError(
        "pde: material law does not satisfy the structural assumptions "
        "(enable unchecked materials to proceed)");
  if (initial && initial->mesh.get() != mesh.get())
    throw std::logic_error("pde: Newton initial guess lives on a different mesh");
  FeField u = initial ? *initial : make_zero_field(mesh);
  auto residual_of = [&](const std::vector<double>& vals) {
    std::vector<double> r = assemble_flux_divergence(*mesh, pm, vals, gradient_shift);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= load[i];
    zero_masked_rows(u.dirichlet_mask, r);
    return r;
  };

  std::vector<double> r = residual_of(u.values);
  double rn = vec_norm(r);
  const double r0n = rn;
  std::vector<double> history{rn};

  int iter = 0;
  while (true) {
    if (rn <= opts.tolerance * r0n) break;
    if (iter >= opts.max_iterations)
      throw SolverError("pde: Newton did not reach tolerance in " +
                            std::to_string(opts.max_iterations) + " iterations",
                        history);
    SparseMatrix tangent =
        assemble_tangent(*mesh, pm, u.values, u.dirichlet_mask, gradient_shift);
    std::vector<double> neg_r(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) neg_r[i] = -r[i];
    std::vector<double> step;
    try {
      step = tangent.solve(neg_r);
    } catch (const SolverError& e) {
      throw SolverError(std::string("pde: Newton linear solve failed: ") + e.what(),
                        history);
    }
    double t = 1.0;
    bool accepted = false;
    std::vector<double> trial(u.values.size());
    for (int back = 0; back <= opts.max_backtracks; ++back) {
      for (std::size_t i = 0; i < trial.size(); ++i)
        trial[i] = u.values[i] + t * step[i];
      std::vector<double> r_trial = residual_of(trial);
      const double rn_trial = vec_norm(r_trial);
      if (rn_trial < rn) {
        u.values = trial;
        r = std::move(r_trial);
        rn = rn_trial;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted)
      throw SolverError("pde: Newton line search failed to reduce the residual",
                        history);
    history.push_back(rn);
    ++iter;
  }
  if (report) {
    report->residual_history = std::move(history);
    report->iterations = iter;
  }
  return u;
}

// ---------------------------------------------------------------------------
// Cost, adjoints, Lagrangian.
// ---------------------------------------------------------------------------

inline double eval_cost(const FeField& u, const FeField& u_d, const CostWeights& w) {
  require_same_mesh(u, u_d);
  const Mesh& mesh = *u.mesh;
  double j = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const auto& g = mesh.element(t);
    const double e0 = u.values[tri[0]] - u_d.values[tri[0]];
    const double e1 = u.values[tri[1]] - u_d.values[tri[1]];
    const double e2 = u.values[tri[2]] - u_d.values[tri[2]];
    if (w.a != 0.0) {
      // Exact P1 integral of e^2 on the triangle.
      j += w.a * g.area / 6.0 *
           (e0 * e0 + e1 * e1 + e2 * e2 + e0 * e1 + e1 * e2 + e2 * e0);
    }
    if (w.b != 0.0) {
      const Vec2 ge = e0 * g.grad[0] + e1 * g.grad[1] + e2 * g.grad[2];
      j += w.b * g.area * norm_sq(ge);
    }
  }
  return j;
}

// Adjoint at the unperturbed state: tangent(u0)^T p = -dJ/du(u0).
inline FeField solve_adjoint(const FeField& u0, const PhaseMapping& pm,
                             const FeField& u_d, const CostWeights& w) {
  require_same_mesh(u0, u_d);
  const Mesh& mesh = *u0.mesh;
  std::vector<double> diff(u0.values.size());
  for (std::size_t i = 0; i < diff.size(); ++i)
    diff[i] = u0.values[i] - u_d.values[i];
  std::vector<double> rhs(diff.size(), 0.0);
  if (w.a != 0.0) accumulate_mass(mesh, diff, rhs, -2.0 * w.a);
  if (w.b != 0.0) accumulate_unit_stiffness(mesh, diff, rhs, -2.0 * w.b);
  zero_masked_rows(u0.dirichlet_mask, rhs);
  SparseMatrix tangent = assemble_tangent(mesh, pm, u0.values, u0.dirichlet_mask);
  FeField p = make_zero_field(u0.mesh);
  p.values = tangent.solve(rhs, /*transpose=*/true);
  return p;
}

// Averaged adjoint between the perturbed and unperturbed states:
//   [int_0^1 da(grad(s u_eps + (1-s) u0)) ds]^T p = averaged cost derivative.
inline FeField solve_averaged_adjoint(const FeField& u_eps, const FeField& u0,
                                      const PhaseMapping& pm_perturbed,
                                      const FeField& u_d, const CostWeights& w) {
  require_same_mesh(u_eps, u0);
  require_same_mesh(u_eps, u_d);
  const Mesh& mesh = *u_eps.mesh;
  SparseMatrix avg = assemble_matrix_from(mesh, u_eps.dirichlet_mask, [&](int t) {
    const Vec2 g0 = element_gradient(mesh, u0.values, t);
    const Vec2 ge = element_gradient(mesh, u_eps.values, t);
    const FluxFunction& law = pm_perturbed.of(mesh.region_tag[t]);
    Mat2 jac{};
    for (int q = 0; q < 5; ++q) {
      const double s = kGauss5Nodes[q];
      jac += law.jacobian(g0 + s * (ge - g0)) * kGauss5Weights[q];
    }
    return jac;
  });
  std::vector<double> v(u_eps.values.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = u_eps.values[i] + u0.values[i] - 2.0 * u_d.values[i];
  std::vector<double> rhs(v.size(), 0.0);
  if (w.a != 0.0) accumulate_mass(mesh, v, rhs, -w.a);
  if (w.b != 0.0) accumulate_unit_stiffness(mesh, v, rhs, -w.b);
  zero_masked_rows(u_eps.dirichlet_mask, rhs);
  FeField p = make_zero_field(u_eps.mesh);
  p.values = avg.solve(rhs, /*transpose=*/true);
  return p;
}

// Lagrangian G(u, p) = J(u) + int a(grad u).grad p - int f p for a given
// load vector (the f term uses the same exact quadrature as the residual).
inline double eval_lagrangian(const FeField& u, const FeField& p,
                              const PhaseMapping& pm, const std::vector<double>& load,
                              const FeField& u_d, const CostWeights& w) {
  require_same_mesh(u, p);
  const Mesh& mesh = *u.mesh;
  double g = eval_cost(u, u_d, w);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& geo = mesh.element(t);
    const Vec2 flux = pm.of(mesh.region_tag[t]).value(element_gradient(mesh, u.values, t));
    g += geo.area * dot(flux, element_gradient(mesh, p.values, t));
  }
  for (std::size_t i = 0; i < load.size(); ++i) g -= load[i] * p.values[i];
  return g;
}

// ---------------------------------------------------------------------------
// Norms and gradient recovery.
// ---------------------------------------------------------------------------

inline double norm_l2(const FeField& u) {
  const Mesh& mesh = *u.mesh;
  double s = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const double a = mesh.element(t).area;
    const double v0 = u.values[tri[0]], v1 = u.values[tri[1]], v2 = u.values[tri[2]];
    s += a / 6.0 * (v0 * v0 + v1 * v1 + v2 * v2 + v0 * v1 + v1 * v2 + v2 * v0);
  }
  return std::sqrt(s);
}

inline double seminorm_h1(const FeField& u) {
  const Mesh& mesh = *u.mesh;
  double s = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t)
    s += mesh.element(t).area * norm_sq(element_gradient(mesh, u.values, t));
  return std::sqrt(s);
}

inline double norm_h1(const FeField& u) {
  const double l2 = norm_l2(u), h1 = seminorm_h1(u);
  return std::sqrt(l2 * l2 + h1 * h1);
}

inline FeField field_difference(const FeField& u, const FeField& v) {
  require_same_mesh(u, v);
  FeField d = make_zero_field(u.mesh);
  for (std::size_t i = 0; i < d.values.size(); ++i)
    d.values[i] = u.values[i] - v.values[i];
  return d;
}

// Recovers grad u at a point as the area-weighted average of the element
// gradients whose closure contains the point. At mesh vertices of a
// symmetric patch this is the usual superconvergent recovery.
inline Vec2 recover_gradient(const FeField& u, const Vec2& z) {
  const Mesh& mesh = *u.mesh;
  const double scale = 1.0 + norm(z);
  // Vertex hit: average over all incident triangles.
  int nearest = -1;
  double best = std::numeric_limits<double>::max();
  const auto hit = mesh.locate(z);
  if (!hit) throw ConfigError("pde: gradient recovery point outside the mesh");
  const auto& tri0 = mesh.triangles[hit->first];
  for (int k = 0; k < 3; ++k) {
    const double d = norm(mesh.vertices[tri0[k]] - z);
    if (d < best) {
      best = d;
      nearest = tri0[k];
    }
  }
  double total = 0.0;
  Vec2 acc{0.0, 0.0};
  if (best <= 1e-9 * scale) {
    for (int t = 0; t < mesh.num_triangles(); ++t) {
      const auto& tri = mesh.triangles[t];
      if (tri[0] == nearest || tri[1] == nearest || tri[2] == nearest) {
        const double a = mesh.element(t).area;
        acc += element_gradient(mesh, u.values, t) * a;
        total += a;
      }
    }
  } else {
    // Interior or edge point: average the containing triangles (one or two).
    constexpr double tol = 1e-10;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
      const auto bc = mesh.barycentric(t, z);
      if (bc[0] >= -tol && bc[1] >= -tol && bc[2] >= -tol) {
        const double a = mesh.element(t).area;
        acc += element_gradient(mesh, u.values, t) * a;
        total += a;
      }
    }
  }
  if (total <= 0.0) throw ConfigError("pde: gradient recovery found no elements");
  return acc / total;
}

}  // namespace tdt
