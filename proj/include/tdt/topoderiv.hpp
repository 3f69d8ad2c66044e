#pragma once

// Topological derivative of the tracking cost. Three routes are computed for
// every evaluation point and reported side by side:
//
//   td_lagrangian  = dl_G + R1 + R2         (partial derivative of the
//                                            Lagrangian plus the two
//                                            correction terms built from K)
//   td_alternative  — same quantity rearranged through the corrector-adjoint
//                     Qt, the form that exposes the polarization matrix
//   td_averaged     — averaged-adjoint route through Q; the only route that
//                     covers gradient weight b != 1 and the L2 cost weight
//
// For points inside the fixed subdomain Omega, removing phase-1 material is
// evaluated as inserting material into the role-swapped configuration.

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "tdt/corrector.hpp"
#include "tdt/problem.hpp"

namespace tdt {

// dl_G = (a1(U0) - a2(U0)) . P0 (the epsilon-derivative of the Lagrangian at
// the unperturbed pair, divided by |omega_eps|).
inline double dl_G(const TwoPhaseMaterial& m, const Vec2& U0, const Vec2& P0) {
  return dot(phase1(m).value(U0) - phase2(m).value(U0), P0);
}

// R1 = (1/|omega|) [ int (a(gK+U0) - a(U0) - da(U0) gK) . P0 + int |gK|^2 ].
inline double compute_R1(const TwoPhaseMaterial& m, const CorrectorResult& K,
                         const Vec2& P0) {
  const Mesh& mesh = *K.mesh;
  const PhaseMapping pm = PhaseMapping::standard(m);
  double s = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const FluxFunction& law = pm.of(mesh.region_tag[t]);
    const Vec2 gk = element_gradient(mesh, K.field.values, t);
    const Vec2 taylor_rem =
        law.value(gk + K.U0) - law.value(K.U0) - law.jacobian(K.U0).apply(gk);
    s += mesh.element(t).area * dot(taylor_rem, P0);
  }
  return (s + K.grad_energy) / K.omega_area;
}

// R2 = (1/|omega|) int_omega (da1(U0) - da2(U0)) gK . P0.
inline double compute_R2(const TwoPhaseMaterial& m, const CorrectorResult& K,
                         const Vec2& P0) {
  const Mesh& mesh = *K.mesh;
  const Mat2 djump = phase1(m).jacobian(K.U0) - phase2(m).jacobian(K.U0);
  double s = 0.0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (mesh.region_tag[t] != RegionTag::inclusion) continue;
    const Vec2 gk = element_gradient(mesh, K.field.values, t);
    s += mesh.element(t).area * dot(djump.apply(gk), P0);
  }
  return s / K.omega_area;
}

struct TdBreakdown {
  Vec2 z{};
  Vec2 U0{}, P0{};
  bool removal = false;  // true when z lies inside Omega (phase-1 removal)
  double dl_g = 0.0;
  double r1 = 0.0;
  double r2 = 0.0;
  double td_lagrangian = 0.0;
  double td_alternative = 0.0;
  double td_averaged = 0.0;
};

// Core evaluation once U0, P0 and the branch are known. `m_effective` must
// already have the swap applied for the removal branch.
inline TdBreakdown evaluate_td(const TwoPhaseMaterial& m_effective, const Vec2& U0,
                               const Vec2& P0, bool removal, const CostWeights& w,
                               const CorrectorSettings& settings) {
  const CorrectorDomain domain = make_corrector_domain(settings);
  const Mesh& mesh = *domain.mesh;
  const PhaseMapping pm = PhaseMapping::standard(m_effective);

  const CorrectorResult K = solve_K(m_effective, U0, domain, settings.newton);
  const CorrectorResult Qt = solve_Qtilde(m_effective, U0, P0, domain);
  const CorrectorResult Q = solve_Q(m_effective, U0, P0, K, w, domain);

  TdBreakdown out;
  out.U0 = U0;
  out.P0 = P0;
  out.removal = removal;
  out.dl_g = dl_G(m_effective, U0, P0);
  out.r1 = compute_R1(m_effective, K, P0);
  out.r2 = compute_R2(m_effective, K, P0);
  out.td_lagrangian = out.dl_g + out.r1 + out.r2;

  // Alternative form: (1/|omega|) [ (a1-a2)(U0) . int_omega (P0 + grad Qt)
  //   + int (a(gK+U0) - a(U0) - da(U0) gK) . (P0 + grad Qt) + int |gK|^2 ].
  const Vec2 jump = phase1(m_effective).value(U0) - phase2(m_effective).value(U0);
  const Vec2 qt_int = inclusion_gradient_integral(mesh, Qt.field.values);
  double alt = dot(jump, P0 * domain.omega_area + qt_int);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const FluxFunction& law = pm.of(mesh.region_tag[t]);
    const Vec2 gk = element_gradient(mesh, K.field.values, t);
    const Vec2 taylor_rem =
        law.value(gk + U0) - law.value(U0) - law.jacobian(U0).apply(gk);
    const Vec2 gqt = element_gradient(mesh, Qt.field.values, t);
    alt += mesh.element(t).area * dot(taylor_rem, P0 + gqt);
  }
  alt += K.grad_energy;
  out.td_alternative = alt / domain.omega_area;

  // Averaged route: dl_G + (a1-a2)(U0) . mean_omega(grad Q).
  out.td_averaged = out.dl_g + dot(jump, Q.inclusion_mean_grad);
  return out;
}

// Classification and preconditions for an evaluation point on the
// unperturbed configuration.
inline bool classify_removal(const ProblemData& data, const Vec2& z,
                             double exclusion_band) {
  if (!data.domain.contains(z) ||
      data.domain.interior_margin(z) <= exclusion_band)
    throw ConfigError("topoderiv: evaluation point too close to the hold-all "
                      "boundary (or outside)");
  if (!data.omega) return false;
  const bool inside = data.omega->contains(z);
  const double d = radial_distance_to_boundary(*data.omega, z);
  if (d <= exclusion_band)
    throw ConfigError(
        "topoderiv: evaluation point inside the exclusion band of the Omega "
        "interface");
  return inside;
}

// Full evaluation at one point: recover U0/P0 from the solved state pair,
// pick the branch, run the corrector pipeline.
inline TdBreakdown td_point(const ProblemData& data, const StateSolution& state,
                            const CorrectorSettings& settings, const Vec2& z,
                            double exclusion_band) {
  const bool removal = classify_removal(data, z, exclusion_band);
  const Vec2 U0 = recover_gradient(state.u0, z);
  const Vec2 P0 = recover_gradient(state.p0, z);
  TwoPhaseMaterial m_eff = data.materials;
  if (removal) m_eff.swap = !m_eff.swap;
  TdBreakdown out = evaluate_td(m_eff, U0, P0, removal, data.weights, settings);
  out.z = z;
  return out;
}

// ---------------------------------------------------------------------------
// Field evaluation over a grid of points with (U0, P0, branch) clustering:
// points whose recovered data agree to 1e-10 share one corrector solve.
// per-point failures are recorded, not fatal.
// ---------------------------------------------------------------------------
struct TdFieldRow {
  Vec2 p{};
  std::optional<TdBreakdown> td;
  std::string error;
};

inline std::vector<TdFieldRow> td_field(const ProblemData& data,
                                        const StateSolution& state,
                                        const CorrectorSettings& settings,
                                        const std::vector<Vec2>& points,
                                        double exclusion_band) {
  using ClusterKey = std::tuple<std::int64_t, std::int64_t, std::int64_t,
                                std::int64_t, bool>;
  auto quantize = [](double v) {
    return static_cast<std::int64_t>(std::llround(v * 1e10));
  };

  std::vector<TdFieldRow> rows(points.size());
  std::map<ClusterKey, TdBreakdown> clusters;
  for (std::size_t i = 0; i < points.size(); ++i) {
    rows[i].p = points[i];
    try {
      const bool removal = classify_removal(data, points[i], exclusion_band);
      const Vec2 U0 = recover_gradient(state.u0, points[i]);
      const Vec2 P0 = recover_gradient(state.p0, points[i]);
      const ClusterKey key{quantize(U0.x), quantize(U0.y), quantize(P0.x),
                           quantize(P0.y), removal};
      auto it = clusters.find(key);
      if (it == clusters.end()) {
        TwoPhaseMaterial m_eff = data.materials;
        if (removal) m_eff.swap = !m_eff.swap;
        TdBreakdown td =
            evaluate_td(m_eff, U0, P0, removal, data.weights, settings);
        it = clusters.emplace(key, td).first;
      }
      TdBreakdown td = it->second;
      td.z = points[i];
      // Report the point's own recovered data (cluster members agree to the
      // quantization tolerance).
      td.U0 = U0;
      td.P0 = P0;
      rows[i].td = td;
    } catch (const std::exception& e) {
      rows[i].error = e.what();
    }
  }
  return rows;
}

}  // namespace tdt
