#pragma once

// Material laws. A FluxFunction is the nonlinear map y -> a(y) from gradients
// to fluxes together with its Jacobian and, when known, the structural
// constants: strong monotonicity c1, Lipschitz constant c2, and the Lipschitz
// constant c3 of the Jacobian. A TwoPhaseMaterial assigns one law to the
// inclusion phase and one to the matrix phase; the swap flag exchanges the
// roles, which is how material removal is expressed (removing phase-1
// material at a point is inserting phase-2 material into the swapped
// configuration).

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

#include "tdt/common.hpp"
#include "tdt/mesh.hpp"

namespace tdt {

struct FluxFunction {
  std::string name;
  std::function<Vec2(const Vec2&)> value;
  std::function<Mat2(const Vec2&)> jacobian;
  // Declared structural constants; 0 means "not declared".
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  // False for laws that do not satisfy the structural assumptions globally
  // (kept for experimentation only; the solver refuses them unless told
  // otherwise).
  bool assumptions_hold = true;
};

inline FluxFunction linear_material(double gamma) {
  if (!(gamma > 0.0)) throw ConfigError("materials: linear coefficient must be positive");
  FluxFunction f;
  std::ostringstream name;
  name << "linear(" << gamma << ")";
  f.name = name.str();
  f.value = [gamma](const Vec2& y) { return gamma * y; };
  f.jacobian = [gamma](const Vec2&) { return Mat2::scaled_identity(gamma); };
  f.c1 = gamma;
  f.c2 = gamma;
  f.c3 = 0.0;
  return f;
}

// Magnetic-reluctivity-style law a(y) = nu(|y|) y with
//   nu(s) = alpha + (beta - alpha) s^{2k} / (s^{2k} + tau).
// nu interpolates monotonically from alpha at s=0 to beta at infinity. The
// Jacobian is nu I + (nu'(s)/s) y yT with eigenvalues nu and nu + s nu', both
// in [alpha, beta + k(beta-alpha)/2], hence c1 = alpha and
// c2 = beta + k(beta-alpha)/2.
inline FluxFunction reluctivity_material(double alpha, double beta, double tau, int k) {
  if (!(alpha > 0.0) || !(beta > alpha))
    throw ConfigError("materials: reluctivity needs 0 < alpha < beta");
  if (!(tau > 0.0) || k < 1)
    throw ConfigError("materials: reluctivity needs tau > 0 and integer k >= 1");
  FluxFunction f;
  std::ostringstream name;
  name << "reluctivity(" << alpha << "," << beta << "," << tau << "," << k << ")";
  f.name = name.str();
  auto nu = [alpha, beta, tau, k](double s) {
    const double u = std::pow(s, 2 * k);
    return alpha + (beta - alpha) * u / (u + tau);
  };
  auto nu_prime = [alpha, beta, tau, k](double s) {
    if (s <= 0.0) return 0.0;
    const double u = std::pow(s, 2 * k);
    const double denom = (u + tau) * (u + tau);
    return (beta - alpha) * 2.0 * k * tau * std::pow(s, 2 * k - 1) / denom;
  };
  f.value = [nu](const Vec2& y) { return nu(norm(y)) * y; };
  f.jacobian = [nu, nu_prime](const Vec2& y) {
    const double s = norm(y);
    if (s < 1e-14) return Mat2::scaled_identity(nu(0.0));
    return Mat2::scaled_identity(nu(s)) + Mat2::outer(y, y) * (nu_prime(s) / s);
  };
  f.c1 = alpha;
  f.c2 = beta + k * (beta - alpha) / 2.0;
  f.c3 = 0.0;  // finite but not declared in closed form
  return f;
}

// Regularized p-Laplacian a(y) = (delta^2 + |y|^2)^{(p-2)/2} y. Not strongly
// monotone/Lipschitz uniformly on all of R^2 for p != 2, so the structural
// assumptions fail; kept for experimentation behind an explicit opt-in.
inline FluxFunction plaplacian_material(double p, double delta) {
  if (!(p > 1.0) || !(delta > 0.0))
    throw ConfigError("materials: p-laplacian needs p > 1 and delta > 0");
  FluxFunction f;
  std::ostringstream name;
  name << "plaplace(" << p << "," << delta << ")";
  f.name = name.str();
  const double e = 0.5 * (p - 2.0);
  f.value = [e, delta](const Vec2& y) {
    return std::pow(delta * delta + norm_sq(y), e) * y;
  };
  f.jacobian = [e, delta](const Vec2& y) {
    const double q = delta * delta + norm_sq(y);
    const double w = std::pow(q, e);
    return Mat2::scaled_identity(w) + Mat2::outer(y, y) * (2.0 * e * w / q);
  };
  f.assumptions_hold = false;
  return f;
}

struct TwoPhaseMaterial {
  FluxFunction a1;  // inclusion phase (and the fixed subdomain Omega)
  FluxFunction a2;  // surrounding matrix phase
  bool swap = false;
};

// Effective phase-1/phase-2 laws with the swap applied.
inline const FluxFunction& phase1(const TwoPhaseMaterial& m) { return m.swap ? m.a2 : m.a1; }
inline const FluxFunction& phase2(const TwoPhaseMaterial& m) { return m.swap ? m.a1 : m.a2; }

// Region dispatch for the standard configuration: the inclusion and the fixed
// subdomain carry phase 1, the complement carries phase 2.
inline const FluxFunction& phase_for_tag(const TwoPhaseMaterial& m, RegionTag tag) {
  switch (tag) {
    case RegionTag::inclusion:
    case RegionTag::matrix_omega: return phase1(m);
    case RegionTag::matrix_complement: return phase2(m);
  }
  return phase2(m);
}

inline Vec2 two_phase_eval(const TwoPhaseMaterial& m, RegionTag tag, const Vec2& y) {
  return phase_for_tag(m, tag).value(y);
}

inline Mat2 two_phase_jacobian(const TwoPhaseMaterial& m, RegionTag tag, const Vec2& y) {
  return phase_for_tag(m, tag).jacobian(y);
}

// ---------------------------------------------------------------------------
// Assumption checking by falsification: sample monotonicity / Lipschitz /
// Jacobian-Lipschitz quotients on a box and compare against the declared
// constants. Estimates from finitely many samples can only be optimistic
// (sampled min >= true inf, sampled max <= true sup), so a declared bound
// contradicted by a sample is definitely wrong, which is exactly what this
// check reports.
// ---------------------------------------------------------------------------
struct MaterialCheck {
  double c1_estimate = 0.0;  // min monotonicity quotient seen
  double c2_estimate = 0.0;  // max Lipschitz quotient seen
  double c3_estimate = 0.0;  // max Jacobian-Lipschitz quotient seen
  double jacobian_fd_error = 0.0;  // worst relative finite-difference mismatch
  bool pass = false;
  std::string message;
};

inline MaterialCheck check_assumptions(const FluxFunction& f, double box_half_width,
                                       int samples, std::uint64_t seed) {
  if (!(box_half_width > 0.0) || samples < 10)
    throw ConfigError("materials: check needs a positive box and >= 10 samples");
  MaterialCheck out;
  out.c1_estimate = std::numeric_limits<double>::max();
  Rng rng(seed);
  const double w = box_half_width;

  auto record_pair = [&](const Vec2& x, const Vec2& y) {
    const Vec2 d = x - y;
    const double dn2 = norm_sq(d);
    if (dn2 < 1e-20) return;
    const Vec2 da = f.value(x) - f.value(y);
    out.c1_estimate = std::min(out.c1_estimate, dot(da, d) / dn2);
    out.c2_estimate = std::max(out.c2_estimate, norm(da) / std::sqrt(dn2));
    const Mat2 dj = f.jacobian(x) - f.jacobian(y);
    out.c3_estimate = std::max(out.c3_estimate, dj.spectral_norm() / std::sqrt(dn2));
  };

  // Random pairs in the box.
  for (int i = 0; i < samples; ++i) {
    const Vec2 x{rng.uniform(-w, w), rng.uniform(-w, w)};
    const Vec2 y{rng.uniform(-w, w), rng.uniform(-w, w)};
    record_pair(x, y);
  }
  // Dense collinear sweeps along rays through the origin; radial laws attain
  // their extreme quotients on collinear pairs.
  constexpr int n_dirs = 16;
  constexpr int n_radial = 160;
  for (int kd = 0; kd < n_dirs; ++kd) {
    const double theta = 2.0 * std::numbers::pi * kd / n_dirs;
    const Vec2 e{std::cos(theta), std::sin(theta)};
    for (int i = 1; i <= n_radial; ++i) {
      const double s = w * i / n_radial;
      record_pair(e * s, e * (s - w / n_radial));
      record_pair(e * s, e * (0.5 * s));
    }
  }
  // Finite-difference consistency of the declared Jacobian.
  for (int i = 0; i < std::min(samples, 500); ++i) {
    const Vec2 y{rng.uniform(-w, w), rng.uniform(-w, w)};
    Vec2 v{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    const double vn = norm(v);
    if (vn < 1e-12) continue;
    v = v / vn;
    const double t = 1e-5;
    const Vec2 fd = (f.value(y + t * v) - f.value(y)) / t;
    const Vec2 jv = f.jacobian(y).apply(v);
    const double err = norm(fd - jv) / (1.0 + norm(jv));
    out.jacobian_fd_error = std::max(out.jacobian_fd_error, err);
  }

  constexpr double slack = 0.05;
  std::ostringstream msg;
  bool ok = true;
  if (!(out.c1_estimate > 0.0)) {
    ok = false;
    msg << "monotonicity quotient non-positive (" << out.c1_estimate << "); ";
  }
  if (out.jacobian_fd_error > 1e-3) {
    ok = false;
    msg << "jacobian inconsistent with finite differences (" << out.jacobian_fd_error
        << "); ";
  }
  if (f.c1 > 0.0 && out.c1_estimate < f.c1 * (1.0 - slack)) {
    ok = false;
    msg << "declared c1=" << f.c1 << " contradicted by estimate " << out.c1_estimate
        << "; ";
  }
  if (f.c2 > 0.0 && out.c2_estimate > f.c2 * (1.0 + slack)) {
    ok = false;
    msg << "declared c2=" << f.c2 << " contradicted by estimate " << out.c2_estimate
        << "; ";
  }
  if (f.c3 > 0.0 && out.c3_estimate > f.c3 * (1.0 + slack)) {
    ok = false;
    msg << "declared c3=" << f.c3 << " contradicted by estimate " << out.c3_estimate
        << "; ";
  }
  out.pass = ok;
  out.message = ok ? "ok" : msg.str();
  return out;
}

}  // namespace tdt
