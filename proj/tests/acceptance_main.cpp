// Acceptance gate: runs the ten release criteria end to end and prints one
// [PASS]/[FAIL] line per criterion with the measured numbers. Exit status is
// 0 only when every criterion passes. Criteria 1-9 exercise the library
// directly; criterion 10 drives the installed binary.

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "support/benchmarks.hpp"
#include "tdt/asymptotics.hpp"
#include "tdt/io.hpp"
#include "tdt/topoderiv.hpp"

using namespace tdt;
using tdt_test::bench_corrector;
using tdt_test::disk_benchmark;
using tdt_test::kDiskPoint;
using tdt_test::kRatesPoint;
using tdt_test::linear_contrast;
using tdt_test::rates_benchmark;
using tdt_test::reluctivity_benchmark;
using tdt_test::role_swap_benchmark;

namespace {

constexpr double kTdExact = 8.0 / 9.0;

struct Gate {
  bool ok = true;
  std::ostringstream detail;

  // Records one sub-check; all sub-checks must hold for the criterion.
  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (detail.tellp() > 0) detail << "; ";
      detail << "FAILED: " << what;
    }
  }
  void note(const std::string& what) {
    if (detail.tellp() > 0) detail << "; ";
    detail << what;
  }
};

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(3);
  ss << v;
  return ss.str();
}

const InclusionShape& unit_disk() {
  static const InclusionShape s = InclusionShape::disk(1.0);
  return s;
}

double rel_gap(double a, double b) {
  return std::abs(a - b) / std::max({1e-12, std::abs(a), std::abs(b)});
}

// --- criterion 1: zero contrast annihilates everything ----------------------
void criterion_zero_contrast(Gate& g) {
  ProblemData d = disk_benchmark();
  d.materials.a1 = linear_material(1.0);  // identical phases
  const auto mesh = build_state_mesh(d);
  const StateSolution state = solve_state_and_adjoint(d, mesh);
  CorrectorSettings s;
  s.radius = 10.0;
  s.h_near = 0.1;
  const TdBreakdown td = td_point(d, state, s, kDiskPoint, 0.0);
  double mx = 0.0;
  for (double v : {td.dl_g, td.r1, td.r2, td.td_lagrangian, td.td_alternative,
                   td.td_averaged})
    mx = std::max(mx, std::abs(v));
  g.require(mx <= 1e-10, "td parts up to " + fmt(mx));

  const FdQuotient q = fd_quotient(d, kDiskPoint, unit_disk(), 0.05);
  g.require(std::abs(q.quotient) <= 1e-10, "fd quotient " + fmt(q.quotient));

  const CorrectorDomain domain = make_corrector_domain(s);
  const Vec2 U0{1.0, 0.0}, P0{1.0, 0.0};
  const CorrectorResult K = solve_K(d.materials, U0, domain);
  const CorrectorResult Qt = solve_Qtilde(d.materials, U0, P0, domain);
  const CorrectorResult Q = solve_Q(d.materials, U0, P0, K, d.weights, domain);
  double field_max = 0.0;
  for (const CorrectorResult* r : {&K, &Qt, &Q})
    for (double v : r->field.values) field_max = std::max(field_max, std::abs(v));
  g.require(field_max <= 1e-10, "corrector fields up to " + fmt(field_max));
  g.note("max |td parts| " + fmt(mx) + ", |quotient| " + fmt(std::abs(q.quotient)) +
         ", corrector sup " + fmt(field_max));
}

// --- criterion 2: linear disk corrector against the closed form -------------
void criterion_linear_corrector(Gate& g) {
  const TwoPhaseMaterial m = linear_contrast();
  const CorrectorDomain domain = make_corrector_domain(bench_corrector());
  const CorrectorResult K = solve_K(m, Vec2{1.0, 0.0}, domain);
  const double rho = -1.0 / 3.0;
  const Vec2 mean = K.inclusion_mean_grad;
  const double mean_err = norm(mean - Vec2{rho, 0.0}) / std::abs(rho);
  g.require(mean_err <= 0.02, "mean grad K off by " + fmt(mean_err));

  const Mat2 M = polarization_matrix(m, Vec2{1.0, 0.0}, domain);
  const double mref = std::numbers::pi / 3.0;
  const double pol_err =
      std::max({std::abs(M.a11 + mref), std::abs(M.a22 + mref), std::abs(M.a12),
                std::abs(M.a21)}) /
      mref;
  g.require(pol_err <= 0.02, "polarization off by " + fmt(pol_err));
  g.note("mean grad (" + fmt(mean.x) + ", " + fmt(mean.y) + ") vs -1/3, rel err " +
         fmt(mean_err) + "; polarization rel err " + fmt(pol_err));
}

// --- criterion 3: linear td value and finite-difference consistency ---------
void criterion_linear_td_fd(Gate& g) {
  const ProblemData d = disk_benchmark();
  const StateSolution state = solve_state_and_adjoint(d, build_state_mesh(d));
  const TdBreakdown td = td_point(d, state, bench_corrector(), kDiskPoint, 0.0);
  for (double route : {td.td_lagrangian, td.td_alternative, td.td_averaged})
    g.require(std::abs(route - kTdExact) <= 0.05 * kTdExact,
              "route " + fmt(route) + " vs 8/9");

  const EpsStudy fd = fd_study(d, kDiskPoint, unit_disk(), {0.08, 0.04, 0.02},
                               td.td_lagrangian);
  std::vector<double> diff;
  for (double q : fd.quotient) diff.push_back(std::abs(q - td.td_lagrangian));
  g.require(diff[1] < diff[0] && diff[2] < diff[1],
            "fd gaps not strictly decreasing: " + fmt(diff[0]) + ", " +
                fmt(diff[1]) + ", " + fmt(diff[2]));
  g.require(diff.back() <= 0.05 * std::abs(td.td_lagrangian),
            "final fd gap " + fmt(diff.back()));
  g.note("td " + fmt(td.td_lagrangian) + " (8/9 = " + fmt(kTdExact) +
         "), fd gaps " + fmt(diff[0]) + " > " + fmt(diff[1]) + " > " +
         fmt(diff[2]));
}

// --- criterion 4: route equivalence for the quasi-linear law ----------------
void criterion_route_equivalence(Gate& g) {
  const ProblemData d = reluctivity_benchmark();
  const StateSolution state = solve_state_and_adjoint(d, build_state_mesh(d));
  const TdBreakdown td = td_point(d, state, bench_corrector(), kDiskPoint, 0.0);
  const double g1 = rel_gap(td.td_lagrangian, td.td_alternative);
  const double g2 = rel_gap(td.td_lagrangian, td.td_averaged);
  const double g3 = rel_gap(td.td_alternative, td.td_averaged);
  g.require(g1 <= 0.01, "lagrangian vs alternative " + fmt(g1));
  g.require(g2 <= 0.01, "lagrangian vs averaged " + fmt(g2));
  g.require(g3 <= 0.01, "alternative vs averaged " + fmt(g3));
  g.note("td " + fmt(td.td_lagrangian) + ", route gaps " + fmt(g1) + ", " +
         fmt(g2) + ", " + fmt(g3));
}

// --- criterion 5: H1 rate of the state difference ---------------------------
void criterion_state_rate(Gate& g) {
  const EpsStudy s = rate_state_difference(rates_benchmark(), kRatesPoint,
                                           unit_disk(), {0.16, 0.08, 0.04, 0.02});
  g.require(s.fitted_slope >= 0.85 && s.fitted_slope <= 1.15,
            "slope " + fmt(s.fitted_slope));
  g.note("fitted H1 slope " + fmt(s.fitted_slope) + " over 4 epsilons");
}

// --- criterion 6: strong convergence of the rescaled difference -------------
void criterion_keps(Gate& g) {
  const auto run = [&](const ProblemData& d, const std::string& label) {
    const StateSolution state = solve_state_and_adjoint(d, build_state_mesh(d));
    const Vec2 U0 = recover_gradient(state.u0, kDiskPoint);
    const CorrectorDomain domain = make_corrector_domain(bench_corrector());
    const CorrectorResult K = solve_K(d.materials, U0, domain);
    const EpsStudy s = keps_convergence(d, kDiskPoint, unit_disk(),
                                        {0.08, 0.04, 0.02}, K, 3.0);
    g.require(s.keps_gap[1] < s.keps_gap[0] && s.keps_gap[2] < s.keps_gap[1],
              label + " gaps not strictly decreasing");
    g.note(label + " gaps " + fmt(s.keps_gap[0]) + " > " + fmt(s.keps_gap[1]) +
           " > " + fmt(s.keps_gap[2]));
  };
  run(disk_benchmark(), "linear");
  run(reluctivity_benchmark(), "reluctivity");
}

// --- criterion 7: nested projection diagnostic ------------------------------
void criterion_projection(Gate& g) {
  CorrectorSettings s;
  s.radius = 80.0;
  s.h_near = 0.05;
  const CorrectorDomain domain = make_corrector_domain(s);
  const CorrectorResult K = solve_K(linear_contrast(), Vec2{1.0, 0.0}, domain);
  const auto rows = projection_diagnostic(K, {10.0, 20.0, 40.0, 80.0});
  g.require(rows[1].grad_gap < rows[0].grad_gap &&
                rows[2].grad_gap < rows[1].grad_gap,
            "projection gaps not strictly decreasing");
  g.require(rows[3].grad_gap <= 1e-7,
            "full-radius projection gap " + fmt(rows[3].grad_gap));
  g.note("gaps " + fmt(rows[0].grad_gap) + " > " + fmt(rows[1].grad_gap) +
         " > " + fmt(rows[2].grad_gap) + ", at R itself " +
         fmt(rows[3].grad_gap));
}

// --- criterion 8: solver quality gates --------------------------------------
void criterion_solver_gates(Gate& g) {
  // (a) Newton on every benchmark, 1e-10 relative within 25 iterations.
  int worst_iterations = 0;
  ProblemData nonlinear_omega = role_swap_benchmark();
  nonlinear_omega.materials.a1 = reluctivity_material(1.0, 3.0, 1.0, 1);
  const std::vector<std::pair<std::string, ProblemData>> benchmarks = {
      {"linear-disk", disk_benchmark()},
      {"reluctivity-disk", reluctivity_benchmark()},
      {"linear-rates", rates_benchmark()},
      {"reluctivity-omega", nonlinear_omega},
  };
  for (const auto& [label, data] : benchmarks) {
    NewtonReport report;
    solve_state_and_adjoint(data, build_state_mesh(data), &report);
    g.require(report.iterations <= 25, label + " took " +
                                           std::to_string(report.iterations) +
                                           " iterations");
    worst_iterations = std::max(worst_iterations, report.iterations);
  }

  // (b) Tangent consistency: ||R(u+tv) - R(u) - t A(u) v|| = O(t^2).
  const auto mesh = std::make_shared<const Mesh>(
      structured_grid(Rect{0.0, 0.0, 1.0, 1.0}, 0.2));
  TwoPhaseMaterial m;
  m.a1 = linear_material(1.0);
  m.a2 = reluctivity_material(1.0, 3.0, 1.0, 1);  // structured grids are phase 2
  const PhaseMapping pm = PhaseMapping::standard(m);
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> unit(-0.3, 0.3);
  std::vector<double> u(mesh->num_vertices()), v(mesh->num_vertices());
  for (auto& x : u) x = unit(rng);
  for (auto& x : v) x = unit(rng);
  const std::vector<std::uint8_t> no_mask(mesh->num_vertices(), 0);
  const std::vector<double> r0 = assemble_flux_divergence(*mesh, pm, u);
  const std::vector<double> av =
      assemble_tangent(*mesh, pm, u, no_mask).apply(v);
  std::vector<double> errs;
  for (double t : {0.05, 0.025, 0.0125}) {
    std::vector<double> ut = u;
    for (std::size_t i = 0; i < ut.size(); ++i) ut[i] += t * v[i];
    const std::vector<double> rt = assemble_flux_divergence(*mesh, pm, ut);
    double e2 = 0.0;
    for (std::size_t i = 0; i < rt.size(); ++i) {
      const double d = rt[i] - r0[i] - t * av[i];
      e2 += d * d;
    }
    errs.push_back(std::sqrt(e2));
  }
  double min_slope = 1e9;
  for (std::size_t i = 1; i < errs.size(); ++i)
    min_slope = std::min(min_slope, std::log2(errs[i - 1] / errs[i]));
  g.require(min_slope >= 1.9, "tangent fd slope " + fmt(min_slope));

  // (c) Manufactured solution u = sin(pi x) sin(pi y) / pi under the
  // reluctivity law: H1 error slope 1.0 +/- 0.1 over two uniform refinements.
  constexpr double pi = std::numbers::pi;
  const auto u_exact = [pi](const Vec2& p) {
    return std::sin(pi * p.x) * std::sin(pi * p.y) / pi;
  };
  const auto grad_exact = [pi](const Vec2& p) {
    return Vec2{std::cos(pi * p.x) * std::sin(pi * p.y),
                std::sin(pi * p.x) * std::cos(pi * p.y)};
  };
  const FluxFunction& law = m.a2;
  std::vector<double> hs, h1_errs;
  Mesh level = structured_grid(Rect{0.0, 0.0, 1.0, 1.0}, 0.125);
  for (int lvl = 0; lvl < 3; ++lvl) {
    if (lvl > 0) level = refine_uniform(level);
    const auto mp = std::make_shared<const Mesh>(level);
    // Load: int a(grad u_exact) . grad phi_i by the edge-midpoint rule.
    std::vector<double> load(mp->num_vertices(), 0.0);
    for (int t = 0; t < mp->num_triangles(); ++t) {
      const auto& tri = mp->triangles[t];
      const auto& geom = mp->element(t);
      for (int e = 0; e < 3; ++e) {
        const Vec2 q = 0.5 * (mp->vertices[tri[e]] + mp->vertices[tri[(e + 1) % 3]]);
        const Vec2 flux = law.value(grad_exact(q));
        for (int k = 0; k < 3; ++k)
          load[tri[k]] += geom.area / 3.0 * dot(flux, geom.grad[k]);
      }
    }
    const FeField uh = newton_solve(mp, pm, load);
    double e2 = 0.0;
    for (int t = 0; t < mp->num_triangles(); ++t) {
      const auto& tri = mp->triangles[t];
      const auto& geom = mp->element(t);
      const Vec2 gh = element_gradient(*mp, uh.values, t);
      for (int e = 0; e < 3; ++e) {
        const int a = tri[e], b = tri[(e + 1) % 3];
        const Vec2 q = 0.5 * (mp->vertices[a] + mp->vertices[b]);
        const double vh = 0.5 * (uh.values[a] + uh.values[b]);
        e2 += geom.area / 3.0 *
              (norm_sq(gh - grad_exact(q)) + (vh - u_exact(q)) * (vh - u_exact(q)));
      }
    }
    hs.push_back(0.125 / static_cast<double>(1 << lvl));
    h1_errs.push_back(std::sqrt(e2));
  }
  const double slope = fit_loglog_slope(hs, h1_errs);
  g.require(slope >= 0.9 && slope <= 1.1, "manufactured H1 slope " + fmt(slope));
  g.note("max Newton iterations " + std::to_string(worst_iterations) +
         "; tangent slope " + fmt(min_slope) + "; manufactured H1 slope " +
         fmt(slope));
}

// --- criterion 9: removal branch equals the role-swapped computation --------
void criterion_role_swap(Gate& g) {
  const ProblemData base = role_swap_benchmark();
  const Vec2 z{0.65, 0.5};  // inside Omega -> removal branch
  const FdQuotient a = fd_quotient(base, z, unit_disk(), 0.04);
  g.require(!a.insertion_branch, "z should classify as removal");

  // Exchanging the phase laws and raising the swap flag describes the
  // identical material layout, so on the matched mesh the quotient must
  // come back within solver tolerance.
  ProblemData exchanged = base;
  std::swap(exchanged.materials.a1, exchanged.materials.a2);
  exchanged.materials.swap = true;
  const FdQuotient b = fd_quotient(exchanged, z, unit_disk(), 0.04);
  const double gap = std::abs(a.quotient - b.quotient);
  g.require(gap <= 1e-10 * std::max(1.0, std::abs(a.quotient)),
            "role-swap gap " + fmt(gap));
  g.require(std::abs(a.quotient) > 1e-3, "degenerate benchmark quotient");
  g.note("removal quotient " + fmt(a.quotient) + ", role-swap gap " + fmt(gap));
}

// --- criterion 10: deterministic reruns are byte-identical ------------------
int run_cli(const std::string& args, const std::string& log) {
  const std::string cmd =
      std::string(TDT_CLI_PATH) + " " + args + " >>" + log + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

void criterion_determinism(Gate& g) {
  namespace fs = std::filesystem;
  const fs::path scratch = fs::temp_directory_path() / "tdt_acceptance";
  fs::remove_all(scratch);
  fs::create_directories(scratch);
  const std::string log = (scratch / "cli.log").string();

  struct VerifyRun {
    const char* command;
    const char* config;
    const char* csv;
  };
  const std::vector<VerifyRun> runs = {
      {"verify-fd", "linear_disk.conf", "fd.csv"},
      {"verify-keps", "linear_disk.conf", "keps.csv"},
      {"verify-keps", "reluctivity_disk.conf", "keps.csv"},
      {"verify-rates", "linear_rates.conf", "rates.csv"},
      {"verify-projection", "projection.conf", "projection.csv"},
  };
  int checked = 0;
  for (const auto& r : runs) {
    const std::string label = std::string(r.command) + "@" + r.config;
    const std::string cfg = std::string(TDT_SOURCE_DIR) + "/configs/" + r.config;
    const std::string out_a = (scratch / (label + ".a")).string();
    const std::string out_b = (scratch / (label + ".b")).string();
    const std::string base = std::string(r.command) + " --config " + cfg +
                             " --deterministic";
    const int rc_a = run_cli(base + " --out " + out_a, log);
    const int rc_b = run_cli(base + " --out " + out_b, log);
    g.require(rc_a == 0 && rc_b == 0,
              label + " exited " + std::to_string(rc_a) + "/" +
                  std::to_string(rc_b));
    if (rc_a != 0 || rc_b != 0) continue;
    g.require(files_byte_identical(out_a + "/" + r.csv, out_b + "/" + r.csv),
              label + " csv differs between reruns");
    ++checked;
  }
  g.note(std::to_string(checked) + " verify runs byte-identical across reruns");
}

}  // namespace

int main() {
  struct Criterion {
    std::string label;
    std::function<void(Gate&)> run;
  };
  const std::vector<Criterion> criteria = {
      {"zero-contrast annihilation", criterion_zero_contrast},
      {"linear disk corrector vs closed form", criterion_linear_corrector},
      {"linear td value and fd consistency", criterion_linear_td_fd},
      {"quasi-linear route equivalence", criterion_route_equivalence},
      {"H1 rate of the state difference", criterion_state_rate},
      {"strong convergence of K_eps", criterion_keps},
      {"nested projection diagnostic", criterion_projection},
      {"solver quality gates", criterion_solver_gates},
      {"role-swap symmetry of the removal branch", criterion_role_swap},
      {"deterministic verify reruns", criterion_determinism},
  };

  int passed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Gate gate;
    try {
      criteria[i].run(gate);
    } catch (const std::exception& e) {
      gate.ok = false;
      gate.note(std::string("exception: ") + e.what());
    }
    std::cout << (gate.ok ? "[PASS] " : "[FAIL] ") << (i + 1) << " "
              << criteria[i].label;
    const std::string detail = gate.detail.str();
    if (!detail.empty()) std::cout << " — " << detail;
    std::cout << "\n" << std::flush;
    passed += gate.ok ? 1 : 0;
  }
  std::cout << "acceptance: " << passed << "/" << criteria.size() << " criteria passed\n";
  return passed == static_cast<int>(criteria.size()) ? 0 : 1;
}
