#pragma once

// Command implementations behind the CLI. Each command reads one config,
// writes everything into one output directory, prints PASS/FAIL summary
// lines for its assertions, and records a plain-text manifest with the
// config hash and per-artifact digests.
//
// Exit status convention (mapped by the CLI driver):
//   0  success, all assertions passed
//   1  at least one verification assertion failed
//   2  configuration error (bad config, bad geometry, bad flags)
//   3  solver failure (Newton or linear solve), residual history written

#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "tdt/asymptotics.hpp"
#include "tdt/common.hpp"
#include "tdt/config.hpp"
#include "tdt/corrector.hpp"
#include "tdt/io.hpp"
#include "tdt/materials.hpp"
#include "tdt/problem.hpp"
#include "tdt/topoderiv.hpp"

namespace tdt {

struct RunOptions {
  std::optional<int> threads;          // --threads, overrides run.threads
  bool deterministic = false;          // --deterministic, OR-ed with config
  std::optional<std::uint64_t> seed;   // --seed, overrides run.seed
  std::ostream* out = nullptr;         // summary lines; default std::cout
};

namespace detail {

// Shared bookkeeping for one command invocation: output paths, the manifest,
// and the PASS/FAIL tally.
class RunContext {
 public:
  RunContext(std::string command, std::string out_dir, const RunConfig& cfg,
             const RunOptions& opts)
      : out_dir_(std::move(out_dir)), start_(std::chrono::steady_clock::now()) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir_, ec);
    if (ec)
      throw ConfigError("runner: cannot create output directory '" + out_dir_ +
                        "': " + ec.message());
    stream_ = opts.out ? opts.out : &std::cout;
    deterministic_ = opts.deterministic || cfg.get_bool("run.deterministic", false);
    threads_ = opts.threads ? *opts.threads
                            : static_cast<int>(cfg.get_int("run.threads", 1));
    if (threads_ < 1) throw ConfigError("runner: thread count must be at least 1");
    if (deterministic_) threads_ = 1;
    seed_ = opts.seed ? *opts.seed
                      : static_cast<std::uint64_t>(cfg.get_int("run.seed", 1));
    manifest_.set("tool_version", kToolVersion);
    manifest_.set("command", command);
    manifest_.set("config_hash", cfg.hash_hex());
    manifest_.set("deterministic", deterministic_ ? "true" : "false");
    manifest_.set("threads", std::to_string(threads_));
    manifest_.set("seed", std::to_string(seed_));
  }

  std::string path(const std::string& name) const {
    return (std::filesystem::path(out_dir_) / name).string();
  }

  void note_artifact(const std::string& name) {
    const auto [digest, size] = file_digest(path(name));
    manifest_.set("artifact." + name, digest + " " + std::to_string(size));
  }

  void set(const std::string& key, const std::string& value) {
    manifest_.set(key, value);
  }

  void set_num(const std::string& key, double value) {
    manifest_.set(key, format_g17(value));
  }

  bool check(const std::string& name, bool ok, const std::string& detail = "") {
    if (ok) {
      *stream_ << "PASS " << name << "\n";
    } else {
      *stream_ << "FAIL " << name << (detail.empty() ? "" : ": " + detail) << "\n";
      any_fail_ = true;
    }
    return ok;
  }

  bool deterministic() const { return deterministic_; }
  std::uint64_t seed() const { return seed_; }
  std::ostream& stream() { return *stream_; }

  int finish() {
    const auto elapsed = std::chrono::steady_clock::now() - start_;
    manifest_.set(
        "wall_time_ms",
        std::to_string(
            std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count()));
    manifest_.write(path("run_manifest.txt"));
    return any_fail_ ? 1 : 0;
  }

  // On solver failure: persist the residual history next to the other
  // artifacts so the failure is diagnosable, then let the error propagate.
  void record_solver_failure(const SolverError& err) {
    std::ofstream hist(path("residual_history.txt"));
    for (double r : err.residual_history) hist << format_g17(r) << "\n";
    manifest_.set("status", "solver_error");
    manifest_.set("error", err.what());
    manifest_.write(path("run_manifest.txt"));
  }

 private:
  std::string out_dir_;
  Manifest manifest_;
  std::ostream* stream_ = nullptr;
  std::chrono::steady_clock::time_point start_;
  bool deterministic_ = false;
  int threads_ = 1;
  std::uint64_t seed_ = 1;
  bool any_fail_ = false;
};

inline void write_mesh_artifact(RunContext& ctx, const std::string& name,
                                const Mesh& mesh) {
  write_mesh(mesh, ctx.path(name));
  ctx.note_artifact(name);
}

inline void write_field_artifact(RunContext& ctx, const std::string& name,
                                 const FeField& field) {
  write_field(field, ctx.path(name));
  ctx.note_artifact(name);
}

inline void write_csv_artifact(RunContext& ctx, const std::string& name,
                               const CsvTable& table) {
  write_csv(table, ctx.path(name));
  ctx.note_artifact(name);
}

inline void write_vtk_artifact(
    RunContext& ctx, const std::string& name, const Mesh& mesh,
    const std::vector<std::pair<std::string, const FeField*>>& fields) {
  write_vtk(mesh, fields, ctx.path(name));
  ctx.note_artifact(name);
}

// Commas and newlines would break the CSV row structure.
inline std::string csv_safe(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

inline std::vector<double> parse_epsilons(const RunConfig& cfg) {
  std::vector<double> eps = cfg.has("study.epsilons")
                                ? cfg.get_list("study.epsilons")
                                : std::vector<double>{0.08, 0.04, 0.02};
  for (double e : eps)
    if (!(e > 0.0))
      throw ConfigError(cfg.context() + ": study.epsilons must be positive");
  return eps;
}

inline InclusionShape parse_perturbation_shape(const RunConfig& cfg) {
  return cfg.has("inclusion.shape") ? parse_inclusion_shape(cfg, "inclusion.shape")
                                    : InclusionShape::disk(1.0);
}

inline TwoPhaseMaterial parse_two_phase(const RunConfig& cfg) {
  TwoPhaseMaterial m;
  m.a1 = parse_material(cfg, "material.a1");
  m.a2 = parse_material(cfg, "material.a2");
  m.swap = cfg.get_bool("material.swap", false);
  return m;
}

inline CostWeights parse_weights(const RunConfig& cfg) {
  CostWeights w;
  w.a = cfg.get_double("cost.a", 0.0);
  w.b = cfg.get_double("cost.b", 1.0);
  w.validate();
  return w;
}

// One row of the td CSV; `row.td` empty means numeric columns stay blank.
inline std::vector<std::string> td_csv_row(const TdFieldRow& row) {
  std::vector<std::string> out;
  out.push_back(format_g17(row.p.x));
  out.push_back(format_g17(row.p.y));
  if (row.td) {
    const TdBreakdown& td = *row.td;
    out.push_back(format_g17(td.td_lagrangian));
    out.push_back(format_g17(td.dl_g));
    out.push_back(format_g17(td.r1));
    out.push_back(format_g17(td.r2));
    out.push_back(format_g17(td.td_alternative));
    out.push_back(format_g17(td.td_averaged));
    out.push_back(td.removal ? "removal" : "insertion");
    out.push_back("");
  } else {
    for (int i = 0; i < 6; ++i) out.push_back("");
    out.push_back("skipped");
    out.push_back(csv_safe(row.error));
  }
  return out;
}

inline const std::vector<std::string>& td_csv_header() {
  static const std::vector<std::string> header = {
      "x", "y", "td", "dl_g", "r1", "r2", "td_alt", "td_avg", "case", "error"};
  return header;
}

// ---------------------------------------------------------------------------
// Commands.
// ---------------------------------------------------------------------------

inline int cmd_solve_state(const RunConfig& cfg, RunContext& ctx) {
  const ProblemData data = parse_problem(cfg);
  const auto mesh = build_state_mesh(data);
  NewtonReport report;
  const StateSolution state = solve_state_and_adjoint(data, mesh, &report);
  write_mesh_artifact(ctx, "state.mesh", *mesh);
  write_field_artifact(ctx, "u0.field", state.u0);
  FeField error = field_difference(state.u0, state.u_d_field);
  write_vtk_artifact(ctx, "state.vtk", *mesh,
                     {{"u0", &state.u0}, {"u_d", &state.u_d_field}, {"error", &error}});
  ctx.set_num("cost", state.cost);
  ctx.set("newton_iterations", std::to_string(report.iterations));
  if (!report.residual_history.empty())
    ctx.set_num("newton_final_residual", report.residual_history.back());
  return 0;
}

inline int cmd_solve_adjoint(const RunConfig& cfg, RunContext& ctx) {
  const ProblemData data = parse_problem(cfg);
  const auto mesh = build_state_mesh(data);
  NewtonReport report;
  const StateSolution state = solve_state_and_adjoint(data, mesh, &report);
  write_mesh_artifact(ctx, "state.mesh", *mesh);
  write_field_artifact(ctx, "u0.field", state.u0);
  write_field_artifact(ctx, "p0.field", state.p0);
  write_vtk_artifact(ctx, "adjoint.vtk", *mesh,
                     {{"u0", &state.u0}, {"p0", &state.p0}});
  ctx.set_num("cost", state.cost);
  ctx.set("newton_iterations", std::to_string(report.iterations));
  return 0;
}

inline int cmd_corrector(const RunConfig& cfg, RunContext& ctx) {
  const TwoPhaseMaterial m = parse_two_phase(cfg);
  const CorrectorSettings settings = parse_corrector_settings(cfg);
  const CostWeights w = parse_weights(cfg);
  const Vec2 U0 = cfg.has("corrector.u0") ? cfg.get_vec2("corrector.u0")
                                          : Vec2{1.0, 0.0};
  const Vec2 P0 = cfg.has("corrector.p0") ? cfg.get_vec2("corrector.p0")
                                          : Vec2{1.0, 0.0};
  const CorrectorDomain domain = make_corrector_domain(settings);
  NewtonReport report;
  const CorrectorResult K = solve_K(m, U0, domain, settings.newton, &report);
  const CorrectorResult Qt = solve_Qtilde(m, U0, P0, domain);
  const CorrectorResult Q = solve_Q(m, U0, P0, K, w, domain);
  const Mat2 M = polarization_matrix(m, U0, domain);

  write_mesh_artifact(ctx, "corrector.mesh", *domain.mesh);
  write_field_artifact(ctx, "K.field", K.field);
  write_field_artifact(ctx, "Qtilde.field", Qt.field);
  write_field_artifact(ctx, "Q.field", Q.field);
  write_vtk_artifact(ctx, "corrector.vtk", *domain.mesh,
                     {{"K", &K.field}, {"Qtilde", &Qt.field}, {"Q", &Q.field}});

  CsvTable summary;
  summary.header = {"R", "grad_energy", "mean_grad_x", "mean_grad_y"};
  summary.rows.push_back({format_g17(settings.radius), format_g17(K.grad_energy),
                          format_g17(K.inclusion_mean_grad.x),
                          format_g17(K.inclusion_mean_grad.y)});
  write_csv_artifact(ctx, "corrector.csv", summary);

  ctx.set_num("omega_area", domain.omega_area);
  ctx.set_num("polarization_xx", M.a11);
  ctx.set_num("polarization_xy", M.a12);
  ctx.set_num("polarization_yx", M.a21);
  ctx.set_num("polarization_yy", M.a22);
  ctx.set("newton_iterations", std::to_string(report.iterations));

  if (cfg.has("study.radii")) {
    const auto rows = truncation_study(m, U0, settings, cfg.get_list("study.radii"));
    CsvTable table;
    table.header = {"R", "grad_energy", "mean_grad_x", "mean_grad_y", "cauchy_diff"};
    for (const auto& row : rows)
      table.rows.push_back({format_g17(row.radius), format_g17(row.grad_energy),
                            format_g17(row.inclusion_mean_grad.x),
                            format_g17(row.inclusion_mean_grad.y),
                            format_g17(row.cauchy_diff)});
    write_csv_artifact(ctx, "truncation.csv", table);
  }
  return 0;
}

inline int cmd_td_point(const RunConfig& cfg, RunContext& ctx) {
  const ProblemData data = parse_problem(cfg);
  const CorrectorSettings settings = parse_corrector_settings(cfg);
  const Vec2 z = cfg.get_vec2("point.z");
  const double band = cfg.get_double("point.exclusion_band", 0.0);
  const auto mesh = build_state_mesh(data);
  const StateSolution state = solve_state_and_adjoint(data, mesh);
  const TdBreakdown td = td_point(data, state, settings, z, band);

  CsvTable table;
  table.header = td_csv_header();
  TdFieldRow row;
  row.p = z;
  row.td = td;
  table.rows.push_back(td_csv_row(row));
  write_csv_artifact(ctx, "td.csv", table);
  write_mesh_artifact(ctx, "state.mesh", *mesh);
  write_vtk_artifact(ctx, "state.vtk", *mesh,
                     {{"u0", &state.u0}, {"p0", &state.p0}});
  ctx.set_num("td_lagrangian", td.td_lagrangian);
  ctx.set_num("td_alternative", td.td_alternative);
  ctx.set_num("td_averaged", td.td_averaged);
  ctx.set("branch", td.removal ? "removal" : "insertion");
  return 0;
}

inline int cmd_td_field(const RunConfig& cfg, RunContext& ctx) {
  const ProblemData data = parse_problem(cfg);
  const CorrectorSettings settings = parse_corrector_settings(cfg);
  const double band = cfg.get_double("point.exclusion_band", 0.0);
  const std::vector<double> xs = parse_axis(cfg, "grid.x");
  const std::vector<double> ys = parse_axis(cfg, "grid.y");
  std::vector<Vec2> points;
  for (double y : ys)
    for (double x : xs) points.push_back(Vec2{x, y});

  const auto mesh = build_state_mesh(data);
  const StateSolution state = solve_state_and_adjoint(data, mesh);
  const auto rows = td_field(data, state, settings, points, band);

  CsvTable table;
  table.header = td_csv_header();
  for (const auto& row : rows) table.rows.push_back(td_csv_row(row));
  write_csv_artifact(ctx, "td_field.csv", table);
  write_mesh_artifact(ctx, "state.mesh", *mesh);
  write_vtk_artifact(ctx, "state.vtk", *mesh,
                     {{"u0", &state.u0}, {"p0", &state.p0}});
  int evaluated = 0;
  for (const auto& row : rows) evaluated += row.td.has_value();
  ctx.set("points_total", std::to_string(rows.size()));
  ctx.set("points_evaluated", std::to_string(evaluated));
  return 0;
}

inline int cmd_verify_fd(const RunConfig& cfg, RunContext& ctx) {
  const ProblemData data = parse_problem(cfg);
  const CorrectorSettings settings = parse_corrector_settings(cfg);
  const InclusionShape shape = parse_perturbation_shape(cfg);
  const Vec2 z = cfg.get_vec2("point.z");
  const double band = cfg.get_double("point.exclusion_band", 0.0);
  const std::vector<double> eps = parse_epsilons(cfg);

  const auto mesh = build_state_mesh(data);
  const StateSolution state = solve_state_and_adjoint(data, mesh);
  const TdBreakdown td = td_point(data, state, settings, z, band);
  const EpsStudy study = fd_study(data, z, shape, eps, td.td_lagrangian);

  CsvTable table;
  table.header = {"eps", "j_perturbed", "j_unperturbed", "quotient",
                  "td_reference", "abs_diff"};
  std::vector<double> diff;
  for (std::size_t i = 0; i < study.eps.size(); ++i) {
    diff.push_back(std::abs(study.quotient[i] - td.td_lagrangian));
    table.rows.push_back({format_g17(study.eps[i]), format_g17(study.j_perturbed[i]),
                          format_g17(study.j_unperturbed[i]),
                          format_g17(study.quotient[i]),
                          format_g17(td.td_lagrangian), format_g17(diff.back())});
  }
  write_csv_artifact(ctx, "fd.csv", table);
  ctx.set_num("td_reference", td.td_lagrangian);

  double max_mag = std::abs(td.td_lagrangian);
  for (double q : study.quotient) max_mag = std::max(max_mag, std::abs(q));
  if (max_mag <= 1e-10) {
    ctx.check("fd_zero_contrast", true);
    return 0;
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < diff.size(); ++i)
    decreasing = decreasing && diff[i] < diff[i - 1];
  ctx.check("fd_gap_decreasing", decreasing,
            "quotient-vs-td gap must shrink as eps decreases");
  const double floor = std::max(1e-12, 0.05 * std::abs(td.td_lagrangian));
  ctx.check("fd_final_band", diff.back() <= floor,
            "final gap " + format_g17(diff.back()) + " exceeds 5% of td " +
                format_g17(td.td_lagrangian));
  return 0;
}

inline int cmd_verify_rates(const RunConfig& cfg, RunContext& ctx) {
  const ProblemData data = parse_problem(cfg);
  const InclusionShape shape = parse_perturbation_shape(cfg);
  const Vec2 z = cfg.get_vec2("point.z");
  const std::vector<double> eps = parse_epsilons(cfg);

  // Zero-data case first: with identical phases the difference is at solver
  // noise level and a log-log fit would be meaningless.
  std::vector<double> h1;
  std::vector<double> eps_out;
  {
    CsvTable table;
    table.header = {"eps", "h1_diff"};
    bool all_tiny = true;
    for (double e : eps) {
      PlacedShape pert;
      pert.shape = shape;
      pert.center = z;
      pert.scale = e;
      const StatePair pair = solve_state_pair(data, pert);
      const double d = norm_h1(field_difference(pair.u_perturbed, pair.u_unperturbed));
      eps_out.push_back(e);
      h1.push_back(d);
      all_tiny = all_tiny && d <= 1e-10;
      table.rows.push_back({format_g17(e), format_g17(d)});
    }
    write_csv_artifact(ctx, "rates.csv", table);
    if (all_tiny) {
      ctx.set("fitted_slope", "not-applicable");
      ctx.check("rate_zero_contrast", true);
      return 0;
    }
  }
  const double slope = fit_loglog_slope(eps_out, h1);
  ctx.set_num("fitted_slope", slope);
  ctx.check("rate_slope_band", slope >= 0.85 && slope <= 1.15,
            "fitted H1 slope " + format_g17(slope) + " outside [0.85, 1.15]");
  return 0;
}

inline int cmd_verify_keps(const RunConfig& cfg, RunContext& ctx) {
  const ProblemData data = parse_problem(cfg);
  const CorrectorSettings settings = parse_corrector_settings(cfg);
  const InclusionShape shape = parse_perturbation_shape(cfg);
  const Vec2 z = cfg.get_vec2("point.z");
  const double band = cfg.get_double("point.exclusion_band", 0.0);
  const double comparison_radius = cfg.get_double("study.comparison_radius", 5.0);
  const std::vector<double> eps = parse_epsilons(cfg);

  const auto mesh = build_state_mesh(data);
  const StateSolution state = solve_state_and_adjoint(data, mesh);
  const bool removal = classify_removal(data, z, band);
  TwoPhaseMaterial m_eff = data.materials;
  if (removal) m_eff.swap = !m_eff.swap;
  const Vec2 U0 = recover_gradient(state.u0, z);
  CorrectorSettings local = settings;
  local.shape = shape;
  const CorrectorDomain domain = make_corrector_domain(local);
  const CorrectorResult K = solve_K(m_eff, U0, domain, local.newton);
  const EpsStudy study = keps_convergence(data, z, shape, eps, K, comparison_radius);

  CsvTable table;
  table.header = {"eps", "keps_gap"};
  for (std::size_t i = 0; i < study.eps.size(); ++i)
    table.rows.push_back(
        {format_g17(study.eps[i]), format_g17(study.keps_gap[i])});
  write_csv_artifact(ctx, "keps.csv", table);

  bool all_tiny = true;
  for (double g : study.keps_gap) all_tiny = all_tiny && g <= 1e-10;
  if (all_tiny) {
    ctx.check("keps_zero_contrast", true);
    return 0;
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < study.keps_gap.size(); ++i)
    decreasing = decreasing && study.keps_gap[i] < study.keps_gap[i - 1];
  ctx.check("keps_decreasing", decreasing,
            "corrector gap must shrink as eps decreases");
  return 0;
}

inline int cmd_verify_projection(const RunConfig& cfg, RunContext& ctx) {
  const TwoPhaseMaterial m = parse_two_phase(cfg);
  const CorrectorSettings settings = parse_corrector_settings(cfg);
  const Vec2 U0 = cfg.has("corrector.u0") ? cfg.get_vec2("corrector.u0")
                                          : Vec2{1.0, 0.0};
  const std::vector<double> radii = cfg.get_list("study.radii");
  const CorrectorDomain domain = make_corrector_domain(settings);
  const CorrectorResult K = solve_K(m, U0, domain, settings.newton);
  const auto rows = projection_diagnostic(K, radii);

  CsvTable table;
  table.header = {"R", "grad_gap"};
  for (const auto& row : rows)
    table.rows.push_back({format_g17(row.radius), format_g17(row.grad_gap)});
  write_csv_artifact(ctx, "projection.csv", table);
  ctx.set_num("grad_energy", K.grad_energy);

  if (K.grad_energy <= 1e-20) {
    ctx.check("projection_zero_field", true);
    return 0;
  }
  bool decreasing = true;
  std::size_t interior = 0;  // rows with radius < the mesh radius
  for (const auto& row : rows)
    if (row.radius < settings.radius * (1.0 - 1e-12)) ++interior;
  for (std::size_t i = 1; i < interior; ++i)
    decreasing = decreasing && rows[i].grad_gap < rows[i - 1].grad_gap;
  ctx.check("projection_gap_decreasing", decreasing,
            "projection gap must shrink as the radius grows");
  for (const auto& row : rows)
    if (row.radius >= settings.radius * (1.0 - 1e-12))
      ctx.check("projection_exact_radius", row.grad_gap <= 1e-7,
                "projection at the mesh radius should be the identity, gap " +
                    format_g17(row.grad_gap));
  return 0;
}

inline int cmd_check_material(const RunConfig& cfg, RunContext& ctx) {
  const double half_width = cfg.get_double("check.box_half_width", 10.0);
  const int samples = static_cast<int>(cfg.get_int("check.samples", 200));
  const std::uint64_t seed = cfg.has("check.seed")
                                 ? static_cast<std::uint64_t>(cfg.get_int("check.seed"))
                                 : ctx.seed();
  std::ofstream report(ctx.path("material_check.txt"));
  bool any = false;
  for (const std::string key : {"material.a1", "material.a2"}) {
    if (!cfg.has(key)) continue;
    any = true;
    const FluxFunction f = parse_material(cfg, key);
    const MaterialCheck res = check_assumptions(f, half_width, samples, seed);
    report << key << " = " << f.name << "\n";
    report << "  declared c1 c2 c3 = " << format_g17(f.c1) << " " << format_g17(f.c2)
           << " " << format_g17(f.c3) << "\n";
    report << "  c1_estimate = " << format_g17(res.c1_estimate) << "\n";
    report << "  c2_estimate = " << format_g17(res.c2_estimate) << "\n";
    report << "  c3_estimate = " << format_g17(res.c3_estimate) << "\n";
    report << "  jacobian_fd_error = " << format_g17(res.jacobian_fd_error) << "\n";
    report << "  pass = " << (res.pass ? "true" : "false") << "\n";
    if (!res.message.empty()) report << "  note = " << res.message << "\n";
    ctx.set_num(key + ".c1_estimate", res.c1_estimate);
    ctx.set_num(key + ".c2_estimate", res.c2_estimate);
    ctx.check("check." + key, res.pass, res.message);
  }
  report.close();
  ctx.note_artifact("material_check.txt");
  if (!any)
    throw ConfigError(cfg.context() +
                      ": check-material needs material.a1 or material.a2");
  return 0;
}

}  // namespace detail

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {
      "solve-state", "solve-adjoint", "corrector",      "td-point",
      "td-field",    "verify-fd",     "verify-rates",   "verify-keps",
      "verify-projection", "check-material"};
  return names;
}

// Runs one command against one config into one output directory. Throws
// ConfigError (exit 2) or SolverError (exit 3); returns 0 or, when a
// verification assertion failed, 1.
inline int run_command(const std::string& command, const std::string& config_path,
                       const std::string& out_dir, const RunOptions& opts = {}) {
  const RunConfig cfg = RunConfig::parse_file(config_path);
  detail::RunContext ctx(command, out_dir, cfg, opts);
  try {
    int rc = 0;
    if (command == "solve-state") rc = detail::cmd_solve_state(cfg, ctx);
    else if (command == "solve-adjoint") rc = detail::cmd_solve_adjoint(cfg, ctx);
    else if (command == "corrector") rc = detail::cmd_corrector(cfg, ctx);
    else if (command == "td-point") rc = detail::cmd_td_point(cfg, ctx);
    else if (command == "td-field") rc = detail::cmd_td_field(cfg, ctx);
    else if (command == "verify-fd") rc = detail::cmd_verify_fd(cfg, ctx);
    else if (command == "verify-rates") rc = detail::cmd_verify_rates(cfg, ctx);
    else if (command == "verify-keps") rc = detail::cmd_verify_keps(cfg, ctx);
    else if (command == "verify-projection") rc = detail::cmd_verify_projection(cfg, ctx);
    else if (command == "check-material") rc = detail::cmd_check_material(cfg, ctx);
    else throw ConfigError("runner: unknown command '" + command + "'");
    const int fin = ctx.finish();
    return rc != 0 ? rc : fin;
  } catch (const SolverError& err) {
    ctx.record_solver_failure(err);
    throw;
  }
}

}  // namespace tdt
