#pragma once

// Run configuration: a flat, hierarchically named key-value text format.
//
//   # comment
//   domain.rect = 0 0 1 1
//   material.a1 = linear 2
//   source.f    = sinsin 8.885765876316732 3.141592653589793 3.141592653589793
//
// Unknown keys are hard errors (a silently ignored typo in a tolerance name
// would invalidate a verification claim), as are duplicates. The canonical
// form (keys sorted, single spaces) feeds the config hash recorded in run
// manifests.

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tdt/common.hpp"
#include "tdt/geometry.hpp"
#include "tdt/io.hpp"
#include "tdt/materials.hpp"
#include "tdt/problem.hpp"
#include "tdt/corrector.hpp"

namespace tdt {

namespace detail {

inline const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      "domain.rect",
      "cost.a",
      "cost.b",
      "material.a1",
      "material.a2",
      "material.swap",
      "material.unchecked",
      "source.f",
      "target.u_d",
      "subdomain.omega",
      "inclusion.shape",
      "mesh.h",
      "mesh.interface_factor",
      "mesh.perturbation_factor",
      "corrector.radius",
      "corrector.h_near",
      "corrector.h_far",
      "corrector.u0",
      "corrector.p0",
      "newton.tol",
      "newton.max_iterations",
      "point.z",
      "point.exclusion_band",
      "study.epsilons",
      "study.radii",
      "study.comparison_radius",
      "grid.x",
      "grid.y",
      "check.box_half_width",
      "check.samples",
      "check.seed",
      "run.deterministic",
      "run.seed",
      "run.threads",
  };
  return keys;
}

inline std::string trim_copy(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

}  // namespace detail

class RunConfig {
 public:
  struct Entry {
    std::string key;
    std::string value;  // whitespace-normalized token list
    int line = 0;
  };

  static RunConfig parse_text(const std::string& text,
                              const std::string& context = "config") {
    RunConfig cfg;
    cfg.context_ = context;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string::npos)
        line = line.substr(0, hash);
      if (detail::trim_copy(line).empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(context + ":" + std::to_string(line_no) +
                          ":1: expected 'key = value'");
      const std::string key = detail::trim_copy(line.substr(0, eq));
      const int key_col = static_cast<int>(line.find_first_not_of(" \t")) + 1;
      if (key.empty())
        throw ConfigError(context + ":" + std::to_string(line_no) +
                          ":1: missing key before '='");
      if (!detail::known_config_keys().count(key))
        throw ConfigError(context + ":" + std::to_string(line_no) + ":" +
                          std::to_string(key_col) + ": unknown key '" + key + "'");
      for (const auto& e : cfg.entries_)
        if (e.key == key)
          throw ConfigError(context + ":" + std::to_string(line_no) + ":" +
                            std::to_string(key_col) + ": duplicate key '" + key +
                            "' (first set at line " + std::to_string(e.line) + ")");
      // Normalize the value to single-space-separated tokens so the canonical
      // form is insensitive to incidental whitespace.
      const auto tokens = detail::split_tokens(line.substr(eq + 1));
      std::string value;
      for (std::size_t i = 0; i < tokens.size(); ++i)
        value += (i ? " " : "") + tokens[i];
      cfg.entries_.push_back(Entry{key, value, line_no});
    }
    return cfg;
  }

  static RunConfig parse_file(const std::string& path) {
    return parse_text(read_text_file(path), path);
  }

  bool has(const std::string& key) const { return find(key) != nullptr; }

  const std::vector<Entry>& entries() const { return entries_; }

  // Sorted "key = value" lines; the config hash is the FNV-1a digest of this.
  std::string canonical() const {
    std::vector<const Entry*> sorted;
    for (const auto& e : entries_) sorted.push_back(&e);
    std::sort(sorted.begin(), sorted.end(),
              [](const Entry* a, const Entry* b) { return a->key < b->key; });
    std::string out;
    for (const Entry* e : sorted) out += e->key + " = " + e->value + "\n";
    return out;
  }

  std::string hash_hex() const { return hex64(fnv1a64(canonical())); }

  // --- typed accessors -----------------------------------------------------
  std::vector<std::string> tokens(const std::string& key) const {
    return detail::split_tokens(require(key).value);
  }

  double get_double(const std::string& key) const {
    const Entry& e = require(key);
    const auto toks = detail::split_tokens(e.value);
    if (toks.size() != 1) fail(e, "expected a single number");
    return detail::parse_double(toks[0], context_, e.line);
  }

  double get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
  }

  long get_int(const std::string& key) const {
    const Entry& e = require(key);
    const auto toks = detail::split_tokens(e.value);
    if (toks.size() != 1) fail(e, "expected a single integer");
    return detail::parse_int(toks[0], context_, e.line);
  }

  long get_int(const std::string& key, long fallback) const {
    return has(key) ? get_int(key) : fallback;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const Entry* e = find(key);
    if (!e) return fallback;
    if (e->value == "true" || e->value == "1") return true;
    if (e->value == "false" || e->value == "0") return false;
    fail(*e, "expected true or false");
  }

  Vec2 get_vec2(const std::string& key) const {
    const Entry& e = require(key);
    const auto toks = detail::split_tokens(e.value);
    if (toks.size() != 2) fail(e, "expected two numbers");
    return Vec2{detail::parse_double(toks[0], context_, e.line),
                detail::parse_double(toks[1], context_, e.line)};
  }

  std::vector<double> get_list(const std::string& key) const {
    const Entry& e = require(key);
    const auto toks = detail::split_tokens(e.value);
    if (toks.empty()) fail(e, "expected a list of numbers");
    std::vector<double> out;
    for (const auto& t : toks)
      out.push_back(detail::parse_double(t, context_, e.line));
    return out;
  }

  const std::string& context() const { return context_; }

  [[noreturn]] void fail(const Entry& e, const std::string& what) const {
    throw ConfigError(context_ + ":" + std::to_string(e.line) + ": key '" + e.key +
                      "': " + what);
  }

  const Entry& require(const std::string& key) const {
    const Entry* e = find(key);
    if (!e) throw ConfigError(context_ + ": missing required key '" + key + "'");
    return *e;
  }

 private:
  const Entry* find(const std::string& key) const {
    for (const auto& e : entries_)
      if (e.key == key) return &e;
    return nullptr;
  }

  std::vector<Entry> entries_;
  std::string context_ = "config";
};

// ---------------------------------------------------------------------------
// Value grammars: materials, scalar fields, shapes.
// ---------------------------------------------------------------------------

inline FluxFunction parse_material(const RunConfig& cfg, const std::string& key) {
  const auto& e = cfg.require(key);
  const auto toks = detail::split_tokens(e.value);
  auto num = [&](std::size_t i) {
    return detail::parse_double(toks[i], cfg.context(), e.line);
  };
  if (toks.empty()) cfg.fail(e, "expected a material preset");
  if (toks[0] == "linear") {
    if (toks.size() != 2) cfg.fail(e, "usage: linear <gamma>");
    return linear_material(num(1));
  }
  if (toks[0] == "reluctivity") {
    if (toks.size() != 5) cfg.fail(e, "usage: reluctivity <alpha> <beta> <tau> <k>");
    return reluctivity_material(num(1), num(2), num(3), static_cast<int>(num(4)));
  }
  if (toks[0] == "plaplace") {
    if (toks.size() != 3) cfg.fail(e, "usage: plaplace <p> <delta>");
    return plaplacian_material(num(1), num(2));
  }
  cfg.fail(e, "unknown material preset '" + toks[0] + "'");
}

// const c | sinsin A ax ay | poly c00 c10 c01 c20 c11 c02 | file MESH FIELD
inline ScalarField parse_scalar_field(const RunConfig& cfg, const std::string& key) {
  const auto& e = cfg.require(key);
  const auto toks = detail::split_tokens(e.value);
  auto num = [&](std::size_t i) {
    return detail::parse_double(toks[i], cfg.context(), e.line);
  };
  if (toks.empty()) cfg.fail(e, "expected a field specification");
  if (toks[0] == "const") {
    if (toks.size() != 2) cfg.fail(e, "usage: const <value>");
    const double c = num(1);
    return [c](const Vec2&) { return c; };
  }
  if (toks[0] == "sinsin") {
    if (toks.size() != 4) cfg.fail(e, "usage: sinsin <amplitude> <freq_x> <freq_y>");
    const double amp = num(1), fx = num(2), fy = num(3);
    return [amp, fx, fy](const Vec2& p) {
      return amp * std::sin(fx * p.x) * std::sin(fy * p.y);
    };
  }
  if (toks[0] == "poly") {
    if (toks.size() != 7)
      cfg.fail(e, "usage: poly <c00> <c10> <c01> <c20> <c11> <c02>");
    std::array<double, 6> c{};
    for (int i = 0; i < 6; ++i) c[i] = num(i + 1);
    return [c](const Vec2& p) {
      return c[0] + c[1] * p.x + c[2] * p.y + c[3] * p.x * p.x +
             c[4] * p.x * p.y + c[5] * p.y * p.y;
    };
  }
  if (toks[0] == "file") {
    if (toks.size() != 3) cfg.fail(e, "usage: file <mesh_path> <field_path>");
    auto mesh = std::make_shared<Mesh>(read_mesh(toks[1]));
    auto field = std::make_shared<FeField>(read_field(toks[2], mesh));
    return [mesh, field](const Vec2& p) { return eval_field(*field, p); };
  }
  cfg.fail(e, "unknown field kind '" + toks[0] + "'");
}

// disk r | polygon x1 y1 ... xn yn   (coordinates relative to the center)
inline InclusionShape parse_inclusion_shape(const RunConfig& cfg,
                                            const std::string& key) {
  const auto& e = cfg.require(key);
  const auto toks = detail::split_tokens(e.value);
  auto num = [&](std::size_t i) {
    return detail::parse_double(toks[i], cfg.context(), e.line);
  };
  if (toks.empty()) cfg.fail(e, "expected a shape specification");
  if (toks[0] == "disk") {
    if (toks.size() != 2) cfg.fail(e, "usage: disk <radius>");
    return InclusionShape::disk(num(1));
  }
  if (toks[0] == "polygon") {
    if (toks.size() < 7 || toks.size() % 2 == 0)
      cfg.fail(e, "usage: polygon <x1> <y1> ... (at least 3 vertices)");
    std::vector<Vec2> pts;
    for (std::size_t i = 1; i + 1 < toks.size(); i += 2)
      pts.push_back(Vec2{num(i), num(i + 1)});
    return InclusionShape::polygon(pts);
  }
  cfg.fail(e, "unknown shape kind '" + toks[0] + "'");
}

// none | disk cx cy r | polygon x1 y1 ... (absolute coordinates; the polygon
// is re-centered on its centroid and must be star-shaped with respect to it)
inline std::optional<PlacedShape> parse_omega(const RunConfig& cfg,
                                              const std::string& key) {
  if (!cfg.has(key)) return std::nullopt;
  const auto& e = cfg.require(key);
  const auto toks = detail::split_tokens(e.value);
  auto num = [&](std::size_t i) {
    return detail::parse_double(toks[i], cfg.context(), e.line);
  };
  if (toks.empty()) cfg.fail(e, "expected a shape specification");
  if (toks[0] == "none") return std::nullopt;
  if (toks[0] == "disk") {
    if (toks.size() != 4) cfg.fail(e, "usage: disk <cx> <cy> <radius>");
    return PlacedShape{InclusionShape::disk(num(3)), Vec2{num(1), num(2)}, 1.0};
  }
  if (toks[0] == "polygon") {
    if (toks.size() < 7 || toks.size() % 2 == 0)
      cfg.fail(e, "usage: polygon <x1> <y1> ... (at least 3 vertices)");
    std::vector<Vec2> pts;
    for (std::size_t i = 1; i + 1 < toks.size(); i += 2)
      pts.push_back(Vec2{num(i), num(i + 1)});
    Vec2 centroid{0.0, 0.0};
    for (const auto& p : pts) centroid = centroid + p;
    centroid = centroid / static_cast<double>(pts.size());
    for (auto& p : pts) p = p - centroid;
    return PlacedShape{InclusionShape::polygon(pts), centroid, 1.0};
  }
  cfg.fail(e, "unknown shape kind '" + toks[0] + "'");
}

// ---------------------------------------------------------------------------
// Config -> module inputs.
// ---------------------------------------------------------------------------

inline NewtonOptions parse_newton_options(const RunConfig& cfg) {
  NewtonOptions opts;
  opts.tolerance = cfg.get_double("newton.tol", opts.tolerance);
  opts.max_iterations =
      static_cast<int>(cfg.get_int("newton.max_iterations", opts.max_iterations));
  opts.allow_unchecked_materials = cfg.get_bool("material.unchecked", false);
  if (opts.tolerance <= 0.0 || opts.max_iterations < 1)
    throw ConfigError(cfg.context() + ": invalid newton settings");
  return opts;
}

inline ProblemData parse_problem(const RunConfig& cfg) {
  ProblemData data;
  {
    const auto& e = cfg.require("domain.rect");
    const auto toks = detail::split_tokens(e.value);
    if (toks.size() != 4) cfg.fail(e, "expected 'x0 y0 x1 y1'");
    data.domain = Rect{detail::parse_double(toks[0], cfg.context(), e.line),
                       detail::parse_double(toks[1], cfg.context(), e.line),
                       detail::parse_double(toks[2], cfg.context(), e.line),
                       detail::parse_double(toks[3], cfg.context(), e.line)};
    data.domain.validate();
  }
  data.materials.a1 = parse_material(cfg, "material.a1");
  data.materials.a2 = parse_material(cfg, "material.a2");
  data.materials.swap = cfg.get_bool("material.swap", false);
  data.f = cfg.has("source.f") ? parse_scalar_field(cfg, "source.f")
                               : ScalarField([](const Vec2&) { return 0.0; });
  data.u_d = cfg.has("target.u_d") ? parse_scalar_field(cfg, "target.u_d")
                                   : ScalarField([](const Vec2&) { return 0.0; });
  data.weights.a = cfg.get_double("cost.a", 0.0);
  data.weights.b = cfg.get_double("cost.b", 1.0);
  data.weights.validate();
  data.omega = parse_omega(cfg, "subdomain.omega");
  data.h = cfg.get_double("mesh.h", data.h);
  data.interface_factor = cfg.get_double("mesh.interface_factor", data.interface_factor);
  data.perturbation_factor =
      cfg.get_double("mesh.perturbation_factor", data.perturbation_factor);
  if (data.h <= 0.0 || data.interface_factor < 1.0 || data.perturbation_factor < 1.0)
    throw ConfigError(cfg.context() + ": invalid mesh sizing settings");
  data.newton = parse_newton_options(cfg);
  return data;
}

inline CorrectorSettings parse_corrector_settings(const RunConfig& cfg) {
  CorrectorSettings settings;
  settings.shape = cfg.has("inclusion.shape")
                       ? parse_inclusion_shape(cfg, "inclusion.shape")
                       : InclusionShape::disk(1.0);
  settings.radius = cfg.get_double("corrector.radius", settings.radius);
  settings.h_near = cfg.get_double("corrector.h_near", 0.0);
  settings.h_far = cfg.get_double("corrector.h_far", 0.0);
  settings.newton = parse_newton_options(cfg);
  if (settings.radius <= 0.0 || settings.h_near < 0.0 || settings.h_far < 0.0)
    throw ConfigError(cfg.context() + ": invalid corrector settings");
  if (settings.h_far > settings.radius)
    throw ConfigError(cfg.context() + ": corrector.h_far exceeds corrector.radius");
  return settings;
}

// min max count -> evenly spaced values, endpoints included.
inline std::vector<double> parse_axis(const RunConfig& cfg, const std::string& key) {
  const auto& e = cfg.require(key);
  const auto toks = detail::split_tokens(e.value);
  if (toks.size() != 3) cfg.fail(e, "expected 'min max count'");
  const double lo = detail::parse_double(toks[0], cfg.context(), e.line);
  const double hi = detail::parse_double(toks[1], cfg.context(), e.line);
  const long n = detail::parse_int(toks[2], cfg.context(), e.line);
  if (n < 1) cfg.fail(e, "count must be at least 1");
  if (n == 1) return {lo};
  std::vector<double> out;
  for (long i = 0; i < n; ++i)
    out.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1));
  return out;
}

}  // namespace tdt
