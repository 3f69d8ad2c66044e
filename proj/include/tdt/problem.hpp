#pragma once

// Problem plumbing shared by the derivative evaluation and the verification
// studies: a transmission-problem description with analytic source/target
// callbacks (so the same problem can be re-interpolated on every study mesh),
// plus state/adjoint convenience solvers.

#include <functional>
#include <memory>
#include <optional>

#include "tdt/geometry.hpp"
#include "tdt/materials.hpp"
#include "tdt/mesh.hpp"
#include "tdt/pde.hpp"

namespace tdt {

using ScalarField = std::function<double(const Vec2&)>;

struct ProblemData {
  Rect domain;
  TwoPhaseMaterial materials;
  ScalarField f = [](const Vec2&) { return 0.0; };
  ScalarField u_d = [](const Vec2&) { return 0.0; };
  CostWeights weights;
  std::optional<PlacedShape> omega;  // fixed subdomain Omega (phase 1), if any
  double h = 0.05;
  double interface_factor = 3.0;
  double perturbation_factor = 8.0;
  NewtonOptions newton;
};

inline HoldallSpec holdall_spec(const ProblemData& data,
                                const std::optional<PlacedShape>& perturbation = {}) {
  HoldallSpec spec;
  spec.domain = data.domain;
  spec.h = data.h;
  spec.omega = data.omega;
  spec.perturbation = perturbation;
  spec.interface_factor = data.interface_factor;
  spec.perturbation_factor = data.perturbation_factor;
  return spec;
}

inline std::shared_ptr<const Mesh> build_state_mesh(const ProblemData& data) {
  return std::make_shared<const Mesh>(generate_holdall_mesh(holdall_spec(data)));
}

struct StateSolution {
  std::shared_ptr<const Mesh> mesh;
  FeField u0;
  FeField p0;
  std::vector<double> load;
  FeField u_d_field;
  double cost = 0.0;
};

// Solves the unperturbed state and its adjoint on the given mesh.
inline StateSolution solve_state_and_adjoint(const ProblemData& data,
                                             std::shared_ptr<const Mesh> mesh,
                                             NewtonReport* report = nullptr) {
  StateSolution s;
  s.mesh = mesh;
  const FeField f_field = interpolate(mesh, data.f);
  s.u_d_field = interpolate(mesh, data.u_d);
  s.load = assemble_load(*mesh, f_field.values);
  const PhaseMapping pm = PhaseMapping::standard(data.materials);
  s.u0 = newton_solve(mesh, pm, s.load, data.newton, report);
  s.p0 = solve_adjoint(s.u0, pm, s.u_d_field, data.weights);
  s.cost = eval_cost(s.u0, s.u_d_field, data.weights);
  return s;
}

// Perturbed/unperturbed state pair on one mesh that resolves omega_eps(z):
// identical triangulation, only the material inside the inclusion region is
// toggled. insertion_branch distinguishes z in the complement (inserting
// phase 1) from z inside Omega (removing it, i.e. inserting phase 2).
struct StatePair {
  std::shared_ptr<const Mesh> mesh;
  FeField u_perturbed;
  FeField u_unperturbed;
  double j_perturbed = 0.0;
  double j_unperturbed = 0.0;
  bool insertion_branch = true;
};

inline StatePair solve_state_pair(const ProblemData& data, const PlacedShape& pert) {
  const bool insertion = !(data.omega && data.omega->contains(pert.center));
  auto mesh = std::make_shared<const Mesh>(
      generate_holdall_mesh(holdall_spec(data, pert)));
  const FeField f_field = interpolate(mesh, data.f);
  const FeField ud_field = interpolate(mesh, data.u_d);
  const auto load = assemble_load(*mesh, f_field.values);

  StatePair out;
  out.mesh = mesh;
  out.insertion_branch = insertion;
  const PhaseMapping pm_on =
      PhaseMapping::perturbation(data.materials, /*inclusion_active=*/true, insertion);
  const PhaseMapping pm_off =
      PhaseMapping::perturbation(data.materials, /*inclusion_active=*/false, insertion);
  out.u_perturbed = newton_solve(mesh, pm_on, load, data.newton);
  out.u_unperturbed = newton_solve(mesh, pm_off, load, data.newton);
  out.j_perturbed = eval_cost(out.u_perturbed, ud_field, data.weights);
  out.j_unperturbed = eval_cost(out.u_unperturbed, ud_field, data.weights);
  return out;
}

}  // namespace tdt
