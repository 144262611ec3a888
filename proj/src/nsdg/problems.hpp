#pragma once

#include <string>
#include <utility>

#include "nsdg/bcdata.hpp"

namespace nsdg {

// Closed-form benchmark definition. All data callables (boundary values,
// their time derivative, normal viscous traction, pressure) derive from the
// analytic solution.
struct AnalyticProblem {
  std::string id;
  double nu = 1.0;
  Vec2 origin{};
  Vec2 lengths{};
  double end_time = 1.0;
  bool convective = true;
  bool pure_dirichlet = false;
  VectorFunc velocity;
  ScalarFunc pressure;
  VectorFunc dvelocity_dt;
  // (du1/dx1, du1/dx2, du2/dx1, du2/dx2)
  std::function<std::array<double, 4>(const Vec2&, double)> velocity_grad;
  VectorFunc body_force;  // empty means zero
  BoundaryClassifier classifier;

  Mesh make_mesh(int level) const { return Mesh::cartesian(origin, lengths, level, classifier); }
  BcSet bcset() const;
};

// Decaying Stokes flow on [-1,1]^2 with pure Dirichlet boundaries,
// parameters a = 2.883356, nu = 1, lambda = nu (1 + a^2), T = 0.1.
AnalyticProblem stokes_problem();
std::pair<Vec2, double> stokes_solution(const Vec2& x, double t);

// Decaying vortex on [-1/2,1/2]^2 with nu = 0.025, T = 1; each side is split
// by the coordinate axes into an inflow (Dirichlet) and an outflow (Neumann)
// half.
AnalyticProblem vortex_problem();
std::pair<Vec2, double> vortex_solution(const Vec2& x, double t);

// Relative L2 error at time t, integrated with (k+3)-point Gauss rules so the
// result is not polluted by quadrature error. Throws on a zero-norm exact
// solution.
double relative_l2_error(const CoefficientField& field, const VectorFunc& exact, double t,
                         int nq_override = 0);
double relative_l2_error(const CoefficientField& field, const ScalarFunc& exact, double t,
                         int nq_override = 0);

// log(e1/e2) / log(h1/h2)
double convergence_rate(double e1, double e2, double h1, double h2);

}  // namespace nsdg
