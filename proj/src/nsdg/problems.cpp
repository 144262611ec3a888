#include "nsdg/problems.hpp"

#include <cmath>
#include <stdexcept>

namespace nsdg {

BcSet AnalyticProblem::bcset() const {
  BcSet bc;
  bc.g_u = velocity;
  bc.dg_u_dt = dvelocity_dt;
  bc.h_u = [nu = nu, grad = velocity_grad](const Vec2& x, double t, const Vec2& n) {
    const std::array<double, 4> g = grad(x, t);
    return Vec2{nu * (g[0] * n[0] + g[1] * n[1]), nu * (g[2] * n[0] + g[3] * n[1])};
  };
  bc.g_p = pressure;
  bc.body_force = body_force;
  bc.nu = nu;
  bc.convective_on = convective;
  bc.pure_dirichlet = pure_dirichlet;
  return bc;
}

std::pair<Vec2, double> stokes_solution(const Vec2& x, double t) {
  constexpr double a = 2.883356;
  constexpr double nu = 1.0;
  const double lambda = nu * (1.0 + a * a);
  const double e = std::exp(-lambda * t);
  const double ca = std::cos(a);
  const Vec2 u{std::sin(x[0]) * (a * std::sin(a * x[1]) - ca * std::sinh(x[1])) * e,
               std::cos(x[0]) * (std::cos(a * x[1]) + ca * std::cosh(x[1])) * e};
  const double p = lambda * ca * std::cos(x[0]) * std::sinh(x[1]) * e;
  return {u, p};
}

AnalyticProblem stokes_problem() {
  constexpr double a = 2.883356;
  constexpr double nu = 1.0;
  const double lambda = nu * (1.0 + a * a);

  AnalyticProblem prob;
  prob.id = "stokes";
  prob.nu = nu;
  prob.origin = {-1.0, -1.0};
  prob.lengths = {2.0, 2.0};
  prob.end_time = 0.1;
  prob.convective = false;
  prob.pure_dirichlet = true;
  prob.velocity = [](const Vec2& x, double t) { return stokes_solution(x, t).first; };
  prob.pressure = [](const Vec2& x, double t) { return stokes_solution(x, t).second; };
  prob.dvelocity_dt = [lambda](const Vec2& x, double t) {
    const Vec2 u = stokes_solution(x, t).first;
    return Vec2{-lambda * u[0], -lambda * u[1]};
  };
  prob.velocity_grad = [lambda](const Vec2& x, double t) {
    const double e = std::exp(-lambda * t);
    const double ca = std::cos(a);
    const double s1 = std::sin(x[0]), c1 = std::cos(x[0]);
    const double f = a * std::sin(a * x[1]) - ca * std::sinh(x[1]);
    const double fp = a * a * std::cos(a * x[1]) - ca * std::cosh(x[1]);
    const double g = std::cos(a * x[1]) + ca * std::cosh(x[1]);
    const double gp = -a * std::sin(a * x[1]) + ca * std::sinh(x[1]);
    return std::array<double, 4>{c1 * f * e, s1 * fp * e, -s1 * g * e, c1 * gp * e};
  };
  prob.classifier = all_dirichlet();
  return prob;
}

std::pair<Vec2, double> vortex_solution(const Vec2& x, double t) {
  constexpr double nu = 0.025;
  const double pi = M_PI;
  const double eu = std::exp(-4.0 * nu * pi * pi * t);
  const double ep = std::exp(-8.0 * nu * pi * pi * t);
  const Vec2 u{-std::sin(2.0 * pi * x[1]) * eu, std::sin(2.0 * pi * x[0]) * eu};
  const double p = -std::cos(2.0 * pi * x[0]) * std::cos(2.0 * pi * x[1]) * ep;
  return {u, p};
}

AnalyticProblem vortex_problem() {
  constexpr double nu = 0.025;
  const double pi = M_PI;

  AnalyticProblem prob;
  prob.id = "vortex";
  prob.nu = nu;
  prob.origin = {-0.5, -0.5};
  prob.lengths = {1.0, 1.0};
  prob.end_time = 1.0;
  prob.convective = true;
  prob.pure_dirichlet = false;
  prob.velocity = [](const Vec2& x, double t) { return vortex_solution(x, t).first; };
  prob.pressure = [](const Vec2& x, double t) { return vortex_solution(x, t).second; };
  prob.dvelocity_dt = [nu, pi](const Vec2& x, double t) {
    const Vec2 u = vortex_solution(x, t).first;
    const double c = -4.0 * nu * pi * pi;
    return Vec2{c * u[0], c * u[1]};
  };
  prob.velocity_grad = [nu, pi](const Vec2& x, double t) {
    const double eu = std::exp(-4.0 * nu * pi * pi * t);
    return std::array<double, 4>{0.0, -2.0 * pi * std::cos(2.0 * pi * x[1]) * eu,
                                 2.0 * pi * std::cos(2.0 * pi * x[0]) * eu, 0.0};
  };
  prob.classifier =
      inflow_dirichlet([](const Vec2& x) { return vortex_solution(x, 0.0).first; });
  return prob;
}

namespace {

template <typename EvalExact>
double relative_l2_impl(const CoefficientField& field, const EvalExact& exact, double t, int nq) {
  const Space& S = *field.space;
  const Mesh& mesh = S.mesh();
  const QuadRule1D rule = gauss_rule(nq);
  const BasisTable tab = tabulate(S.basis(), rule);
  const Vec2 h = mesh.element_size();
  const double area = h[0] * h[1];
  const int n = S.nodes_1d();
  double num = 0.0, den = 0.0;
  Eigen::MatrixXd vals(nq, nq), t1(nq, n);
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const Vec2 o = mesh.element_origin(e);
    for (int c = 0; c < S.components(); ++c) {
      Eigen::Map<const Eigen::MatrixXd> C(field.data() + S.dof_index(e, c, 0, 0), n, n);
      t1.noalias() = tab.val * C;
      vals.noalias() = t1 * tab.val.transpose();
      for (int qy = 0; qy < nq; ++qy) {
        for (int qx = 0; qx < nq; ++qx) {
          const Vec2 x{o[0] + h[0] * rule.points[qx], o[1] + h[1] * rule.points[qy]};
          const double w = area * rule.weights[qx] * rule.weights[qy];
          const double ex = exact(x, t, c);
          const double d = ex - vals(qx, qy);
          num += w * d * d;
          den += w * ex * ex;
        }
      }
    }
  }
  if (den <= 0.0) throw std::domain_error("relative_l2_error: exact solution has zero norm");
  return std::sqrt(num / den);
}

}  // namespace

double relative_l2_error(const CoefficientField& field, const VectorFunc& exact, double t,
                         int nq_override) {
  const int nq = nq_override > 0 ? nq_override : field.space->degree() + 3;
  return relative_l2_impl(
      field, [&exact](const Vec2& x, double tt, int c) { return exact(x, tt)[c]; }, t, nq);
}

double relative_l2_error(const CoefficientField& field, const ScalarFunc& exact, double t,
                         int nq_override) {
  const int nq = nq_override > 0 ? nq_override : field.space->degree() + 3;
  return relative_l2_impl(
      field, [&exact](const Vec2& x, double tt, int) { return exact(x, tt); }, t, nq);
}

double convergence_rate(double e1, double e2, double h1, double h2) {
  if (e1 <= 0.0 || e2 <= 0.0 || h1 <= 0.0 || h2 <= 0.0)
    throw std::invalid_argument("convergence_rate: inputs must be positive");
  return std::log(e1 / e2) / std::log(h1 / h2);
}

}  // namespace nsdg
