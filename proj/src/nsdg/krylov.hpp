#pragma once

#include <functional>
#include <stdexcept>

#include <Eigen/Dense>

namespace nsdg {

using LinearOp = std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct SolveSpec {
  double rtol = 1e-8;
  double atol = 1e-12;
  int max_iter = 100000;
  int restart = 60;
  // Projects iterates onto the complement of the operator nullspace (for the
  // singular pure-Neumann pressure Poisson problem and the pure-Dirichlet
  // saddle system). Unset means the operator is regular.
  std::function<void(Eigen::VectorXd&)> project;
  bool throw_on_max_iter = true;
};

struct SolveResult {
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

class SolverError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Subtracts the mean of the coefficient vector; idempotent.
void nullspace_project(Eigen::VectorXd& v);

// Preconditioned conjugate gradients for SPD operators. x carries the initial
// guess. Stops at ||r|| <= max(rtol * ||r_0||, atol) on the recurrence
// residual; throws on negative curvature or on exceeding max_iter.
SolveResult cg_solve(const LinearOp& apply, const Eigen::VectorXd& rhs, Eigen::VectorXd& x,
                     const SolveSpec& spec, const LinearOp* precond = nullptr);

// Restarted GMRES with optional right preconditioning (flexible, so the
// preconditioner may itself be an inner iteration). Stops on the Givens
// residual estimate; throws if a full restart cycle makes no progress.
SolveResult gmres_solve(const LinearOp& apply, const Eigen::VectorXd& rhs, Eigen::VectorXd& x,
                        const SolveSpec& spec, const LinearOp* precond = nullptr);

// Newton iteration: residual(x, r) fills r = R(x); solve_linearized(x, r, dx)
// solves J(x) dx = r. Update is x -= dx. Throws when the residual grows over
// a window of iterations or max_iter is hit.
using ResidualFn = std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>;
using LinearizedSolveFn =
    std::function<void(const Eigen::VectorXd&, const Eigen::VectorXd&, Eigen::VectorXd&)>;

SolveResult newton_solve(const ResidualFn& residual, const LinearizedSolveFn& solve_linearized,
                         Eigen::VectorXd& x, const SolveSpec& spec, int max_newton_iter = 30);

}  // namespace nsdg
