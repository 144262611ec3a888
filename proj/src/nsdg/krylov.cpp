#include "nsdg/krylov.hpp"

#include <cmath>

namespace nsdg {

void nullspace_project(Eigen::VectorXd& v) {
  v.array() -= v.mean();
}

SolveResult cg_solve(const LinearOp& apply, const Eigen::VectorXd& rhs, Eigen::VectorXd& x,
                     const SolveSpec& spec, const LinearOp* precond) {
  const Eigen::Index n = rhs.size();
  Eigen::VectorXd b = rhs;
  if (spec.project) {
    spec.project(b);
    spec.project(x);
  }
  Eigen::VectorXd r(n), z(n), p(n), Ap(n);
  apply(x, Ap);
  r = b - Ap;
  if (spec.project) spec.project(r);
  const double r0 = r.norm();
  const double target = std::max(spec.rtol * r0, spec.atol);
  SolveResult res;
  res.residual = r0;
  if (r0 <= target) {
    res.converged = true;
    return res;
  }
  if (precond) {
    (*precond)(r, z);
    if (spec.project) spec.project(z);
  } else {
    z = r;
  }
  p = z;
  double rz = r.dot(z);
  for (int it = 1; it <= spec.max_iter; ++it) {
    apply(p, Ap);
    const double pAp = p.dot(Ap);
    if (pAp <= 0.0) throw SolverError("cg_solve: operator not positive definite");
    const double alpha = rz / pAp;
    x += alpha * p;
    r -= alpha * Ap;
    if (spec.project) spec.project(r);
    res.iterations = it;
    res.residual = r.norm();
    if (res.residual <= target) {
      if (spec.project) spec.project(x);
      res.converged = true;
      return res;
    }
    if (precond) {
      (*precond)(r, z);
      if (spec.project) spec.project(z);
    } else {
      z = r;
    }
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  if (spec.throw_on_max_iter) throw SolverError("cg_solve: max iterations exceeded");
  if (spec.project) spec.project(x);
  return res;
}

SolveResult gmres_solve(const LinearOp& apply, const Eigen::VectorXd& rhs, Eigen::VectorXd& x,
                        const SolveSpec& spec, const LinearOp* precond) {
  const Eigen::Index n = rhs.size();
  const int m = std::max(1, spec.restart);
  Eigen::VectorXd b = rhs;
  if (spec.project) {
    spec.project(b);
    spec.project(x);
  }
  Eigen::VectorXd r(n), w(n);
  Eigen::MatrixXd V(n, m + 1), Z(n, m);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m);
  Eigen::VectorXd cs(m), sn(m), g(m + 1);

  apply(x, w);
  r = b - w;
  if (spec.project) spec.project(r);
  const double r0 = r.norm();
  const double target = std::max(spec.rtol * r0, spec.atol);
  SolveResult res;
  res.residual = r0;
  if (r0 <= target) {
    res.converged = true;
    return res;
  }

  int total_it = 0;
  double cycle_start = r0;
  while (total_it < spec.max_iter) {
    double beta = r.norm();
    V.col(0) = r / beta;
    g.setZero();
    g(0) = beta;
    int j = 0;
    bool inner_converged = false;
    for (; j < m && total_it < spec.max_iter; ++j, ++total_it) {
      if (precond) {
        (*precond)(V.col(j), w);
        if (spec.project) spec.project(w);
        Z.col(j) = w;
      } else {
        Z.col(j) = V.col(j);
      }
      apply(Z.col(j), w);
      if (spec.project) spec.project(w);
      for (int i = 0; i <= j; ++i) {
        H(i, j) = w.dot(V.col(i));
        w -= H(i, j) * V.col(i);
      }
      H(j + 1, j) = w.norm();
      if (H(j + 1, j) > 0.0) V.col(j + 1) = w / H(j + 1, j);
      // Givens rotations
      for (int i = 0; i < j; ++i) {
        const double t = cs(i) * H(i, j) + sn(i) * H(i + 1, j);
        H(i + 1, j) = -sn(i) * H(i, j) + cs(i) * H(i + 1, j);
        H(i, j) = t;
      }
      const double denom = std::hypot(H(j, j), H(j + 1, j));
      if (denom == 0.0) { ++j; ++total_it; break; }
      cs(j) = H(j, j) / denom;
      sn(j) = H(j + 1, j) / denom;
      H(j, j) = denom;
      H(j + 1, j) = 0.0;
      g(j + 1) = -sn(j) * g(j);
      g(j) = cs(j) * g(j);
      res.residual = std::abs(g(j + 1));
      res.iterations = total_it + 1;
      if (res.residual <= target) {
        ++j;
        ++total_it;
        inner_converged = true;
        break;
      }
    }
    // x += Z y with H(0:j,0:j) y = g(0:j)
    if (j > 0) {
      const Eigen::VectorXd y =
          H.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(g.head(j));
      x += Z.leftCols(j) * y;
    }
    if (inner_converged) {
      if (spec.project) spec.project(x);
      res.converged = true;
      return res;
    }
    apply(x, w);
    r = b - w;
    if (spec.project) spec.project(r);
    const double rn = r.norm();
    res.residual = rn;
    if (rn <= target) {
      if (spec.project) spec.project(x);
      res.converged = true;
      return res;
    }
    if (rn >= cycle_start * (1.0 - 1e-12))
      throw SolverError("gmres_solve: stagnation across a restart cycle");
    cycle_start = rn;
  }
  if (spec.throw_on_max_iter) throw SolverError("gmres_solve: max iterations exceeded");
  return res;
}

SolveResult newton_solve(const ResidualFn& residual, const LinearizedSolveFn& solve_linearized,
                         Eigen::VectorXd& x, const SolveSpec& spec, int max_newton_iter) {
  Eigen::VectorXd r(x.size()), dx(x.size());
  residual(x, r);
  const double r0 = r.norm();
  const double target = std::max(spec.rtol * r0, spec.atol);
  SolveResult res;
  res.residual = r0;
  double best = r0;
  int grew = 0;
  for (int it = 0; it < max_newton_iter; ++it) {
    if (res.residual <= target) {
      res.converged = true;
      return res;
    }
    solve_linearized(x, r, dx);
    x -= dx;
    residual(x, r);
    res.residual = r.norm();
    res.iterations = it + 1;
    if (res.residual < best) {
      best = res.residual;
      grew = 0;
    } else if (++grew >= 4) {
      throw SolverError("newton_solve: residual stopped decreasing");
    }
    if (!std::isfinite(res.residual) || res.residual > 1e8 * std::max(1.0, r0))
      throw SolverError("newton_solve: divergence");
  }
  if (res.residual <= target) {
    res.converged = true;
    return res;
  }
  throw SolverError("newton_solve: max iterations exceeded");
}

}  // namespace nsdg
