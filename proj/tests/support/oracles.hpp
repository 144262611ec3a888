#pragma once

#include <cmath>
#include <functional>
#include <random>

#include <Eigen/Dense>

#include "nsdg/krylov.hpp"

namespace testsupport {

// Bisection root finder, independent of the Newton iterations in the library.
inline double bisect(const std::function<double(double)>& f, double a, double b,
                     double tol = 1e-15) {
  double fa = f(a);
  for (int it = 0; it < 200; ++it) {
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    if ((fa < 0.0) == (fm < 0.0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
    if (b - a < tol) break;
  }
  return 0.5 * (a + b);
}

// Sixth-order central finite differences of a scalar function of one variable.
inline double fd_derivative(const std::function<double(double)>& f, double x, double h = 5e-3) {
  return (-f(x - 3 * h) + 9 * f(x - 2 * h) - 45 * f(x - h) + 45 * f(x + h) - 9 * f(x + 2 * h) +
          f(x + 3 * h)) /
         (60.0 * h);
}

inline double fd_second_derivative(const std::function<double(double)>& f, double x,
                                   double h = 1e-2) {
  return (2 * f(x - 3 * h) - 27 * f(x - 2 * h) + 270 * f(x - h) - 490 * f(x) + 270 * f(x + h) -
          27 * f(x + 2 * h) + 2 * f(x + 3 * h)) /
         (180.0 * h * h);
}

// Deterministic uniform numbers in [-1, 1].
class Rng {
public:
  explicit Rng(unsigned seed) : gen_(seed) {}
  double uniform() { return 2.0 * ((gen_() >> 11) * (1.0 / 9007199254740992.0)) - 1.0; }
  Eigen::VectorXd vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = uniform();
    return v;
  }

private:
  std::mt19937_64 gen_;
};

// Dense matrix of a linear operator, column by column.
inline Eigen::MatrixXd assemble_matrix(const nsdg::LinearOp& apply, Eigen::Index rows,
                                       Eigen::Index cols) {
  Eigen::MatrixXd out(rows, cols);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(cols), col(rows);
  for (Eigen::Index j = 0; j < cols; ++j) {
    e.setZero();
    e(j) = 1.0;
    apply(e, col);
    out.col(j) = col;
  }
  return out;
}

}  // namespace testsupport
