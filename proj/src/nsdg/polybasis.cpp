#include "nsdg/polybasis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nsdg {

LegendreEval legendre_eval(int degree, double x) {
  // Three-term recurrence for P_n and its derivatives.
  double p0 = 1.0, p1 = x;
  double d0 = 0.0, d1 = 1.0;
  double s0 = 0.0, s1 = 0.0;
  if (degree == 0) return {p0, d0, s0};
  for (int n = 1; n < degree; ++n) {
    const double a = (2.0 * n + 1.0) / (n + 1.0);
    const double b = static_cast<double>(n) / (n + 1.0);
    const double p2 = a * x * p1 - b * p0;
    const double d2 = a * (p1 + x * d1) - b * d0;
    const double s2 = a * (2.0 * d1 + x * s1) - b * s0;
    p0 = p1; p1 = p2;
    d0 = d1; d1 = d2;
    s0 = s1; s1 = s2;
  }
  return {p1, d1, s1};
}

std::vector<double> lgl_nodes(int degree) {
  if (degree < 1) throw std::invalid_argument("lgl_nodes: degree must be >= 1");
  const int k = degree;
  std::vector<double> x(k + 1);
  x[0] = -1.0;
  x[k] = 1.0;
  // Interior nodes are the roots of P_k'. Newton iteration started from the
  // Chebyshev-Lobatto points; the initial guesses are symmetric, and the
  // result is symmetrized explicitly below.
  for (int j = 1; j < k; ++j) {
    double xi = std::cos(M_PI * j / k);
    for (int it = 0; it < 100; ++it) {
      const LegendreEval e = legendre_eval(k, xi);
      const double dx = e.dp / e.ddp;
      xi -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    x[k - j] = xi;
  }
  for (int j = 0; 2 * j <= k; ++j) {
    const double s = 0.5 * (x[j] - x[k - j]);
    x[j] = s;
    x[k - j] = -s;
  }
  std::vector<double> mapped(k + 1);
  for (int j = 0; j <= k; ++j) mapped[j] = 0.5 * (x[j] + 1.0);
  mapped.front() = 0.0;
  mapped.back() = 1.0;
  return mapped;
}

QuadRule1D gauss_rule(int n_points) {
  if (n_points < 1) throw std::invalid_argument("gauss_rule: need at least one point");
  const int n = n_points;
  QuadRule1D rule;
  rule.points.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    // Root of P_n near the i-th Chebyshev point, refined by Newton.
    double xi = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      const LegendreEval e = legendre_eval(n, xi);
      const double dx = e.p / e.dp;
      xi -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    const LegendreEval e = legendre_eval(n, xi);
    const double w = 2.0 / ((1.0 - xi * xi) * e.dp * e.dp);
    rule.points[n - 1 - i] = 0.5 * (xi + 1.0);
    rule.weights[n - 1 - i] = 0.5 * w;
  }
  // Symmetrize to remove the last bits of Newton noise.
  for (int i = 0; 2 * i < n; ++i) {
    const int j = n - 1 - i;
    const double p = 0.5 * (rule.points[i] + (1.0 - rule.points[j]));
    rule.points[i] = p;
    rule.points[j] = 1.0 - p;
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.weights[i] = w;
    rule.weights[j] = w;
  }
  return rule;
}

Basis1D::Basis1D(int degree) : degree_(degree), nodes_(lgl_nodes(degree)) {
  const int n = degree_ + 1;
  bary_.assign(n, 1.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j != i) bary_[i] /= (nodes_[i] - nodes_[j]);
    }
  }
  diff_.resize(n, n);
  for (int i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      diff_(i, j) = (bary_[j] / bary_[i]) / (nodes_[i] - nodes_[j]);
      row_sum += diff_(i, j);
    }
    diff_(i, i) = -row_sum;
  }
}

void Basis1D::eval(double x, std::span<double> values, std::span<double> derivs) const {
  const int n = degree_ + 1;
  int hit = -1;
  for (int i = 0; i < n; ++i) {
    if (std::abs(x - nodes_[i]) < 1e-14) { hit = i; break; }
  }
  if (hit >= 0) {
    for (int i = 0; i < n; ++i) values[i] = (i == hit) ? 1.0 : 0.0;
    if (!derivs.empty()) {
      for (int j = 0; j < n; ++j) derivs[j] = diff_(hit, j);
    }
    return;
  }
  double denom = 0.0;
  for (int i = 0; i < n; ++i) {
    values[i] = bary_[i] / (x - nodes_[i]);
    denom += values[i];
  }
  for (int i = 0; i < n; ++i) values[i] /= denom;
  if (!derivs.empty()) {
    // l_j' has degree k-1, so it is reproduced exactly by interpolation at
    // the nodes: l_j'(x) = sum_i l_j'(x_i) l_i(x).
    for (int j = 0; j < n; ++j) {
      double d = 0.0;
      for (int i = 0; i < n; ++i) d += values[i] * diff_(i, j);
      derivs[j] = d;
    }
  }
}

Eigen::VectorXd Basis1D::values_at(double x) const {
  Eigen::VectorXd v(size());
  eval(x, {v.data(), static_cast<size_t>(v.size())}, {});
  return v;
}

Eigen::VectorXd Basis1D::derivs_at(double x) const {
  Eigen::VectorXd v(size()), d(size());
  eval(x, {v.data(), static_cast<size_t>(v.size())}, {d.data(), static_cast<size_t>(d.size())});
  return d;
}

BasisTable tabulate(const Basis1D& basis, const QuadRule1D& rule) {
  const int n = basis.size();
  const int nq = rule.size();
  BasisTable t;
  t.val.resize(nq, n);
  t.der.resize(nq, n);
  std::vector<double> v(n), d(n);
  for (int q = 0; q < nq; ++q) {
    basis.eval(rule.points[q], v, d);
    for (int i = 0; i < n; ++i) {
      t.val(q, i) = v[i];
      t.der(q, i) = d[i];
    }
  }
  t.val0 = basis.values_at(0.0);
  t.val1 = basis.values_at(1.0);
  t.der0 = basis.derivs_at(0.0);
  t.der1 = basis.derivs_at(1.0);
  return t;
}

}  // namespace nsdg
