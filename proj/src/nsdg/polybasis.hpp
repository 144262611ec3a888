#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace nsdg {

// Legendre value and first/second derivative at x in [-1,1].
struct LegendreEval {
  double p;
  double dp;
  double ddp;
};
LegendreEval legendre_eval(int degree, double x);

// The k+1 Legendre-Gauss-Lobatto nodes on [0,1], ascending. Requires k >= 1;
// a constant basis (k = 0) is not supported.
std::vector<double> lgl_nodes(int degree);

// Gauss-Legendre rule on [0,1]. Weights are positive and sum to one; the rule
// integrates polynomials up to degree 2*n - 1 exactly.
struct QuadRule1D {
  std::vector<double> points;
  std::vector<double> weights;
  int size() const { return static_cast<int>(points.size()); }
};
QuadRule1D gauss_rule(int n_points);

// Nodal Lagrange basis on the LGL nodes of [0,1]. Evaluation uses the
// barycentric form, which stays well conditioned at high degree.
class Basis1D {
public:
  explicit Basis1D(int degree);

  int degree() const { return degree_; }
  int size() const { return degree_ + 1; }
  const std::vector<double>& nodes() const { return nodes_; }

  // values[i] = l_i(x), derivs[i] = l_i'(x). x may lie outside [0,1].
  void eval(double x, std::span<double> values, std::span<double> derivs) const;

  Eigen::VectorXd values_at(double x) const;
  Eigen::VectorXd derivs_at(double x) const;

  // diff(i,j) = l_j'(node_i)
  const Eigen::MatrixXd& diff_matrix() const { return diff_; }

private:
  int degree_;
  std::vector<double> nodes_;
  std::vector<double> bary_;
  Eigen::MatrixXd diff_;
};

// Basis tabulated on a quadrature rule, plus endpoint traces.
struct BasisTable {
  Eigen::MatrixXd val;  // n_q x (k+1)
  Eigen::MatrixXd der;  // n_q x (k+1)
  Eigen::VectorXd val0, val1;  // l_i(0), l_i(1)
  Eigen::VectorXd der0, der1;  // l_i'(0), l_i'(1)
};
BasisTable tabulate(const Basis1D& basis, const QuadRule1D& rule);

}  // namespace nsdg
