#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "nsdg/dofspace.hpp"
#include "nsdg/problems.hpp"
#include "support/oracles.hpp"

using namespace nsdg;

TEST_CASE("interpolation of simple fields") {
  const Mesh mesh = Mesh::cartesian({0, 0}, {1, 1}, 0, all_dirichlet());
  const Space s1(mesh, 1, 1);

  const CoefficientField zero = interpolate(s1, ScalarFunc([](const Vec2&, double) { return 0.0; }), 0.0);
  CHECK(zero.coeffs.cwiseAbs().maxCoeff() == 0.0);

  // f(x) = x1 on a k=1 space: coefficients equal the node x-coordinates
  const CoefficientField fx =
      interpolate(s1, ScalarFunc([](const Vec2& x, double) { return x[0]; }), 0.0);
  CHECK(fx.coeffs(s1.dof_index(0, 0, 0, 0)) == doctest::Approx(0.0));
  CHECK(fx.coeffs(s1.dof_index(0, 0, 1, 0)) == doctest::Approx(1.0));
  CHECK(fx.coeffs(s1.dof_index(0, 0, 1, 1)) == doctest::Approx(1.0));

  CHECK_THROWS_AS(
      interpolate(s1, ScalarFunc([](const Vec2&, double) { return std::nan(""); }), 0.0),
      std::domain_error);
}

TEST_CASE("vortex velocity interpolates to (0,1) at (1/4, 0)") {
  const AnalyticProblem prob = vortex_problem();
  const Mesh mesh = prob.make_mesh(2);
  const Space su(mesh, 4, 2);
  const CoefficientField u = interpolate(su, prob.velocity, 0.0);
  CHECK(value_at(u, {0.25, 0.0}, 0) == doctest::Approx(0.0).epsilon(1e-11));
  CHECK(value_at(u, {0.25, 0.0}, 1) == doctest::Approx(1.0).epsilon(1e-11));
}

TEST_CASE("eval_on_quad: constants, gradients, measures") {
  const Mesh mesh = Mesh::cartesian({0, 0}, {1, 1}, 1, all_dirichlet());
  const Space s(mesh, 2, 1);
  const QuadRule1D rule = gauss_rule(3);

  const CoefficientField c = interpolate(s, ScalarFunc([](const Vec2&, double) { return 3.5; }), 0.0);
  const ElementValues cv = eval_on_quad(c, 0, rule);
  CHECK(cv.value[0].maxCoeff() == doctest::Approx(3.5).epsilon(1e-14));
  CHECK(cv.grad_x[0].cwiseAbs().maxCoeff() < 1e-12);
  CHECK(cv.grad_y[0].cwiseAbs().maxCoeff() < 1e-12);

  const CoefficientField q =
      interpolate(s, ScalarFunc([](const Vec2& x, double) { return x[0] * x[0]; }), 0.0);
  const ElementValues qv = eval_on_quad(q, 1, rule);
  for (int qx = 0; qx < 3; ++qx) {
    for (int qy = 0; qy < 3; ++qy) {
      const double x1 = 0.5 + 0.5 * rule.points[qx];  // element 1 spans [0.5,1]x[0,0.5]
      CHECK(qv.grad_x[0](qx, qy) == doctest::Approx(2.0 * x1).epsilon(1e-12));
    }
  }

  // quadrature measure: sum of weights times the Jacobian is the element area
  const Vec2 h = mesh.element_size();
  double area = 0.0;
  for (int qx = 0; qx < 3; ++qx)
    for (int qy = 0; qy < 3; ++qy) area += h[0] * h[1] * rule.weights[qx] * rule.weights[qy];
  CHECK(area == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("traces of a globally continuous interpolant agree across faces") {
  const Mesh mesh = Mesh::cartesian({0, 0}, {1, 1}, 1, all_dirichlet());
  const Space s(mesh, 3, 1);
  const CoefficientField f = interpolate(
      s, ScalarFunc([](const Vec2& x, double) { return x[0] * x[0] * x[1] + 2.0 * x[1]; }), 0.0);
  const QuadRule1D rule = gauss_rule(4);
  for (const InteriorFace& face : mesh.interior_faces()) {
    const FaceValues minus = trace_on_face(f, face.elem_minus, face.face_minus, rule);
    const FaceValues plus = trace_on_face(f, face.elem_plus, face.face_plus, rule);
    // equal traces: zero jump, and the average equals either trace
    CHECK((minus.value[0] - plus.value[0]).cwiseAbs().maxCoeff() < 1e-13);
    const Eigen::VectorXd avg = 0.5 * (minus.value[0] + plus.value[0]);
    CHECK((avg - minus.value[0]).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("interpolation is a projection on fields already in the space") {
  const Mesh mesh = Mesh::cartesian({-1, -1}, {2, 2}, 1, all_dirichlet());
  const Space s(mesh, 3, 1);
  testsupport::Rng rng(7);
  double c[4][4];
  for (auto& row : c)
    for (double& v : row) v = rng.uniform();
  auto poly = [&c](const Vec2& x, double) {
    double acc = 0.0;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) acc += c[i][j] * std::pow(x[0], i) * std::pow(x[1], j);
    return acc;
  };
  const CoefficientField f = interpolate(s, ScalarFunc(poly), 0.0);
  // evaluate-then-interpolate reproduces the coefficients
  auto eval = [&](const Vec2& x, double) { return value_at(f, x); };
  const CoefficientField g = interpolate(s, ScalarFunc(eval), 0.0);
  CHECK((g.coeffs - f.coeffs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("2d tensor evaluation equals the product of 1d evaluations") {
  const Mesh mesh = Mesh::cartesian({0, 0}, {1, 1}, 0, all_dirichlet());
  const Space s(mesh, 4, 1);
  const Basis1D& basis = s.basis();
  testsupport::Rng rng(21);
  CoefficientField f(s);
  f.coeffs = rng.vector(f.coeffs.size());
  const int n = s.nodes_1d();
  for (int trial = 0; trial < 20; ++trial) {
    const double x = 0.5 * (rng.uniform() + 1.0);
    const double y = 0.5 * (rng.uniform() + 1.0);
    const Eigen::VectorXd vx = basis.values_at(x);
    const Eigen::VectorXd vy = basis.values_at(y);
    double direct = 0.0;
    for (int iy = 0; iy < n; ++iy)
      for (int ix = 0; ix < n; ++ix)
        direct += vx(ix) * vy(iy) * f.coeffs(s.dof_index(0, 0, ix, iy));
    CHECK(value_at(f, {x, y}) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("csv dump writes the expected header and plot grid") {
  const Mesh mesh = Mesh::cartesian({0, 0}, {1, 1}, 0, all_dirichlet());
  const Space s(mesh, 1, 1);
  const CoefficientField f =
      interpolate(s, ScalarFunc([](const Vec2& x, double) { return x[0]; }), 0.0);
  const std::string path = "test_dump.csv";
  dump_csv(f, path, 3);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "x1,x2,component,value");
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 9);
  std::remove(path.c_str());
}
