#include <doctest.h>

#include <cmath>

#include "nsdg/operators.hpp"
#include "nsdg/problems.hpp"
#include "support/oracles.hpp"

using namespace nsdg;

namespace {

BoundaryClassifier all_neumann() {
  return [](const Vec2&, const Vec2&) { return BoundaryTag::neumann; };
}

struct Setup {
  Mesh mesh;
  SpacePair spaces;
  DgOperators ops;
  Setup(const Vec2& origin, const Vec2& lengths, int level, const BoundaryClassifier& cls,
        int k_u, OrderMode mode, OperatorConfig cfg = {})
      : mesh(Mesh::cartesian(origin, lengths, level, cls)),
        spaces(mesh, k_u, mode),
        ops(spaces, cfg) {}
};

FaceData sample_vec(const DgOperators& ops, const QuadRule1D& rule, const VectorFunc& f,
                    double t) {
  return sample_boundary_data(ops.mesh(), rule, 2,
                              [&](const Vec2& x, const Vec2&, BoundaryTag, double* out) {
                                const Vec2 v = f(x, t);
                                out[0] = v[0];
                                out[1] = v[1];
                              });
}

FaceData sample_sca(const DgOperators& ops, const QuadRule1D& rule, const ScalarFunc& f,
                    double t) {
  return sample_boundary_data(ops.mesh(), rule, 1,
                              [&](const Vec2& x, const Vec2&, BoundaryTag, double* out) {
                                out[0] = f(x, t);
                              });
}

}  // namespace

TEST_CASE("penalty parameter formula") {
  // interior unit element: tau = 9 * (4/2) / 1 = 18 for k = 2
  Setup s({0, 0}, {4, 4}, 2, all_dirichlet(), 2, OrderMode::equal);
  const int e_interior = 1 * 4 + 1;
  CHECK(s.ops.penalty_elem(e_interior, 2) == doctest::Approx(18.0).epsilon(1e-14));

  // h = 0.5 edge element with one boundary face: 16 * (1.5/2 + 0.5) / 0.25 = 80 for k = 3
  Setup s2({0, 0}, {2, 2}, 2, all_dirichlet(), 3, OrderMode::equal);
  const int e_edge = 1;  // bottom row, not a corner
  int n_bnd = 0;
  for (const auto& f : s2.mesh.faces_of(e_edge)) n_bnd += f.boundary ? 1 : 0;
  REQUIRE(n_bnd == 1);
  CHECK(s2.ops.penalty_elem(e_edge, 3) == doctest::Approx(80.0).epsilon(1e-14));

  // across an interior face of two equal elements the max rule gives tau_e
  const Mesh& m = s2.mesh;
  for (std::size_t fi = 0; fi < m.interior_faces().size(); ++fi) {
    const InteriorFace& f = m.interior_faces()[fi];
    const double te1 = s2.ops.penalty_elem(f.elem_minus, 3);
    const double te2 = s2.ops.penalty_elem(f.elem_plus, 3);
    CHECK(s2.ops.penalty_interior_face(static_cast<int>(fi), 3) ==
          doctest::Approx(std::max(te1, te2)).epsilon(1e-14));
  }
}

TEST_CASE("mass operator: inverse, area, symmetry") {
  Setup s({0, 0}, {1, 1}, 1, all_dirichlet(), 3, OrderMode::mixed);
  const Eigen::Index nu = s.spaces.velocity().n_dofs();
  testsupport::Rng rng(3);
  const Eigen::VectorXd v = rng.vector(nu);
  Eigen::VectorXd mv(nu), vmv(nu);
  s.ops.mass_apply_velocity(v, mv);
  s.ops.mass_solve_velocity(mv, vmv);
  CHECK((vmv - v).cwiseAbs().maxCoeff() < 1e-12);

  // 1^T M 1 over the scalar pressure space equals the domain area
  CoefficientField ones(s.spaces.pressure(), 1.0);
  Eigen::VectorXd mp(ones.coeffs.size());
  s.ops.mass_apply_pressure(ones.coeffs, mp);
  CHECK(mp.sum() == doctest::Approx(1.0).epsilon(1e-13));

  const Eigen::VectorXd w = rng.vector(nu);
  Eigen::VectorXd mw(nu);
  s.ops.mass_apply_velocity(w, mw);
  CHECK(v.dot(mw) == doctest::Approx(w.dot(mv)).epsilon(1e-12));
}

TEST_CASE("body force: zero, constant, and in-space consistency") {
  Setup s({0, 0}, {1, 1}, 1, all_dirichlet(), 2, OrderMode::equal);
  const Eigen::Index nu = s.spaces.velocity().n_dofs();
  Eigen::VectorXd out(nu);
  s.ops.body_force_apply([](const Vec2&, double) { return Vec2{0.0, 0.0}; }, 0.0, out);
  CHECK(out.cwiseAbs().maxCoeff() == 0.0);

  // constant force against the interpolant of e_1: area times the force
  s.ops.body_force_apply([](const Vec2&, double) { return Vec2{2.0, -3.0}; }, 0.0, out);
  CoefficientField vones(s.spaces.velocity());
  for (int e = 0; e < s.mesh.n_elements(); ++e)
    for (int iy = 0; iy < 3; ++iy)
      for (int ix = 0; ix < 3; ++ix)
        vones.coeffs(s.spaces.velocity().dof_index(e, 0, ix, iy)) = 1.0;
  CHECK(out.dot(vones.coeffs) == doctest::Approx(2.0).epsilon(1e-13));

  // equals mass times the interpolant when f lies in the space
  const VectorFunc f = [](const Vec2& x, double) { return Vec2{x[0] * x[1], x[0] - x[1]}; };
  const CoefficientField fi = interpolate(s.spaces.velocity(), f, 0.0);
  Eigen::VectorXd mf(nu);
  s.ops.mass_apply_velocity(fi.coeffs, mf);
  s.ops.body_force_apply(f, 0.0, out);
  CHECK((out - mf).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("viscous SIPG: kernel, symmetry, inhomogeneous data") {
  OperatorConfig cfg;
  cfg.nu = 0.7;
  Setup s({0, 0}, {1, 1}, 1, all_neumann(), 2, OrderMode::equal, cfg);
  const Eigen::Index nu = s.spaces.velocity().n_dofs();

  // constants lie in the kernel under pure-Neumann tagging
  CoefficientField c(s.spaces.velocity(), 1.25);
  Eigen::VectorXd out(nu);
  s.ops.viscous_apply_hom(c.coeffs, out);
  CHECK(out.cwiseAbs().maxCoeff() < 1e-12);

  // symmetry of the assembled matrix
  Setup sd({0, 0}, {1, 1}, 1, all_dirichlet(), 2, OrderMode::equal, cfg);
  const auto apply = [&sd](const Eigen::VectorXd& in, Eigen::VectorXd& o) {
    sd.ops.viscous_apply_hom(in, o);
  };
  const Eigen::MatrixXd V = testsupport::assemble_matrix(apply, nu, nu);
  CHECK((V - V.transpose()).cwiseAbs().maxCoeff() < 1e-11 * V.cwiseAbs().maxCoeff());

  // zero data produce a zero inhomogeneous part
  const FaceData zg = sample_vec(sd.ops, sd.ops.velocity_rule(),
                                 [](const Vec2&, double) { return Vec2{0.0, 0.0}; }, 0.0);
  Eigen::VectorXd inhom(nu);
  sd.ops.viscous_rhs_inhom(zg, zg, inhom);
  CHECK(inhom.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("viscous SIPG annihilates smooth interpolants at rate >= k") {
  const double nu_val = 0.3;
  const VectorFunc uexact = [](const Vec2& x, double) {
    return Vec2{std::sin(x[0] + 2.0 * x[1]), std::cos(2.0 * x[0]) * x[1]};
  };
  const VectorFunc minus_nu_lap = [nu_val](const Vec2& x, double) {
    const double l1 = -5.0 * std::sin(x[0] + 2.0 * x[1]);
    const double l2 = -4.0 * std::cos(2.0 * x[0]) * x[1];
    return Vec2{-nu_val * l1, -nu_val * l2};
  };
  const int k = 3;
  double prev = 0.0;
  for (int level : {2, 3}) {
    OperatorConfig cfg;
    cfg.nu = nu_val;
    Setup s({0, 0}, {1, 1}, level, all_dirichlet(), k, OrderMode::equal, cfg);
    const Eigen::Index nu = s.spaces.velocity().n_dofs();
    const CoefficientField ui = interpolate(s.spaces.velocity(), uexact, 0.0);
    const FaceData g = sample_vec(s.ops, s.ops.velocity_rule(), uexact, 0.0);
    const FaceData h = sample_boundary_data(
        s.mesh, s.ops.velocity_rule(), 2,
        [nu_val](const Vec2& x, const Vec2& n, BoundaryTag, double* o) {
          const double g11 = std::cos(x[0] + 2.0 * x[1]);
          const double g12 = 2.0 * std::cos(x[0] + 2.0 * x[1]);
          const double g21 = -2.0 * std::sin(2.0 * x[0]) * x[1];
          const double g22 = std::cos(2.0 * x[0]);
          o[0] = nu_val * (g11 * n[0] + g12 * n[1]);
          o[1] = nu_val * (g21 * n[0] + g22 * n[1]);
        });
    Eigen::VectorXd hom(nu), inhom(nu), load(nu);
    s.ops.viscous_apply_hom(ui.coeffs, hom);
    s.ops.viscous_rhs_inhom(g, h, inhom);
    s.ops.body_force_apply(minus_nu_lap, 0.0, load);
    const double resid = (hom + inhom - load).norm();
    if (prev > 0.0) {
      const double rate = std::log2(prev / resid);
      CHECK(rate >= k - 0.5);
    }
    prev = resid;
  }
}

TEST_CASE("pressure Laplacian: nullspace, positivity, symmetry") {
  Setup s({0, 0}, {1, 1}, 1, all_dirichlet(), 2, OrderMode::mixed);
  const Eigen::Index np = s.spaces.pressure().n_dofs();

  // pure Dirichlet flow boundary means pure Neumann for the pressure: the
  // constant lies in the kernel
  CoefficientField c(s.spaces.pressure(), 2.0);
  Eigen::VectorXd out(np);
  s.ops.laplace_apply_hom(c.coeffs, out);
  CHECK(out.cwiseAbs().maxCoeff() < 1e-12);

  testsupport::Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::VectorXd p = rng.vector(np);
    Eigen::VectorXd lp(np);
    s.ops.laplace_apply_hom(p, lp);
    CHECK(p.dot(lp) >= -1e-12);
  }

  const auto apply = [&s](const Eigen::VectorXd& in, Eigen::VectorXd& o) {
    s.ops.laplace_apply_hom(in, o);
  };
  const Eigen::MatrixXd L = testsupport::assemble_matrix(apply, np, np);
  CHECK((L - L.transpose()).cwiseAbs().maxCoeff() < 1e-11 * L.cwiseAbs().maxCoeff());
}

TEST_CASE("laplace solve converges at rate k_p + 1 for a harmonic solution") {
  const ScalarFunc pexact = [](const Vec2& x, double) { return std::sin(x[0]) * std::sinh(x[1]); };
  double prev = 0.0;
  for (int level : {1, 2, 3}) {
    Setup s({0, 0}, {1, 1}, level, all_neumann(), 3, OrderMode::mixed);  // k_p = 2
    const Eigen::Index np = s.spaces.pressure().n_dofs();
    const FaceData g = sample_sca(s.ops, s.ops.pressure_rule(), pexact, 0.0);
    const FaceData h =
        sample_sca(s.ops, s.ops.pressure_rule(), [](const Vec2&, double) { return 0.0; }, 0.0);
    Eigen::VectorXd rhs(np);
    s.ops.laplace_rhs_inhom(g, h, rhs);
    rhs = -rhs;
    Eigen::VectorXd p = Eigen::VectorXd::Zero(np);
    const LinearOp lap = [&s](const Eigen::VectorXd& in, Eigen::VectorXd& o) {
      s.ops.laplace_apply_hom(in, o);
    };
    SolveSpec spec;
    spec.rtol = 1e-12;
    spec.atol = 1e-14;
    cg_solve(lap, rhs, p, spec);
    CoefficientField pf(s.spaces.pressure());
    pf.coeffs = p;
    const double err = relative_l2_error(pf, pexact, 0.0);
    if (prev > 0.0) CHECK(std::log2(prev / err) >= 2.6);  // k_p + 1 = 3
    prev = err;
  }
}

TEST_CASE("divergence operator: constants, single-element value, reference form") {
  Setup s({0, 0}, {1, 1}, 1, all_dirichlet(), 2, OrderMode::mixed);
  const Eigen::Index np = s.spaces.pressure().n_dofs();

  // constant velocity with matching boundary data: d(q, u, g) = 0
  const VectorFunc uconst = [](const Vec2&, double) { return Vec2{0.8, -0.4}; };
  const CoefficientField uc = interpolate(s.spaces.velocity(), uconst, 0.0);
  const FaceData g = sample_vec(s.ops, s.ops.velocity_rule(), uconst, 0.0);
  Eigen::VectorXd out(np);
  s.ops.divergence_apply(uc.coeffs, &g, out);
  CHECK(out.cwiseAbs().maxCoeff() < 1e-13);

  // u = (x1, 0): tested against the indicator of one element gives h^2
  const VectorFunc ux = [](const Vec2& x, double) { return Vec2{x[0], 0.0}; };
  const CoefficientField uxi = interpolate(s.spaces.velocity(), ux, 0.0);
  const FaceData gx = sample_vec(s.ops, s.ops.velocity_rule(), ux, 0.0);
  s.ops.divergence_apply(uxi.coeffs, &gx, out);
  Eigen::VectorXd q_ind = Eigen::VectorXd::Zero(np);
  const int npc = s.spaces.pressure().dofs_per_comp();
  q_ind.segment(0, npc).setOnes();
  CHECK(out.dot(q_ind) == doctest::Approx(0.25).epsilon(1e-13));

  // missing data rejected in the integrated-by-parts mode
  CHECK_THROWS_AS(s.ops.divergence_apply(uxi.coeffs, nullptr, out), std::invalid_argument);

  // the reference form ignores boundary data entirely
  OperatorConfig rcfg;
  rcfg.formulation = FluxFormulation::reference;
  Setup sr({0, 0}, {1, 1}, 1, all_dirichlet(), 2, OrderMode::mixed, rcfg);
  const FaceData g2 = sample_vec(sr.ops, sr.ops.velocity_rule(),
                                 [](const Vec2&, double) { return Vec2{9.0, 9.0}; }, 0.0);
  Eigen::VectorXd r1(np), r2(np);
  sr.ops.divergence_apply(uxi.coeffs, &gx, r1);
  sr.ops.divergence_apply(uxi.coeffs, &g2, r2);
  CHECK((r1 - r2).cwiseAbs().maxCoeff() == 0.0);
  sr.ops.divergence_apply(uxi.coeffs, nullptr, r2);  // no data needed
  CHECK((r1 - r2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gradient operator: constants, exact integral, reference form") {
  Setup s({0, 0}, {1, 1}, 1, all_dirichlet(), 2, OrderMode::mixed);
  const Eigen::Index nu = s.spaces.velocity().n_dofs();

  // constant pressure on a pure Dirichlet boundary: g_h(v, c) = 0
  CoefficientField pc(s.spaces.pressure(), 3.0);
  Eigen::VectorXd out(nu);
  s.ops.gradient_apply(pc.coeffs, nullptr, out);
  CHECK(out.cwiseAbs().maxCoeff() < 1e-13);

  // p = x1: <G p, v> equals the integral of v1
  const CoefficientField px = interpolate(
      s.spaces.pressure(), ScalarFunc([](const Vec2& x, double) { return x[0]; }), 0.0);
  s.ops.gradient_apply(px.coeffs, nullptr, out);
  const VectorFunc vf = [](const Vec2& x, double) { return Vec2{x[0] * x[1], x[1]}; };
  const CoefficientField v = interpolate(s.spaces.velocity(), vf, 0.0);
  CHECK(out.dot(v.coeffs) == doctest::Approx(0.25).epsilon(1e-13));  // integral of x1 x2

  // reference form ignores pressure boundary data
  OperatorConfig rcfg;
  rcfg.formulation = FluxFormulation::reference;
  Setup sr({-0.5, -0.5}, {1, 1}, 1, vortex_problem().classifier, 2, OrderMode::mixed, rcfg);
  const CoefficientField px2 = interpolate(
      sr.spaces.pressure(), ScalarFunc([](const Vec2& x, double) { return x[0] * x[1]; }), 0.0);
  const FaceData gp1 =
      sample_sca(sr.ops, sr.ops.velocity_rule(), [](const Vec2&, double) { return 1.0; }, 0.0);
  const FaceData gp2 =
      sample_sca(sr.ops, sr.ops.velocity_rule(), [](const Vec2&, double) { return -5.0; }, 0.0);
  Eigen::VectorXd r1(nu), r2(nu);
  sr.ops.gradient_apply(px2.coeffs, &gp1, r1);
  sr.ops.gradient_apply(px2.coeffs, &gp2, r2);
  CHECK((r1 - r2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gradient and divergence are adjoint up to sign") {
  Setup s({-0.5, -0.5}, {1, 1}, 2, vortex_problem().classifier, 3, OrderMode::mixed);
  const Eigen::Index np = s.spaces.pressure().n_dofs();
  const Eigen::Index nu = s.spaces.velocity().n_dofs();
  testsupport::Rng rng(5);
  Eigen::VectorXd gp(nu), dv(np);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::VectorXd p = rng.vector(np);
    const Eigen::VectorXd v = rng.vector(nu);
    s.ops.gradient_apply_hom(p, gp);
    s.ops.divergence_apply_hom(v, dv);
    const double lhs = gp.dot(v);
    const double rhs = -dv.dot(p);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
  }
}

TEST_CASE("flux conservativity: constant-test telescoping to boundary terms") {
  Setup s({-0.5, -0.5}, {1, 1}, 2, vortex_problem().classifier, 3, OrderMode::mixed);
  const Eigen::Index np = s.spaces.pressure().n_dofs();
  const Eigen::Index nu = s.spaces.velocity().n_dofs();
  testsupport::Rng rng(9);

  Eigen::VectorXd q_ones = Eigen::VectorXd::Ones(np);
  Eigen::VectorXd v_ones_x = Eigen::VectorXd::Zero(nu), v_ones_y = Eigen::VectorXd::Zero(nu);
  const Space& su = s.spaces.velocity();
  for (int e = 0; e < s.mesh.n_elements(); ++e)
    for (int iy = 0; iy < su.nodes_1d(); ++iy)
      for (int ix = 0; ix < su.nodes_1d(); ++ix) {
        v_ones_x(su.dof_index(e, 0, ix, iy)) = 1.0;
        v_ones_y(su.dof_index(e, 1, ix, iy)) = 1.0;
      }

  const QuadRule1D rule = s.ops.velocity_rule();
  const QuadRule1D rule_c = s.ops.convective_rule();
  const Vec2 h = s.mesh.element_size();

  const Eigen::VectorXd uvec = rng.vector(nu);
  const Eigen::VectorXd pvec = rng.vector(np);
  CoefficientField uf(s.spaces.velocity());
  uf.coeffs = uvec;
  CoefficientField pf(s.spaces.pressure());
  pf.coeffs = pvec;

  const VectorFunc gfun = [](const Vec2& x, double) { return Vec2{x[0] + 0.3, x[1] - 0.2}; };
  const ScalarFunc gpfun = [](const Vec2& x, double) { return x[0] * x[1] + 0.5; };
  const FaceData g_u = sample_vec(s.ops, rule, gfun, 0.0);
  const FaceData g_uc = sample_vec(s.ops, rule_c, gfun, 0.0);
  const FaceData g_p = sample_sca(s.ops, rule, gpfun, 0.0);

  // divergence: sum_e d(1, u, g) telescopes to int_N u.n + int_D g.n
  Eigen::VectorXd dout(np);
  s.ops.divergence_apply(uvec, &g_u, dout);
  double expected = 0.0;
  for (std::size_t bi = 0; bi < s.mesh.boundary_faces().size(); ++bi) {
    const BoundaryFace& bf = s.mesh.boundary_faces()[bi];
    const int axis = bf.face / 2;
    const double ht = h[1 - axis];
    const FaceValues tr = trace_on_face(uf, bf.elem, bf.face, rule);
    const auto pts = s.ops.boundary_face_points(static_cast<int>(bi), rule);
    for (int q = 0; q < rule.size(); ++q) {
      double un;
      if (bf.tag == BoundaryTag::neumann) {
        un = tr.value[0](q) * bf.normal[0] + tr.value[1](q) * bf.normal[1];
      } else {
        const Vec2 gval = gfun(pts[q], 0.0);
        un = gval[0] * bf.normal[0] + gval[1] * bf.normal[1];
      }
      expected += ht * rule.weights[q] * un;
    }
  }
  CHECK(dout.dot(q_ones) == doctest::Approx(expected).epsilon(1e-12));

  // gradient: constants in each velocity component pick boundary terms of p* n
  Eigen::VectorXd gout(nu);
  s.ops.gradient_apply(pvec, &g_p, gout);
  double expected_x = 0.0, expected_y = 0.0;
  for (std::size_t bi = 0; bi < s.mesh.boundary_faces().size(); ++bi) {
    const BoundaryFace& bf = s.mesh.boundary_faces()[bi];
    const int axis = bf.face / 2;
    const double ht = h[1 - axis];
    const FaceValues tr = trace_on_face(pf, bf.elem, bf.face, rule);
    const auto pts = s.ops.boundary_face_points(static_cast<int>(bi), rule);
    for (int q = 0; q < rule.size(); ++q) {
      const double pstar = bf.tag == BoundaryTag::dirichlet ? tr.value[0](q) : gpfun(pts[q], 0.0);
      expected_x += ht * rule.weights[q] * pstar * bf.normal[0];
      expected_y += ht * rule.weights[q] * pstar * bf.normal[1];
    }
  }
  CHECK(gout.dot(v_ones_x) == doctest::Approx(expected_x).epsilon(1e-12));
  CHECK(gout.dot(v_ones_y) == doctest::Approx(expected_y).epsilon(1e-12));

  // convective flux telescoping against component constants
  Eigen::VectorXd cout_vec(nu);
  s.ops.convective_apply(uvec, g_uc, cout_vec);
  double exp_cx = 0.0, exp_cy = 0.0;
  for (std::size_t bi = 0; bi < s.mesh.boundary_faces().size(); ++bi) {
    const BoundaryFace& bf = s.mesh.boundary_faces()[bi];
    const int axis = bf.face / 2;
    const double ht = h[1 - axis];
    const FaceValues tr = trace_on_face(uf, bf.elem, bf.face, rule_c);
    const auto pts = s.ops.boundary_face_points(static_cast<int>(bi), rule_c);
    for (int q = 0; q < rule_c.size(); ++q) {
      const Vec2 um{tr.value[0](q), tr.value[1](q)};
      Vec2 up;
      if (bf.tag == BoundaryTag::dirichlet) {
        const Vec2 gval = gfun(pts[q], 0.0);
        up = {-um[0] + 2.0 * gval[0], -um[1] + 2.0 * gval[1]};
      } else {
        up = um;
      }
      const double unm = um[0] * bf.normal[0] + um[1] * bf.normal[1];
      const double unp = up[0] * bf.normal[0] + up[1] * bf.normal[1];
      const double lam = std::max(2.0 * std::abs(unm), 2.0 * std::abs(unp));
      const double fx = 0.5 * (um[0] * unm + up[0] * unp) + 0.5 * lam * (um[0] - up[0]);
      const double fy = 0.5 * (um[1] * unm + up[1] * unp) + 0.5 * lam * (um[1] - up[1]);
      exp_cx += ht * rule_c.weights[q] * fx;
      exp_cy += ht * rule_c.weights[q] * fy;
    }
  }
  CHECK(cout_vec.dot(v_ones_x) == doctest::Approx(exp_cx).epsilon(1e-12));
  CHECK(cout_vec.dot(v_ones_y) == doctest::Approx(exp_cy).epsilon(1e-12));
}

TEST_CASE("convective term: zero field, consistency, wave speed") {
  Setup s({0, 0}, {1, 1}, 1, all_neumann(), 3, OrderMode::mixed);
  const Eigen::Index nu = s.spaces.velocity().n_dofs();
  const FaceData gz = sample_vec(s.ops, s.ops.convective_rule(),
                                 [](const Vec2&, double) { return Vec2{0.0, 0.0}; }, 0.0);

  Eigen::VectorXd out(nu);
  s.ops.convective_apply(Eigen::VectorXd::Zero(nu), gz, out);
  CHECK(out.cwiseAbs().maxCoeff() == 0.0);

  // continuous polynomial velocity: the numerical flux is consistent and the
  // operator equals the strong divergence of u kron u
  const VectorFunc up = [](const Vec2& x, double) { return Vec2{x[0] * x[0] * x[1], x[0] * x[1]}; };
  const VectorFunc div_fc = [](const Vec2& x, double) {
    const double u1 = x[0] * x[0] * x[1], u2 = x[0] * x[1];
    const double du1dx = 2.0 * x[0] * x[1], du1dy = x[0] * x[0];
    const double du2dx = x[1], du2dy = x[0];
    return Vec2{2.0 * u1 * du1dx + du1dy * u2 + u1 * du2dy,
                du2dx * u1 + u2 * du1dx + 2.0 * u2 * du2dy};
  };
  const CoefficientField ui = interpolate(s.spaces.velocity(), up, 0.0);
  const FaceData g = sample_vec(s.ops, s.ops.convective_rule(), up, 0.0);
  s.ops.convective_apply(ui.coeffs, g, out);
  OperatorConfig bigq;
  bigq.nq_velocity = 8;  // exact for the degree-7 strong-form integrand
  Setup sq({0, 0}, {1, 1}, 1, all_neumann(), 3, OrderMode::mixed, bigq);
  Eigen::VectorXd strong(nu);
  sq.ops.body_force_apply(div_fc, 0.0, strong);
  CHECK((out - strong).cwiseAbs().maxCoeff() < 1e-12);

  // wave speed: hand-computed value with a piecewise-constant field
  Setup s2({0, 0}, {1, 1}, 1, all_neumann(), 1, OrderMode::equal);
  const Space& su = s2.spaces.velocity();
  Eigen::VectorXd ustep = Eigen::VectorXd::Zero(su.n_dofs());
  for (int iy = 0; iy < 2; ++iy)
    for (int ix = 0; ix < 2; ++ix) ustep(su.dof_index(0, 0, ix, iy)) = 1.0;
  const FaceData gz2 = sample_vec(s2.ops, s2.ops.convective_rule(),
                                  [](const Vec2&, double) { return Vec2{0.0, 0.0}; }, 0.0);
  Eigen::VectorXd cstep(su.n_dofs());
  s2.ops.convective_apply(ustep, gz2, cstep);
  Eigen::VectorXd v_ind = Eigen::VectorXd::Zero(su.n_dofs());
  for (int iy = 0; iy < 2; ++iy)
    for (int ix = 0; ix < 2; ++ix) v_ind(su.dof_index(0, 0, ix, iy)) = 1.0;
  // right face: {F}.n = 1/2, Lambda = max(2|1|, 2|0|) = 2, jump term = 1,
  // flux = 1.5 on a face of length 1/2 -> 0.75; left boundary (Neumann,
  // u+ = u-): flux = u (u.n) = -1 over length 1/2 -> -0.5.
  CHECK(cstep.dot(v_ind) == doctest::Approx(0.25).epsilon(1e-13));
}

TEST_CASE("convective linearization matches central differences") {
  Setup s({-0.5, -0.5}, {1, 1}, 1, vortex_problem().classifier, 3, OrderMode::mixed);
  const Eigen::Index nu = s.spaces.velocity().n_dofs();
  testsupport::Rng rng(13);
  const Eigen::VectorXd u0 = rng.vector(nu);
  const Eigen::VectorXd du = rng.vector(nu);
  const FaceData g = sample_vec(s.ops, s.ops.convective_rule(),
                                [](const Vec2& x, double) { return Vec2{x[1], -x[0]}; }, 0.0);

  Eigen::VectorXd lin(nu);
  s.ops.convective_linearization_apply(u0, du, g, lin);

  auto fd = [&](double eps) {
    Eigen::VectorXd cp(nu), cm(nu);
    s.ops.convective_apply(u0 + eps * du, g, cp);
    s.ops.convective_apply(u0 - eps * du, g, cm);
    return Eigen::VectorXd(((cp - cm) / (2.0 * eps)) - lin);
  };
  const double err1 = fd(1e-5).cwiseAbs().maxCoeff();
  CHECK(err1 < 1e-8 * std::max(1.0, lin.cwiseAbs().maxCoeff()));

  // The flux is quadratic in u, so away from the kinks of max(.) and |.| the
  // central difference is exact up to roundoff. Definite margins: positive
  // random coefficients keep u.n away from zero and the face traces distinct.
  Setup sn({0, 0}, {1, 1}, 1, all_neumann(), 3, OrderMode::mixed);
  CoefficientField u0s(sn.spaces.velocity());
  u0s.coeffs = 3.0 * Eigen::VectorXd::Ones(u0s.coeffs.size()) +
               0.3 * rng.vector(u0s.coeffs.size());
  Eigen::VectorXd dus = rng.vector(u0s.coeffs.size());
  const FaceData gn = sample_vec(sn.ops, sn.ops.convective_rule(),
                                 [](const Vec2&, double) { return Vec2{0.0, 0.0}; }, 0.0);
  Eigen::VectorXd lins(u0s.coeffs.size());
  sn.ops.convective_linearization_apply(u0s.coeffs, dus, gn, lins);
  auto fds = [&](double eps) {
    Eigen::VectorXd cp(lins.size()), cm(lins.size());
    sn.ops.convective_apply(u0s.coeffs + eps * dus, gn, cp);
    sn.ops.convective_apply(u0s.coeffs - eps * dus, gn, cm);
    return ((cp - cm) / (2.0 * eps) - lins).cwiseAbs().maxCoeff();
  };
  const double scale = std::max(1.0, lins.cwiseAbs().maxCoeff());
  CHECK(fds(1e-3) < 1e-10 * scale);
  CHECK(fds(1e-5) < 1e-8 * scale);

  // zero direction and zero base state give zero
  Eigen::VectorXd zero_out(nu);
  s.ops.convective_linearization_apply(u0, Eigen::VectorXd::Zero(nu), g, zero_out);
  CHECK(zero_out.cwiseAbs().maxCoeff() == 0.0);
  const FaceData gzv = sample_vec(s.ops, s.ops.convective_rule(),
                                  [](const Vec2&, double) { return Vec2{0.0, 0.0}; }, 0.0);
  s.ops.convective_linearization_apply(Eigen::VectorXd::Zero(nu), du, gzv, zero_out);
  CHECK(zero_out.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mirror identities hold pointwise") {
  testsupport::Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const double um = rng.uniform(), g = rng.uniform(), pm = rng.uniform(), gp = rng.uniform();
    const double up = MirrorBc::velocity_value(BoundaryTag::dirichlet, um, g);
    CHECK(std::abs(0.5 * (um + up) - g) <= 1e-14 * std::max(1.0, std::abs(g)));
    CHECK(MirrorBc::velocity_value(BoundaryTag::neumann, um, g) == um);
    const double pp = MirrorBc::pressure_value(BoundaryTag::neumann, pm, gp);
    CHECK(std::abs(0.5 * (pm + pp) - gp) <= 1e-14 * std::max(1.0, std::abs(gp)));
    CHECK(MirrorBc::pressure_value(BoundaryTag::dirichlet, pm, gp) == pm);
    const double dn = rng.uniform(), hp = rng.uniform();
    CHECK(MirrorBc::pressure_normal_grad(BoundaryTag::dirichlet, dn, hp) ==
          doctest::Approx(-dn + 2.0 * hp).epsilon(1e-15));
    CHECK(MirrorBc::velocity_normal_grad(BoundaryTag::dirichlet, dn, 0.0) == dn);
  }
}

TEST_CASE("element blocks match the assembled operator diagonal") {
  Setup s({0, 0}, {1, 1}, 1, all_dirichlet(), 2, OrderMode::mixed);
  const Eigen::Index np = s.spaces.pressure().n_dofs();
  const auto apply = [&s](const Eigen::VectorXd& in, Eigen::VectorXd& o) {
    s.ops.laplace_apply_hom(in, o);
  };
  const Eigen::MatrixXd L = testsupport::assemble_matrix(apply, np, np);
  const int npc = s.spaces.pressure().dofs_per_comp();
  for (int e = 0; e < s.mesh.n_elements(); ++e) {
    const Eigen::MatrixXd blk = s.ops.laplace_element_block(e);
    const Eigen::MatrixXd ref = L.block(e * npc, e * npc, npc, npc);
    CHECK((blk - ref).cwiseAbs().maxCoeff() < 1e-11 * ref.cwiseAbs().maxCoeff());
  }

  // momentum blocks against mass + viscous diagonal
  const Eigen::Index nuv = s.spaces.velocity().n_dofs();
  const double mc = 7.5;
  const auto mom = [&s, mc](const Eigen::VectorXd& in, Eigen::VectorXd& o) {
    Eigen::VectorXd visc(in.size());
    s.ops.viscous_apply_hom(in, visc);
    s.ops.mass_apply_velocity(in, o);
    o = mc * o + visc;
  };
  const Eigen::MatrixXd A = testsupport::assemble_matrix(mom, nuv, nuv);
  const int nus = s.spaces.velocity().elem_stride();
  for (int e = 0; e < s.mesh.n_elements(); ++e) {
    const Eigen::MatrixXd blk = s.ops.momentum_element_block(e, mc);
    const Eigen::MatrixXd ref = A.block(e * nus, e * nus, nus, nus);
    CHECK((blk - ref).cwiseAbs().maxCoeff() < 1e-11 * ref.cwiseAbs().maxCoeff());
  }
}
