#include "nsdg/schemes.hpp"

#include <cmath>
#include <stdexcept>

namespace nsdg {

int SchemeConfig::effective_jp() const {
  if (Jp >= 0) return Jp;
  switch (kind) {
    case SchemeKind::dual_splitting: return J;
    case SchemeKind::pressure_correction: return J - 1;
    case SchemeKind::coupled: return J;
  }
  return J;
}

void SchemeConfig::validate() const {
  if (J < 1 || J > 2) throw std::invalid_argument("SchemeConfig: J must be 1 or 2");
  if (dt <= 0.0 || end_time <= 0.0) throw std::invalid_argument("SchemeConfig: dt and end time must be positive");
  if (rtol <= 0.0 || atol <= 0.0) throw std::invalid_argument("SchemeConfig: tolerances must be positive");
  if (kind == SchemeKind::pressure_correction && effective_jp() >= J)
    throw std::invalid_argument("SchemeConfig: pressure correction requires Jp < J");
  if (kind == SchemeKind::dual_splitting && Jp >= 0 && Jp != J)
    throw std::invalid_argument("SchemeConfig: dual splitting uses Jp = J");
  if (effective_jp() > 2) throw std::invalid_argument("SchemeConfig: Jp must be <= 2");
}

namespace {

struct WarmStart {
  std::deque<Eigen::VectorXd> past;
  void push(const Eigen::VectorXd& v) {
    past.push_front(v);
    if (past.size() > 3) past.pop_back();
  }
  void guess(Eigen::VectorXd& x) const {
    if (past.empty()) {
      x.setZero();
    } else if (past.size() == 1) {
      x = past[0];
    } else if (past.size() == 2) {
      x = 2.0 * past[0] - past[1];
    } else {
      x = 3.0 * past[0] - 3.0 * past[1] + past[2];
    }
  }
};

}  // namespace

struct SchemeRunner::Impl {
  Eigen::Index nu = 0, np = 0;
  WarmStart warm_coupled, warm_p, warm_u, warm_uhat, warm_phi;
  Eigen::VectorXd laplace_jacobi_inv;
  std::vector<Eigen::LLT<Eigen::MatrixXd>> momentum_blocks;
  std::vector<Eigen::LLT<Eigen::MatrixXd>> laplace_blocks;
  bool momentum_blocks_ready = false;
  bool laplace_blocks_ready = false;
  double initial_scale = 1.0;
};

SchemeRunner::SchemeRunner(const AnalyticProblem& problem, int level, int degree_u, OrderMode mode,
                           const SchemeConfig& cfg)
    : problem_(problem), cfg_(cfg), history_(3), impl_(std::make_unique<Impl>()) {
  cfg_.validate();
  mesh_ = std::make_unique<Mesh>(problem_.make_mesh(level));
  spaces_ = std::make_unique<SpacePair>(*mesh_, degree_u, mode);
  OperatorConfig ocfg;
  ocfg.nu = problem_.nu;
  ocfg.formulation = cfg_.formulation;
  ocfg.lambda_mode = cfg_.lambda_mode;
  ops_ = std::make_unique<DgOperators>(*spaces_, ocfg);
  bc_ = problem_.bcset();
  bc_.convective_on = cfg_.convective;

  const long n = std::lround(cfg_.end_time / cfg_.dt);
  n_steps_ = static_cast<int>(std::max(1L, n));
  cfg_.dt = cfg_.end_time / n_steps_;

  impl_->nu = static_cast<Eigen::Index>(spaces_->velocity().n_dofs());
  impl_->np = static_cast<Eigen::Index>(spaces_->pressure().n_dofs());

  // point-Jacobi diagonal of the pressure Laplace operator
  impl_->laplace_jacobi_inv.resize(impl_->np);
  const int npc = spaces_->pressure().dofs_per_comp();
  for (int e = 0; e < mesh_->n_elements(); ++e) {
    const Eigen::MatrixXd block = ops_->laplace_element_block(e);
    impl_->laplace_jacobi_inv.segment(static_cast<Eigen::Index>(e) * npc, npc) =
        block.diagonal().cwiseInverse();
  }
}

SchemeRunner::~SchemeRunner() = default;

const CoefficientField& SchemeRunner::velocity() const { return history_.velocity(0); }
const CoefficientField& SchemeRunner::pressure() const { return history_.pressure(0); }

double SchemeRunner::velocity_error() const {
  return relative_l2_error(velocity(), problem_.velocity, time_);
}

double SchemeRunner::pressure_error() const {
  return relative_l2_error(pressure(), problem_.pressure, time_);
}

void SchemeRunner::prime_history() {
  for (int i = cfg_.J - 1; i >= 0; --i) {
    const double t = -i * cfg_.dt;
    CoefficientField u = interpolate(spaces_->velocity(), problem_.velocity, t);
    CoefficientField p = interpolate(spaces_->pressure(), problem_.pressure, t);
    history_.push(t, std::move(u), std::move(p));
  }
  time_ = 0.0;
  step_count_ = 0;
  impl_->warm_u.push(history_.velocity(0).coeffs);
  impl_->warm_p.push(history_.pressure(0).coeffs);
  impl_->warm_uhat.push(history_.velocity(0).coeffs);
  Eigen::VectorXd x0(impl_->nu + impl_->np);
  x0 << history_.velocity(0).coeffs, history_.pressure(0).coeffs;
  impl_->warm_coupled.push(x0);
  impl_->initial_scale = std::max(1.0, history_.velocity(0).coeffs.cwiseAbs().maxCoeff());
}

void SchemeRunner::run() {
  prime_history();
  for (int i = 0; i < n_steps_; ++i) {
    try {
      step();
    } catch (const SolverError& err) {
      diverged_ = true;
      failure_reason_ = err.what();
      break;
    }
    const double unorm = history_.velocity(0).coeffs.cwiseAbs().maxCoeff();
    const double pnorm = history_.pressure(0).coeffs.cwiseAbs().maxCoeff();
    if (!std::isfinite(unorm) || !std::isfinite(pnorm) ||
        unorm > 1e8 * impl_->initial_scale || pnorm > 1e10 * impl_->initial_scale) {
      diverged_ = true;
      failure_reason_ = "solution blow-up";
      break;
    }
  }
}

void SchemeRunner::step() {
  switch (cfg_.kind) {
    case SchemeKind::coupled: coupled_step(); break;
    case SchemeKind::dual_splitting: dual_splitting_step(); break;
    case SchemeKind::pressure_correction: pressure_correction_step(); break;
  }
  ++step_count_;
  time_ = step_count_ * cfg_.dt;
}

namespace {

FaceData sample_velocity_data(const DgOperators& ops, const VectorFunc& f, const QuadRule1D& rule,
                              double t) {
  return sample_boundary_data(ops.mesh(), rule, 2,
                              [&f, t](const Vec2& x, const Vec2&, BoundaryTag, double* out) {
                                const Vec2 v = f(x, t);
                                out[0] = v[0];
                                out[1] = v[1];
                              });
}

FaceData sample_traction_data(const DgOperators& ops,
                              const std::function<Vec2(const Vec2&, double, const Vec2&)>& f,
                              const QuadRule1D& rule, double t) {
  return sample_boundary_data(ops.mesh(), rule, 2,
                              [&f, t](const Vec2& x, const Vec2& n, BoundaryTag, double* out) {
                                const Vec2 v = f(x, t, n);
                                out[0] = v[0];
                                out[1] = v[1];
                              });
}

FaceData sample_scalar_data(const DgOperators& ops, const ScalarFunc& f, const QuadRule1D& rule,
                            double t) {
  return sample_boundary_data(ops.mesh(), rule, 1,
                              [&f, t](const Vec2& x, const Vec2&, BoundaryTag, double* out) {
                                out[0] = f(x, t);
                              });
}

FaceData zero_scalar_data(const DgOperators& ops, const QuadRule1D& rule) {
  return sample_boundary_data(ops.mesh(), rule, 1,
                              [](const Vec2&, const Vec2&, BoundaryTag, double* out) {
                                out[0] = 0.0;
                              });
}

}  // namespace

// ---------------------------------------------------------------------------
// dual splitting
// ---------------------------------------------------------------------------

void SchemeRunner::dual_splitting_step() {
  const double dt = cfg_.dt;
  const double t_next = time_ + dt;
  const int J = cfg_.J;
  const int jp = cfg_.effective_jp();
  const BdfCoefficients coeffs = BdfCoefficients::make(J, J);
  const double g0 = coeffs.gamma0;
  DgOperators& ops = *ops_;
  const Eigen::Index nu = impl_->nu;
  const Eigen::Index np = impl_->np;

  // convective step: gamma0 m(uhat) = m(sum alpha_i u) - dt sum beta_i c(u) + dt b(f)
  Eigen::VectorXd acc(nu), tmp(nu), rhs_u(nu);
  acc = coeffs.alpha[0] * history_.velocity(0).coeffs;
  for (int i = 1; i < J; ++i) acc += coeffs.alpha[i] * history_.velocity(i).coeffs;
  ops.mass_apply_velocity(acc, rhs_u);
  if (cfg_.convective) {
    for (int i = 0; i < J; ++i) {
      const FaceData gu_old = sample_velocity_data(ops, bc_.g_u, ops.convective_rule(),
                                                   history_.entry(i).t);
      ops.convective_apply(history_.velocity(i).coeffs, gu_old, tmp);
      rhs_u -= (dt * coeffs.beta[i]) * tmp;
    }
  }
  if (bc_.body_force) {
    ops.body_force_apply(bc_.body_force, t_next, tmp);
    rhs_u += dt * tmp;
  }
  Eigen::VectorXd uhat(nu);
  ops.mass_solve_velocity(rhs_u, uhat);
  uhat /= g0;

  // pressure Poisson step
  const QuadRule1D& rule_hp = cfg_.convective ? ops.convective_rule() : ops.pressure_rule();
  const FaceData hp = pressure_neumann_hp(ops, history_, bc_, t_next, jp, rule_hp);
  const FaceData gp_hp = sample_scalar_data(ops, bc_.g_p, rule_hp, t_next);
  Eigen::VectorXd rhs_p(np), p_new(np);
  {
    const QuadRule1D& rule_gh = cfg_.convective ? ops.convective_rule() : ops.velocity_rule();
    FaceData ghat;
    if (cfg_.formulation == FluxFormulation::integrated_by_parts) {
      ghat = cfg_.ds_consistent_ghat
                 ? intermediate_velocity_bc_ghat(ops, history_, bc_, t_next, J, dt, rule_gh)
                 : sample_velocity_data(ops, bc_.g_u, rule_gh, t_next);
    }
    Eigen::VectorXd div(np);
    ops.divergence_apply(uhat, cfg_.formulation == FluxFormulation::integrated_by_parts ? &ghat
                                                                                        : nullptr,
                         div);
    Eigen::VectorXd linhom(np);
    ops.laplace_rhs_inhom(gp_hp, hp, linhom);
    rhs_p = (-g0 / dt) * div - linhom;
  }
  {
    LinearOp lap = [&ops](const Eigen::VectorXd& in, Eigen::VectorXd& out) {
      ops.laplace_apply_hom(in, out);
    };
    LinearOp jacobi = [this](const Eigen::VectorXd& in, Eigen::VectorXd& out) {
      out = impl_->laplace_jacobi_inv.cwiseProduct(in);
    };
    SolveSpec spec;
    spec.rtol = cfg_.rtol;
    spec.atol = cfg_.atol;
    spec.max_iter = 100000;
    if (bc_.pure_dirichlet) spec.project = [](Eigen::VectorXd& v) { nullspace_project(v); };
    impl_->warm_p.guess(p_new);
    const SolveResult r = cg_solve(lap, rhs_p, p_new, spec, &jacobi);
    stats_.linear_iterations += r.iterations;
    stats_.solves += 1;
    stats_.last_residual = r.residual;
  }
  if (bc_.pure_dirichlet) nullspace_project(p_new);

  // projection step
  Eigen::VectorXd uhh(nu);
  {
    FaceData gp_u;
    const bool need_gp = !bc_.pure_dirichlet &&
                         cfg_.formulation == FluxFormulation::integrated_by_parts;
    if (need_gp) gp_u = sample_scalar_data(ops, bc_.g_p, ops.velocity_rule(), t_next);
    Eigen::VectorXd grad(nu);
    ops.gradient_apply(p_new, need_gp ? &gp_u : nullptr, grad);
    ops.mass_solve_velocity(grad, tmp);
    uhh = uhat - (dt / g0) * tmp;
  }

  // viscous step: (gamma0/dt) m(u) + v_hom(u) = (gamma0/dt) m(uhh) - v_inhom
  Eigen::VectorXd u_new(nu);
  {
    const FaceData gu = sample_velocity_data(ops, bc_.g_u, ops.velocity_rule(), t_next);
    const FaceData hu = sample_traction_data(ops, bc_.h_u, ops.velocity_rule(), t_next);
    Eigen::VectorXd vin(nu), rhs(nu);
    ops.mass_apply_velocity(uhh, rhs);
    rhs *= g0 / dt;
    ops.viscous_rhs_inhom(gu, hu, vin);
    rhs -= vin;
    LinearOp helmholtz = [&ops, g0, dt](const Eigen::VectorXd& in, Eigen::VectorXd& out) {
      Eigen::VectorXd visc(in.size());
      ops.viscous_apply_hom(in, visc);
      ops.mass_apply_velocity(in, out);
      out = (g0 / dt) * out + visc;
    };
    LinearOp inv_mass = [&ops](const Eigen::VectorXd& in, Eigen::VectorXd& out) {
      ops.mass_solve_velocity(in, out);
    };
    SolveSpec spec;
    spec.rtol = cfg_.rtol;
    spec.atol = cfg_.atol;
    spec.max_iter = 100000;
    impl_->warm_u.guess(u_new);
    const SolveResult r = cg_solve(helmholtz, rhs, u_new, spec, &inv_mass);
    stats_.linear_iterations += r.iterations;
    stats_.solves += 1;
  }

  impl_->warm_p.push(p_new);
  impl_->warm_u.push(u_new);
  CoefficientField uf(spaces_->velocity());
  uf.coeffs = std::move(u_new);
  uf.time = t_next;
  CoefficientField pf(spaces_->pressure());
  pf.coeffs = std::move(p_new);
  pf.time = t_next;
  history_.push(t_next, std::move(uf), std::move(pf));
}

// ---------------------------------------------------------------------------
// pressure correction
// ---------------------------------------------------------------------------

void SchemeRunner::pressure_correction_step() {
  const double dt = cfg_.dt;
  const double t_next = time_ + dt;
  const int J = cfg_.J;
  const int jp = cfg_.effective_jp();
  const BdfCoefficients coeffs = BdfCoefficients::make(J, jp);
  const double g0 = coeffs.gamma0;
  DgOperators& ops = *ops_;
  const Eigen::Index nu = impl_->nu;
  const Eigen::Index np = impl_->np;

  // momentum step (implicit in the convective term)
  Eigen::VectorXd acc(nu), tmp(nu), rhs(nu);
  acc = coeffs.alpha[0] * history_.velocity(0).coeffs;
  for (int i = 1; i < J; ++i) acc += coeffs.alpha[i] * history_.velocity(i).coeffs;
  ops.mass_apply_velocity(acc, rhs);
  rhs /= dt;
  for (int i = 0; i < jp; ++i) {
    FaceData gp_old;
    const bool need_gp = !bc_.pure_dirichlet &&
                         cfg_.formulation == FluxFormulation::integrated_by_parts;
    if (need_gp)
      gp_old = sample_scalar_data(ops, bc_.g_p, ops.velocity_rule(), history_.entry(i).t);
    ops.gradient_apply(history_.pressure(i).coeffs, need_gp ? &gp_old : nullptr, tmp);
    rhs -= coeffs.beta[i] * tmp;
  }
  if (bc_.body_force) {
    ops.body_force_apply(bc_.body_force, t_next, tmp);
    rhs += tmp;
  }
  const FaceData gu = sample_velocity_data(ops, bc_.g_u, ops.velocity_rule(), t_next);
  const FaceData hu = sample_traction_data(ops, bc_.h_u, ops.velocity_rule(), t_next);
  ops.viscous_rhs_inhom(gu, hu, tmp);
  rhs -= tmp;

  Eigen::VectorXd uhat(nu);
  impl_->warm_uhat.guess(uhat);
  if (!cfg_.convective) {
    LinearOp op = [&ops, g0, dt](const Eigen::VectorXd& in, Eigen::VectorXd& out) {
      Eigen::VectorXd visc(in.size());
      ops.viscous_apply_hom(in, visc);
      ops.mass_apply_velocity(in, out);
      out = (g0 / dt) * out + visc;
    };
    LinearOp inv_mass = [&ops](const Eigen::VectorXd& in, Eigen::VectorXd& out) {
      ops.mass_solve_velocity(in, out);
    };
    SolveSpec spec;
    spec.rtol = cfg_.rtol;
    spec.atol = cfg_.atol;
    spec.max_iter = 100000;
    const SolveResult r = cg_solve(op, rhs, uhat, spec, &inv_mass);
    stats_.linear_iterations += r.iterations;
    stats_.solves += 1;
  } else {
    const FaceData gu_c = sample_velocity_data(ops, bc_.g_u, ops.convective_rule(), t_next);
    if (!impl_->momentum_blocks_ready) {
      impl_->momentum_blocks.clear();
      impl_->momentum_blocks.reserve(mesh_->n_elements());
      for (int e = 0; e < mesh_->n_elements(); ++e)
        impl_->momentum_blocks.emplace_back(ops.momentum_element_block(e, g0 / dt));
      impl_->momentum_blocks_ready = true;
    }
    const int stride = spaces_->velocity().elem_stride();
    LinearOp precond = [this, stride](const Eigen::VectorXd& in, Eigen::VectorXd& out) {
      out.resize(in.size());
      for (std::size_t e = 0; e < impl_->momentum_blocks.size(); ++e)
        out.segment(static_cast<Eigen::Index>(e) * stride, stride) =
            impl_->momentum_blocks[e].solve(in.segment(static_cast<Eigen::Index>(e) * stride, stride));
    };
    ResidualFn residual = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r) {
      Eigen::VectorXd visc(nu), conv(nu);
      ops.viscous_apply_hom(x, visc);
      ops.convective_apply(x, gu_c, conv);
      ops.mass_apply_velocity(x, r);
      r = (g0 / dt) * r + visc + conv - rhs;
    };
    LinearizedSolveFn lin_solve = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& r,
                                      Eigen::VectorXd& dx) {
      LinearOp jac = [&](const Eigen::VectorXd& in, Eigen::VectorXd& out) {
        Eigen::VectorXd visc(nu), conv(nu);
        ops.viscous_apply_hom(in, visc);
        ops.convective_linearization_apply(x, in, gu_c, conv);
        ops.mass_apply_velocity(in, out);
        out = (g0 / dt) * out + visc + conv;
      };
      SolveSpec spec;
      spec.rtol = 1e-4;
      spec.atol = std::max(cfg_.atol, 1e-3 * cfg_.rtol * r.norm());
      spec.max_iter = 20000;
      spec.restart = 60;
      dx.setZero();
      const SolveResult lr = gmres_solve(jac, r, dx, spec, &precond);
      stats_.linear_iterations += lr.iterations;
    };
    SolveSpec nspec;
    nspec.rtol = cfg_.rtol;
    nspec.atol = cfg_.atol;
    const SolveResult r = newton_solve(residual, lin_solve, uhat, nspec);
    stats_.newton_iterations += r.iterations;
    stats_.solves += 1;
  }

  // pressure step for the increment phi
  const FaceData gu_div = sample_velocity_data(ops, bc_.g_u, ops.velocity_rule(), t_next);
  Eigen::VectorXd div_uhat(np);
  ops.divergence_apply(uhat,
                       cfg_.formulation == FluxFormulation::integrated_by_parts ? &gu_div : nullptr,
                       div_uhat);
  const ScalarFunc g_phi = pressure_correction_phi_g(bc_, t_next, dt, jp);
  Eigen::VectorXd phi(np);
  {
    const FaceData gphi_p = sample_scalar_data(ops, g_phi, ops.pressure_rule(), t_next);
    const FaceData hphi = zero_scalar_data(ops, ops.pressure_rule());
    Eigen::VectorXd linhom(np);
    ops.laplace_rhs_inhom(gphi_p, hphi, linhom);
    Eigen::VectorXd rhs_p = (-g0 / dt) * div_uhat - linhom;
    LinearOp lap = [&ops](const Eigen::VectorXd& in, Eigen::VectorXd& out) {
      ops.laplace_apply_hom(in, out);
    };
    LinearOp jacobi = [this](const Eigen::VectorXd& in, Eigen::VectorXd& out) {
      out = impl_->laplace_jacobi_inv.cwiseProduct(in);
    };
    SolveSpec spec;
    spec.rtol = cfg_.rtol;
    spec.atol = cfg_.atol;
    spec.max_iter = 100000;
    if (bc_.pure_dirichlet) spec.project = [](Eigen::VectorXd& v) { nullspace_project(v); };
    impl_->warm_phi.guess(phi);
    const SolveResult r = cg_solve(lap, rhs_p, phi, spec, &jacobi);
    stats_.linear_iterations += r.iterations;
    stats_.solves += 1;
  }

  // pressure update
  Eigen::VectorXd p_new = phi;
  for (int i = 0; i < jp; ++i) p_new += coeffs.beta[i] * history_.pressure(i).coeffs;
  if (cfg_.chi != 0) {
    Eigen::VectorXd corr(np);
    ops.mass_solve_pressure(div_uhat, corr);
    p_new -= (cfg_.chi * bc_.nu) * corr;
  }
  if (bc_.pure_dirichlet) nullspace_project(p_new);

  // projection step
  Eigen::VectorXd u_new(nu);
  {
    FaceData gphi_u;
    const bool need_gp = !bc_.pure_dirichlet &&
                         cfg_.formulation == FluxFormulation::integrated_by_parts;
    if (need_gp) gphi_u = sample_scalar_data(ops, g_phi, ops.velocity_rule(), t_next);
    Eigen::VectorXd grad(nu);
    ops.gradient_apply(phi, need_gp ? &gphi_u : nullptr, grad);
    ops.mass_solve_velocity(grad, tmp);
    u_new = uhat - (dt / g0) * tmp;
  }

  impl_->warm_uhat.push(uhat);
  impl_->warm_phi.push(phi);
  CoefficientField uf(spaces_->velocity());
  uf.coeffs = std::move(u_new);
  uf.time = t_next;
  CoefficientField pf(spaces_->pressure());
  pf.coeffs = std::move(p_new);
  pf.time = t_next;
  history_.push(t_next, std::move(uf), std::move(pf));
}

// ---------------------------------------------------------------------------
// coupled solution approach
// ---------------------------------------------------------------------------

void SchemeRunner::coupled_step() {
  const double dt = cfg_.dt;
  const double t_next = time_ + dt;
  const int J = cfg_.J;
  const BdfCoefficients coeffs = BdfCoefficients::make(J, J);
  const double g0 = coeffs.gamma0;
  DgOperators& ops = *ops_;
  const Eigen::Index nu = impl_->nu;
  const Eigen::Index np = impl_->np;

  if (!impl_->momentum_blocks_ready) {
    impl_->momentum_blocks.clear();
    impl_->momentum_blocks.reserve(mesh_->n_elements());
    for (int e = 0; e < mesh_->n_elements(); ++e)
      impl_->momentum_blocks.emplace_back(ops.momentum_element_block(e, g0 / dt));
    impl_->momentum_blocks_ready = true;
  }
  if (!impl_->laplace_blocks_ready) {
    impl_->laplace_blocks.clear();
    impl_->laplace_blocks.reserve(mesh_->n_elements());
    for (int e = 0; e < mesh_->n_elements(); ++e) {
      Eigen::MatrixXd blk = ops.laplace_element_block(e);
      blk.diagonal().array() += 1e-10 * blk.diagonal().mean();
      impl_->laplace_blocks.emplace_back(blk);
    }
    impl_->laplace_blocks_ready = true;
  }

  // right-hand side
  Eigen::VectorXd acc(nu), tmp(nu), b(nu + np);
  acc = coeffs.alpha[0] * history_.velocity(0).coeffs;
  for (int i = 1; i < J; ++i) acc += coeffs.alpha[i] * history_.velocity(i).coeffs;
  ops.mass_apply_velocity(acc, tmp);
  b.head(nu) = tmp / dt;
  if (bc_.body_force) {
    ops.body_force_apply(bc_.body_force, t_next, tmp);
    b.head(nu) += tmp;
  }
  const FaceData gu = sample_velocity_data(ops, bc_.g_u, ops.velocity_rule(), t_next);
  const FaceData hu = sample_traction_data(ops, bc_.h_u, ops.velocity_rule(), t_next);
  ops.viscous_rhs_inhom(gu, hu, tmp);
  b.head(nu) -= tmp;
  if (!bc_.pure_dirichlet && cfg_.formulation == FluxFormulation::integrated_by_parts) {
    const FaceData gp = sample_scalar_data(ops, bc_.g_p, ops.velocity_rule(), t_next);
    ops.gradient_rhs_data(gp, tmp);
    b.head(nu) -= tmp;
  }
  {
    Eigen::VectorXd dd(np);
    ops.divergence_rhs_data(gu, dd);
    b.tail(np) = dd;
  }
  const bool convective_implicit =
      cfg_.convective && cfg_.coupled_convective == ConvectiveTreatment::implicit;
  if (cfg_.convective && !convective_implicit) {
    for (int i = 0; i < J; ++i) {
      const FaceData gu_old =
          sample_velocity_data(ops, bc_.g_u, ops.convective_rule(), history_.entry(i).t);
      ops.convective_apply(history_.velocity(i).coeffs, gu_old, tmp);
      b.head(nu) -= coeffs.beta[i] * tmp;
    }
  }

  auto linear_apply = [&](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
    Eigen::VectorXd visc(nu), grad(nu), div(np), mass(nu);
    const auto u = x.head(nu);
    const auto p = x.tail(np);
    ops.viscous_apply_hom(u, visc);
    ops.mass_apply_velocity(u, mass);
    ops.gradient_apply_hom(p, grad);
    ops.divergence_apply_hom(u, div);
    out.resize(nu + np);
    out.head(nu) = (g0 / dt) * mass + visc + grad;
    out.tail(np) = -div;
  };

  // block-triangular right preconditioner: approximate momentum inverse by the
  // element-diagonal blocks; Schur complement by nu M_p^{-1} + (g0/dt) L^{-1}
  // with an inner block-Jacobi CG on the Laplace operator.
  const int stride_u = spaces_->velocity().elem_stride();
  const int stride_p = spaces_->pressure().elem_stride();
  LinearOp lap = [&ops](const Eigen::VectorXd& in, Eigen::VectorXd& out) {
    ops.laplace_apply_hom(in, out);
  };
  LinearOp lap_block_jacobi = [this, stride_p](const Eigen::VectorXd& in, Eigen::VectorXd& out) {
    out.resize(in.size());
    for (std::size_t e = 0; e < impl_->laplace_blocks.size(); ++e)
      out.segment(static_cast<Eigen::Index>(e) * stride_p, stride_p) =
          impl_->laplace_blocks[e].solve(in.segment(static_cast<Eigen::Index>(e) * stride_p, stride_p));
  };
  LinearOp precond = [&, this](const Eigen::VectorXd& r, Eigen::VectorXd& z) {
    z.resize(nu + np);
    Eigen::VectorXd rp = r.tail(np);
    Eigen::VectorXd zp1(np), zp2(np);
    ops.mass_solve_pressure(rp, zp1);
    zp2.setZero();
    SolveSpec ispec;
    ispec.rtol = 1e-2;
    ispec.atol = 1e-300;
    ispec.max_iter = 200;
    ispec.throw_on_max_iter = false;
    if (bc_.pure_dirichlet) ispec.project = [](Eigen::VectorXd& v) { nullspace_project(v); };
    cg_solve(lap, rp, zp2, ispec, &lap_block_jacobi);
    z.tail(np) = -(bc_.nu * zp1 + (g0 / dt) * zp2);
    Eigen::VectorXd ru(nu), grad(nu);
    ops.gradient_apply_hom(z.tail(np), grad);
    ru = r.head(nu) - grad;
    for (std::size_t e = 0; e < impl_->momentum_blocks.size(); ++e)
      z.segment(static_cast<Eigen::Index>(e) * stride_u, stride_u) =
          impl_->momentum_blocks[e].solve(ru.segment(static_cast<Eigen::Index>(e) * stride_u, stride_u));
  };

  SolveSpec spec;
  spec.rtol = cfg_.rtol;
  spec.atol = cfg_.atol;
  spec.max_iter = 20000;
  spec.restart = 60;
  if (bc_.pure_dirichlet) {
    spec.project = [nu, np](Eigen::VectorXd& v) {
      auto pb = v.segment(nu, np);
      pb.array() -= pb.mean();
    };
  }

  Eigen::VectorXd x(nu + np);
  impl_->warm_coupled.guess(x);

  if (!convective_implicit) {
    const SolveResult r = gmres_solve(linear_apply, b, x, spec, &precond);
    stats_.linear_iterations += r.iterations;
    stats_.solves += 1;
  } else {
    const FaceData gu_c = sample_velocity_data(ops, bc_.g_u, ops.convective_rule(), t_next);
    ResidualFn residual = [&](const Eigen::VectorXd& y, Eigen::VectorXd& r) {
      linear_apply(y, r);
      Eigen::VectorXd conv(nu);
      ops.convective_apply(y.head(nu), gu_c, conv);
      r.head(nu) += conv;
      r -= b;
    };
    LinearizedSolveFn lin_solve = [&](const Eigen::VectorXd& y, const Eigen::VectorXd& r,
                                      Eigen::VectorXd& dx) {
      LinearOp jac = [&](const Eigen::VectorXd& in, Eigen::VectorXd& out) {
        linear_apply(in, out);
        Eigen::VectorXd conv(nu);
        ops.convective_linearization_apply(y.head(nu), in.head(nu), gu_c, conv);
        out.head(nu) += conv;
      };
      SolveSpec lspec = spec;
      lspec.rtol = 1e-4;
      lspec.atol = std::max(cfg_.atol, 1e-3 * cfg_.rtol * r.norm());
      dx.setZero();
      const SolveResult lr = gmres_solve(jac, r, dx, lspec, &precond);
      stats_.linear_iterations += lr.iterations;
    };
    SolveSpec nspec;
    nspec.rtol = cfg_.rtol;
    nspec.atol = cfg_.atol;
    const SolveResult r = newton_solve(residual, lin_solve, x, nspec);
    stats_.newton_iterations += r.iterations;
    stats_.solves += 1;
  }

  Eigen::VectorXd u_new = x.head(nu);
  Eigen::VectorXd p_new = x.tail(np);
  if (bc_.pure_dirichlet) nullspace_project(p_new);
  impl_->warm_coupled.push(x);

  CoefficientField uf(spaces_->velocity());
  uf.coeffs = std::move(u_new);
  uf.time = t_next;
  CoefficientField pf(spaces_->pressure());
  pf.coeffs = std::move(p_new);
  pf.time = t_next;
  history_.push(t_next, std::move(uf), std::move(pf));
}

// ---------------------------------------------------------------------------
// steady-state fixed-point probe
// ---------------------------------------------------------------------------

namespace {

AnalyticProblem steady_probe_problem() {
  const double pi = M_PI;
  AnalyticProblem prob;
  prob.id = "steady-probe";
  prob.nu = 1.0;
  prob.origin = {0.0, 0.0};
  prob.lengths = {1.0, 1.0};
  prob.end_time = 1.0;
  prob.convective = false;
  prob.pure_dirichlet = true;
  // u = curl(sin(pi x) sin(pi y)), p = sin(pi x) cos(pi y) (zero mean)
  prob.velocity = [pi](const Vec2& x, double) {
    return Vec2{pi * std::sin(pi * x[0]) * std::cos(pi * x[1]),
                -pi * std::cos(pi * x[0]) * std::sin(pi * x[1])};
  };
  prob.pressure = [pi](const Vec2& x, double) { return std::sin(pi * x[0]) * std::cos(pi * x[1]); };
  prob.dvelocity_dt = [](const Vec2&, double) { return Vec2{0.0, 0.0}; };
  prob.velocity_grad = [pi](const Vec2& x, double) {
    return std::array<double, 4>{pi * pi * std::cos(pi * x[0]) * std::cos(pi * x[1]),
                                 -pi * pi * std::sin(pi * x[0]) * std::sin(pi * x[1]),
                                 pi * pi * std::sin(pi * x[0]) * std::sin(pi * x[1]),
                                 -pi * pi * std::cos(pi * x[0]) * std::cos(pi * x[1])};
  };
  prob.body_force = [pi](const Vec2& x, double) {
    // f = -nu lap(u) + grad(p) with lap(u) = -2 pi^2 u
    const double lap = 2.0 * pi * pi;
    const Vec2 u{pi * std::sin(pi * x[0]) * std::cos(pi * x[1]),
                 -pi * std::cos(pi * x[0]) * std::sin(pi * x[1])};
    return Vec2{lap * u[0] + pi * std::cos(pi * x[0]) * std::cos(pi * x[1]),
                lap * u[1] - pi * std::sin(pi * x[0]) * std::sin(pi * x[1])};
  };
  prob.classifier = all_dirichlet();
  return prob;
}

struct ProbeRun {
  double defect = 0.0;
  int iterations = 0;
};

ProbeRun probe_fixed_point(const AnalyticProblem& prob, const SchemeConfig& cfg) {
  SchemeConfig c = cfg;
  c.dt = cfg.dt;
  c.end_time = cfg.dt * 10000;  // stepping is driven manually below
  c.convective = false;
  SchemeRunner runner(prob, /*level=*/1, /*degree_u=*/2, OrderMode::mixed, c);
  runner.prime_history();
  Eigen::VectorXd prev_u = runner.velocity().coeffs;
  ProbeRun out;
  for (int it = 0; it < 10000; ++it) {
    runner.step();
    out.iterations = it + 1;
    const double du = (runner.velocity().coeffs - prev_u).cwiseAbs().maxCoeff();
    prev_u = runner.velocity().coeffs;
    if (du < 1e-11 * (1.0 + prev_u.cwiseAbs().maxCoeff())) break;
  }
  const DgOperators& ops = runner.ops();
  const FaceData g = sample_boundary_data(
      ops.mesh(), ops.velocity_rule(), 2,
      [&prob](const Vec2& x, const Vec2&, BoundaryTag, double* o) {
        const Vec2 v = prob.velocity(x, 0.0);
        o[0] = v[0];
        o[1] = v[1];
      });
  Eigen::VectorXd defect(runner.spaces().pressure().n_dofs());
  ops.divergence_apply(runner.velocity().coeffs,
                       cfg.formulation == FluxFormulation::integrated_by_parts ? &g : nullptr,
                       defect);
  out.defect = defect.norm();
  return out;
}

Eigen::MatrixXd assemble_dense(const LinearOp& apply, Eigen::Index rows, Eigen::Index cols) {
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

}  // namespace

SteadyProbeResult steady_stokes_system_probe(const SchemeConfig& cfg) {
  if (cfg.dt <= 0.0) throw std::invalid_argument("steady_stokes_system_probe: dt must be set");
  const AnalyticProblem prob = steady_probe_problem();
  SteadyProbeResult res;
  res.dt_coarse = cfg.dt;
  res.dt_fine = 0.5 * cfg.dt;

  SchemeConfig c1 = cfg;
  c1.dt = res.dt_coarse;
  const ProbeRun r1 = probe_fixed_point(prob, c1);
  SchemeConfig c2 = cfg;
  c2.dt = res.dt_fine;
  const ProbeRun r2 = probe_fixed_point(prob, c2);
  res.defect_coarse = r1.defect;
  res.defect_fine = r2.defect;
  res.defect_ratio = r1.defect / std::max(r2.defect, 1e-300);
  res.iterations_coarse = r1.iterations;
  res.iterations_fine = r2.iterations;

  const BdfCoefficients coeffs = BdfCoefficients::make(cfg.J, cfg.effective_jp());
  double beta_sum = 0.0;
  for (double bsum : coeffs.beta) beta_sum += bsum;
  switch (cfg.kind) {
    case SchemeKind::pressure_correction: res.stabilization_factor = 1.0 - beta_sum; break;
    case SchemeKind::dual_splitting: res.stabilization_factor = 1.0; break;
    case SchemeKind::coupled: res.stabilization_factor = 0.0; break;
  }

  // dense small-instance blocks of the steady operators
  Mesh mesh = prob.make_mesh(1);
  SpacePair spaces(mesh, 2, OrderMode::mixed);
  OperatorConfig ocfg;
  ocfg.nu = prob.nu;
  ocfg.formulation = cfg.formulation;
  DgOperators ops(spaces, ocfg);
  const Eigen::Index nu = static_cast<Eigen::Index>(spaces.velocity().n_dofs());
  const Eigen::Index np = static_cast<Eigen::Index>(spaces.pressure().n_dofs());
  res.viscous_block = assemble_dense(
      [&ops](const Eigen::VectorXd& in, Eigen::VectorXd& out) { ops.viscous_apply_hom(in, out); },
      nu, nu);
  res.gradient_block = assemble_dense(
      [&ops](const Eigen::VectorXd& in, Eigen::VectorXd& out) { ops.gradient_apply_hom(in, out); },
      nu, np);
  res.divergence_block = assemble_dense(
      [&ops](const Eigen::VectorXd& in, Eigen::VectorXd& out) { ops.divergence_apply_hom(in, out); },
      np, nu);
  return res;
}

}  // namespace nsdg
