#pragma once

#include <deque>
#include <memory>
#include <string>

#include "nsdg/bcdata.hpp"
#include "nsdg/krylov.hpp"
#include "nsdg/problems.hpp"

namespace nsdg {

enum class SchemeKind { coupled, dual_splitting, pressure_correction };

enum class ConvectiveTreatment { implicit, extrapolated };

struct SchemeConfig {
  SchemeKind kind = SchemeKind::coupled;
  int J = 2;
  int Jp = -1;  // -1: scheme default (dual splitting: J, pressure correction: J-1)
  int chi = 0;  // pressure-correction update: 0 standard, 1 rotational
  double dt = 0.0;
  double end_time = 0.0;
  FluxFormulation formulation = FluxFormulation::integrated_by_parts;
  bool convective = false;
  double rtol = 1e-8;
  double atol = 1e-12;
  LambdaMode lambda_mode = LambdaMode::pointwise;
  // Dual splitting: consistent intermediate-velocity Dirichlet datum, or the
  // plain g_u(t_{n+1}) for comparison runs.
  bool ds_consistent_ghat = true;
  ConvectiveTreatment coupled_convective = ConvectiveTreatment::implicit;

  int effective_jp() const;
  void validate() const;
};

struct SolverStats {
  long linear_iterations = 0;
  long newton_iterations = 0;
  int solves = 0;
  double last_residual = 0.0;
};

// Advances one benchmark problem in time with one of the three solution
// strategies. Construction builds the mesh, spaces and operators; run() primes
// the BDF history from the analytic solution and steps to the end time.
class SchemeRunner {
public:
  SchemeRunner(const AnalyticProblem& problem, int level, int degree_u, OrderMode mode,
               const SchemeConfig& cfg);
  ~SchemeRunner();

  void prime_history();
  void step();
  void run();

  int n_steps() const { return n_steps_; }
  double time() const { return time_; }
  bool diverged() const { return diverged_; }
  const std::string& failure_reason() const { return failure_reason_; }

  const CoefficientField& velocity() const;
  const CoefficientField& pressure() const;
  double velocity_error() const;
  double pressure_error() const;

  const DgOperators& ops() const { return *ops_; }
  const SpacePair& spaces() const { return *spaces_; }
  const AnalyticProblem& problem() const { return problem_; }
  const SolverStats& stats() const { return stats_; }

private:
  struct Impl;
  void coupled_step();
  void dual_splitting_step();
  void pressure_correction_step();

  AnalyticProblem problem_;
  SchemeConfig cfg_;
  std::unique_ptr<Mesh> mesh_;
  std::unique_ptr<SpacePair> spaces_;
  std::unique_ptr<DgOperators> ops_;
  BcSet bc_;
  History history_;
  std::unique_ptr<Impl> impl_;
  double time_ = 0.0;
  int n_steps_ = 0;
  int step_count_ = 0;
  bool diverged_ = false;
  std::string failure_reason_;
  SolverStats stats_;
};

// Fixed-point diagnostics on a tiny steady Stokes setup: drives each scheme to
// its steady state for two time-step sizes and reports how the continuity
// defect of the converged velocity scales with dt, together with dense
// small-instance blocks of the viscous/gradient/divergence operators.
struct SteadyProbeResult {
  double dt_coarse = 0.0, dt_fine = 0.0;
  double defect_coarse = 0.0, defect_fine = 0.0;
  double defect_ratio = 0.0;        // defect_coarse / defect_fine
  double stabilization_factor = 0.0;  // 1 - sum(beta_i)
  int iterations_coarse = 0, iterations_fine = 0;
  Eigen::MatrixXd viscous_block, gradient_block, divergence_block;
};
SteadyProbeResult steady_stokes_system_probe(const SchemeConfig& cfg);

}  // namespace nsdg
