#pragma once

#include <limits>
#include <string>
#include <vector>

#include "nsdg/schemes.hpp"

namespace nsdg {

// One run block: a single (problem, scheme, space, mesh) setup swept over a
// list of time-step sizes.
struct RunConfig {
  std::string problem = "stokes";  // stokes | vortex
  SchemeKind scheme = SchemeKind::coupled;
  int J = 2;
  int Jp = -1;
  int chi = 0;
  FluxFormulation formulation = FluxFormulation::integrated_by_parts;
  OrderMode order_mode = OrderMode::mixed;
  int k_u = 2;
  int level = 2;
  std::vector<double> dt_over_T;
  double rtol = 1e-8;
  double atol = 1e-12;
  int convective = -1;  // -1 from problem, 0 off, 1 on
  LambdaMode lambda_mode = LambdaMode::pointwise;
  bool ds_consistent_ghat = true;
  ConvectiveTreatment coupled_convective = ConvectiveTreatment::implicit;
  bool snapshot = false;
  int snapshot_samples = 20;
  unsigned seed = 0;
  int workers = 1;

  void validate() const;
  AnalyticProblem make_problem() const;
  SchemeConfig scheme_config(double dt_over_T_value) const;
  std::string label(double dt_over_T_value) const;
};

using Sweep = std::vector<RunConfig>;

struct SweepRow {
  RunConfig cfg;
  double dt_over_T = 0.0;
  double e_u = 0.0;
  double e_p = 0.0;
  double rate_u = std::numeric_limits<double>::quiet_NaN();
  double rate_p = std::numeric_limits<double>::quiet_NaN();
  bool diverged = false;
  long linear_iterations = 0;
  long newton_iterations = 0;
  double seconds = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
};

// Flat key=value configuration text with one [run] section per run block;
// keys before the first section act as defaults. Lists (k, level, dt_over_T)
// are comma separated; k and level lists expand into separate run blocks.
Sweep parse_config_text(const std::string& text);
Sweep load_config(const std::string& path);

std::vector<std::string> preset_names();
Sweep preset(const std::string& name);

// Executes one run at a given dt/T; writes the pressure snapshot when the
// config requests one and an output directory is given.
SweepRow run_single(const RunConfig& cfg, double dt_over_T_value, const std::string& out_dir);

// Runs all rows of the sweep (worker threads run independent rows), fills the
// rate columns from consecutive rows of matching setups, and keeps rows in
// deterministic order.
SweepResult run_sweep(const Sweep& sweep, const std::string& out_dir, int workers, bool verbose);

void emit_csv(const SweepResult& result, const std::string& path);

std::string scheme_name(SchemeKind k);
std::string formulation_name(FluxFormulation f);
std::string order_mode_name(OrderMode m);

}  // namespace nsdg
