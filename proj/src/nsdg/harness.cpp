#include "nsdg/harness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace nsdg {

std::string scheme_name(SchemeKind k) {
  switch (k) {
    case SchemeKind::coupled: return "coupled";
    case SchemeKind::dual_splitting: return "dual-splitting";
    case SchemeKind::pressure_correction: return "pressure-correction";
  }
  return "?";
}

std::string formulation_name(FluxFormulation f) {
  return f == FluxFormulation::integrated_by_parts ? "integrated-by-parts" : "reference";
}

std::string order_mode_name(OrderMode m) { return m == OrderMode::equal ? "equal" : "mixed"; }

void RunConfig::validate() const {
  if (problem != "stokes" && problem != "vortex")
    throw std::invalid_argument("RunConfig: unknown problem '" + problem + "'");
  if (k_u < 1 || (order_mode == OrderMode::mixed && k_u < 2))
    throw std::invalid_argument("RunConfig: invalid polynomial degree");
  if (level < 0 || level > 10) throw std::invalid_argument("RunConfig: invalid level");
  if (dt_over_T.empty()) throw std::invalid_argument("RunConfig: dt_over_T list is empty");
  for (double r : dt_over_T)
    if (!(r > 0.0) || r > 1.0) throw std::invalid_argument("RunConfig: dt_over_T must be in (0,1]");
  scheme_config(dt_over_T.front()).validate();
}

AnalyticProblem RunConfig::make_problem() const {
  return problem == "stokes" ? stokes_problem() : vortex_problem();
}

SchemeConfig RunConfig::scheme_config(double ratio) const {
  const AnalyticProblem prob = make_problem();
  SchemeConfig cfg;
  cfg.kind = scheme;
  cfg.J = J;
  cfg.Jp = Jp;
  cfg.chi = chi;
  cfg.dt = ratio * prob.end_time;
  cfg.end_time = prob.end_time;
  cfg.formulation = formulation;
  cfg.convective = convective < 0 ? prob.convective : convective != 0;
  cfg.rtol = rtol;
  cfg.atol = atol;
  cfg.lambda_mode = lambda_mode;
  cfg.ds_consistent_ghat = ds_consistent_ghat;
  cfg.coupled_convective = coupled_convective;
  return cfg;
}

std::string RunConfig::label(double ratio) const {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s_%s_%s_%s_k%d_l%d_J%d_dt%g", problem.c_str(),
                scheme_name(scheme).c_str(), formulation_name(formulation).c_str(),
                order_mode_name(order_mode).c_str(), k_u, level, J, ratio);
  std::string s(buf);
  for (char& c : s)
    if (c == '.' || c == '+') c = 'p';
  return s;
}

// ---------------------------------------------------------------------------
// configuration text
// ---------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

struct RawRun {
  RunConfig base;
  std::vector<int> k_list{2};
  std::vector<int> level_list{2};
};

void apply_key(RawRun& run, const std::string& key, const std::string& value) {
  RunConfig& c = run.base;
  auto bad = [&]() {
    throw std::invalid_argument("config: bad value '" + value + "' for key '" + key + "'");
  };
  if (key == "problem") {
    c.problem = value;
  } else if (key == "scheme") {
    if (value == "coupled") c.scheme = SchemeKind::coupled;
    else if (value == "dual-splitting") c.scheme = SchemeKind::dual_splitting;
    else if (value == "pressure-correction") c.scheme = SchemeKind::pressure_correction;
    else bad();
  } else if (key == "J") {
    c.J = std::stoi(value);
  } else if (key == "Jp") {
    c.Jp = std::stoi(value);
  } else if (key == "chi") {
    c.chi = std::stoi(value);
  } else if (key == "formulation") {
    if (value == "integrated-by-parts" || value == "ibp")
      c.formulation = FluxFormulation::integrated_by_parts;
    else if (value == "reference") c.formulation = FluxFormulation::reference;
    else bad();
  } else if (key == "order" || key == "order_mode") {
    if (value == "equal") c.order_mode = OrderMode::equal;
    else if (value == "mixed") c.order_mode = OrderMode::mixed;
    else bad();
  } else if (key == "k" || key == "k_u") {
    run.k_list.clear();
    for (const std::string& v : split_list(value)) run.k_list.push_back(std::stoi(v));
    if (run.k_list.empty()) bad();
  } else if (key == "level") {
    run.level_list.clear();
    for (const std::string& v : split_list(value)) run.level_list.push_back(std::stoi(v));
    if (run.level_list.empty()) bad();
  } else if (key == "dt_over_T" || key == "dt") {
    c.dt_over_T.clear();
    for (const std::string& v : split_list(value)) c.dt_over_T.push_back(std::stod(v));
  } else if (key == "rtol") {
    c.rtol = std::stod(value);
  } else if (key == "atol") {
    c.atol = std::stod(value);
  } else if (key == "convective") {
    if (value == "auto") c.convective = -1;
    else if (value == "on") c.convective = 1;
    else if (value == "off") c.convective = 0;
    else bad();
  } else if (key == "lambda") {
    if (value == "pointwise") c.lambda_mode = LambdaMode::pointwise;
    else if (value == "element-mean") c.lambda_mode = LambdaMode::element_mean;
    else bad();
  } else if (key == "ghat") {
    if (value == "consistent") c.ds_consistent_ghat = true;
    else if (value == "inconsistent") c.ds_consistent_ghat = false;
    else bad();
  } else if (key == "coupled_convective") {
    if (value == "implicit") c.coupled_convective = ConvectiveTreatment::implicit;
    else if (value == "extrapolated") c.coupled_convective = ConvectiveTreatment::extrapolated;
    else bad();
  } else if (key == "snapshot") {
    c.snapshot = (value == "1" || value == "true" || value == "on");
  } else if (key == "snapshot_samples") {
    c.snapshot_samples = std::stoi(value);
  } else if (key == "seed") {
    c.seed = static_cast<unsigned>(std::stoul(value));
  } else if (key == "workers") {
    c.workers = std::stoi(value);
  } else {
    throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

void expand_into(const RawRun& run, Sweep& sweep) {
  for (int k : run.k_list) {
    for (int level : run.level_list) {
      RunConfig c = run.base;
      c.k_u = k;
      c.level = level;
      c.validate();
      sweep.push_back(std::move(c));
    }
  }
}

}  // namespace

Sweep parse_config_text(const std::string& text) {
  Sweep sweep;
  RawRun defaults;
  bool have_run = false;
  RawRun current;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s == "[run]") {
      if (have_run) expand_into(current, sweep);
      current = defaults;
      have_run = true;
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    try {
      apply_key(have_run ? current : defaults, key, value);
    } catch (const std::exception& err) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": " + err.what());
    }
  }
  if (have_run) {
    expand_into(current, sweep);
  } else if (!defaults.base.dt_over_T.empty()) {
    expand_into(defaults, sweep);
  }
  if (sweep.empty()) throw std::invalid_argument("config: no runs defined");
  return sweep;
}

Sweep load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

// ---------------------------------------------------------------------------
// presets
// ---------------------------------------------------------------------------

namespace {

Sweep stability_preset(SchemeKind scheme) {
  Sweep sweep;
  const std::vector<double> dts{1e0, 1e-1, 1e-2, 1e-3, 1e-4};
  const bool has_reference = scheme != SchemeKind::coupled;
  for (OrderMode mode : {OrderMode::equal, OrderMode::mixed}) {
    for (int form = 0; form < (has_reference ? 2 : 1); ++form) {
      for (int k = 2; k <= 5; ++k) {
        RunConfig c;
        c.problem = "stokes";
        c.scheme = scheme;
        c.J = 1;
        if (scheme == SchemeKind::pressure_correction) {
          c.Jp = 0;
          c.chi = 0;
        }
        c.formulation = form == 0 ? FluxFormulation::integrated_by_parts
                                  : FluxFormulation::reference;
        c.order_mode = mode;
        c.k_u = k;
        c.level = 2;
        c.dt_over_T = dts;
        sweep.push_back(c);
      }
    }
  }
  return sweep;
}

std::vector<double> halvings(int m_max, int m_min = 1) {
  std::vector<double> dts;
  for (int m = m_min; m <= m_max; ++m) dts.push_back(std::ldexp(1.0, -m));
  return dts;
}

Sweep temporal_stokes_preset(int level, int k) {
  Sweep sweep;
  struct Item {
    SchemeKind s;
    int J, Jp, chi;
  };
  const std::vector<Item> items{
      {SchemeKind::coupled, 1, -1, 0},           {SchemeKind::coupled, 2, -1, 0},
      {SchemeKind::dual_splitting, 1, -1, 0},    {SchemeKind::dual_splitting, 2, -1, 0},
      {SchemeKind::pressure_correction, 1, 0, 0}, {SchemeKind::pressure_correction, 2, 1, 0},
      {SchemeKind::pressure_correction, 1, 0, 1}, {SchemeKind::pressure_correction, 2, 1, 1}};
  for (const Item& it : items) {
    RunConfig c;
    c.problem = "stokes";
    c.scheme = it.s;
    c.J = it.J;
    c.Jp = it.Jp;
    c.chi = it.chi;
    c.order_mode = OrderMode::mixed;
    c.k_u = k;
    c.level = level;
    c.dt_over_T = halvings(12);
    sweep.push_back(c);
  }
  return sweep;
}

Sweep temporal_stokes_reduced_preset() {
  Sweep full = temporal_stokes_preset(3, 4);
  // keep coupled/dual splitting J=1,2, standard PC J=1 and rotational PC J=2
  Sweep sweep;
  for (const RunConfig& c : full) {
    if (c.scheme == SchemeKind::pressure_correction) {
      const bool std_j1 = (c.J == 1 && c.chi == 0);
      const bool rot_j2 = (c.J == 2 && c.chi == 1);
      if (!std_j1 && !rot_j2) continue;
    }
    sweep.push_back(c);
  }
  return sweep;
}

RunConfig spatial_base(SchemeKind scheme, OrderMode mode, int k, int level) {
  RunConfig c;
  c.problem = "stokes";
  c.scheme = scheme;
  c.J = 2;
  if (scheme == SchemeKind::pressure_correction) {
    c.Jp = 1;
    c.chi = 1;
  }
  c.order_mode = mode;
  c.k_u = k;
  c.level = level;
  c.dt_over_T = {1e-4};
  return c;
}

Sweep spatial_stokes_preset() {
  Sweep sweep;
  for (SchemeKind scheme : {SchemeKind::coupled, SchemeKind::dual_splitting,
                            SchemeKind::pressure_correction}) {
    for (OrderMode mode : {OrderMode::equal, OrderMode::mixed}) {
      for (int k = 2; k <= 5; ++k) {
        for (int level = 1; level <= 4; ++level)
          sweep.push_back(spatial_base(scheme, mode, k, level));
      }
    }
  }
  return sweep;
}

Sweep spatial_stokes_subset_preset() {
  Sweep sweep;
  for (int level = 1; level <= 4; ++level)
    sweep.push_back(spatial_base(SchemeKind::dual_splitting, OrderMode::mixed, 2, level));
  for (int level = 3; level <= 4; ++level)
    sweep.push_back(spatial_base(SchemeKind::coupled, OrderMode::equal, 3, level));
  for (int level = 3; level <= 4; ++level)
    sweep.push_back(spatial_base(SchemeKind::coupled, OrderMode::mixed, 3, level));
  sweep.push_back(spatial_base(SchemeKind::dual_splitting, OrderMode::equal, 3, 4));
  sweep.push_back(spatial_base(SchemeKind::pressure_correction, OrderMode::equal, 3, 4));
  sweep.push_back(spatial_base(SchemeKind::pressure_correction, OrderMode::mixed, 3, 4));
  return sweep;
}

Sweep infsup_snapshot_preset() {
  Sweep sweep;
  for (SchemeKind scheme : {SchemeKind::dual_splitting, SchemeKind::pressure_correction}) {
    for (int k = 1; k <= 4; ++k) {
      for (double dtr : {1e-1, 1e-3}) {
        RunConfig c;
        c.problem = "stokes";
        c.scheme = scheme;
        c.J = 2;
        if (scheme == SchemeKind::pressure_correction) {
          c.Jp = 1;
          c.chi = 1;
        }
        c.order_mode = OrderMode::equal;
        c.k_u = k;
        c.level = 4 - k;
        c.dt_over_T = {dtr};
        c.snapshot = true;
        sweep.push_back(c);
      }
      // mixed-order companion (k_u = k + 1, k_p = k)
      for (double dtr : {1e-1, 1e-3}) {
        RunConfig c;
        c.problem = "stokes";
        c.scheme = scheme;
        c.J = 2;
        if (scheme == SchemeKind::pressure_correction) {
          c.Jp = 1;
          c.chi = 1;
        }
        c.order_mode = OrderMode::mixed;
        c.k_u = k + 1;
        c.level = 4 - k;
        c.dt_over_T = {dtr};
        c.snapshot = true;
        sweep.push_back(c);
      }
    }
  }
  return sweep;
}

Sweep temporal_vortex_preset(int level, int k, bool reduced) {
  Sweep sweep;
  struct Item {
    SchemeKind s;
    int J, Jp, chi;
  };
  std::vector<Item> items;
  if (reduced) {
    items = {{SchemeKind::coupled, 1, -1, 0},           {SchemeKind::coupled, 2, -1, 0},
             {SchemeKind::dual_splitting, 1, -1, 0},    {SchemeKind::dual_splitting, 2, -1, 0},
             {SchemeKind::pressure_correction, 1, 0, 0}, {SchemeKind::pressure_correction, 2, 1, 1}};
  } else {
    items = {{SchemeKind::coupled, 1, -1, 0},           {SchemeKind::coupled, 2, -1, 0},
             {SchemeKind::dual_splitting, 1, -1, 0},    {SchemeKind::dual_splitting, 2, -1, 0},
             {SchemeKind::pressure_correction, 1, 0, 0}, {SchemeKind::pressure_correction, 2, 1, 0},
             {SchemeKind::pressure_correction, 1, 0, 1}, {SchemeKind::pressure_correction, 2, 1, 1}};
  }
  for (const Item& it : items) {
    RunConfig c;
    c.problem = "vortex";
    c.scheme = it.s;
    c.J = it.J;
    c.Jp = it.Jp;
    c.chi = it.chi;
    c.order_mode = OrderMode::mixed;
    c.k_u = k;
    c.level = level;
    c.dt_over_T = halvings(reduced ? 10 : 12);
    sweep.push_back(c);
  }
  return sweep;
}

Sweep spatial_vortex_preset(bool subset) {
  Sweep sweep;
  const std::vector<SchemeKind> schemes =
      subset ? std::vector<SchemeKind>{SchemeKind::dual_splitting}
             : std::vector<SchemeKind>{SchemeKind::coupled, SchemeKind::dual_splitting,
                                       SchemeKind::pressure_correction};
  const std::vector<int> ks = subset ? std::vector<int>{2, 3} : std::vector<int>{2, 3, 4, 5};
  for (SchemeKind scheme : schemes) {
    for (int k : ks) {
      for (int level = 1; level <= 4; ++level) {
        RunConfig c;
        c.problem = "vortex";
        c.scheme = scheme;
        c.J = 2;
        if (scheme == SchemeKind::pressure_correction) {
          c.Jp = 1;
          c.chi = 1;
        }
        c.order_mode = OrderMode::mixed;
        c.k_u = k;
        c.level = level;
        c.dt_over_T = {subset ? 2.5e-4 : 5e-5};
        sweep.push_back(c);
      }
    }
  }
  return sweep;
}

Sweep ghat_comparison_preset() {
  Sweep sweep;
  for (bool consistent : {true, false}) {
    RunConfig c;
    c.problem = "stokes";
    c.scheme = SchemeKind::dual_splitting;
    c.J = 2;
    c.order_mode = OrderMode::mixed;
    c.k_u = 4;
    c.level = 2;
    c.dt_over_T = halvings(9, 2);
    c.ds_consistent_ghat = consistent;
    sweep.push_back(c);
  }
  return sweep;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"stability-coupled",
          "stability-dual-splitting",
          "stability-pressure-correction",
          "temporal-stokes",
          "temporal-stokes-reduced",
          "spatial-stokes",
          "spatial-stokes-subset",
          "infsup-snapshots",
          "temporal-vortex",
          "temporal-vortex-reduced",
          "spatial-vortex",
          "spatial-vortex-subset",
          "ghat-comparison"};
}

Sweep preset(const std::string& name) {
  if (name == "stability-coupled") return stability_preset(SchemeKind::coupled);
  if (name == "stability-dual-splitting") return stability_preset(SchemeKind::dual_splitting);
  if (name == "stability-pressure-correction")
    return stability_preset(SchemeKind::pressure_correction);
  if (name == "temporal-stokes") return temporal_stokes_preset(4, 6);
  if (name == "temporal-stokes-reduced") return temporal_stokes_reduced_preset();
  if (name == "spatial-stokes") return spatial_stokes_preset();
  if (name == "spatial-stokes-subset") return spatial_stokes_subset_preset();
  if (name == "infsup-snapshots") return infsup_snapshot_preset();
  if (name == "temporal-vortex") return temporal_vortex_preset(3, 8, false);
  if (name == "temporal-vortex-reduced") return temporal_vortex_preset(2, 6, true);
  if (name == "spatial-vortex") return spatial_vortex_preset(false);
  if (name == "spatial-vortex-subset") return spatial_vortex_preset(true);
  if (name == "ghat-comparison") return ghat_comparison_preset();
  throw std::invalid_argument("unknown preset '" + name + "'");
}

// ---------------------------------------------------------------------------
// execution
// ---------------------------------------------------------------------------

SweepRow run_single(const RunConfig& cfg, double ratio, const std::string& out_dir) {
  SweepRow row;
  row.cfg = cfg;
  row.dt_over_T = ratio;
  const auto t0 = std::chrono::steady_clock::now();
  const AnalyticProblem prob = cfg.make_problem();
  SchemeRunner runner(prob, cfg.level, cfg.k_u, cfg.order_mode, cfg.scheme_config(ratio));
  runner.run();
  if (runner.diverged()) {
    row.e_u = std::numeric_limits<double>::infinity();
    row.e_p = std::numeric_limits<double>::infinity();
    row.diverged = true;
  } else {
    row.e_u = runner.velocity_error();
    row.e_p = runner.pressure_error();
    row.diverged = !(std::isfinite(row.e_u) && std::isfinite(row.e_p) && row.e_u <= 1e6 &&
                     row.e_p <= 1e6);
  }
  row.linear_iterations = runner.stats().linear_iterations;
  row.newton_iterations = runner.stats().newton_iterations;
  if (cfg.snapshot && !out_dir.empty() && !runner.diverged()) {
    dump_csv(runner.pressure(), out_dir + "/" + cfg.label(ratio) + "_pressure.csv",
             cfg.snapshot_samples);
  }
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

namespace {

bool same_group(const RunConfig& a, const RunConfig& b) {
  return a.problem == b.problem && a.scheme == b.scheme && a.formulation == b.formulation &&
         a.order_mode == b.order_mode && a.k_u == b.k_u && a.J == b.J && a.Jp == b.Jp &&
         a.chi == b.chi && a.ds_consistent_ghat == b.ds_consistent_ghat &&
         a.coupled_convective == b.coupled_convective;
}

void fill_rates(SweepResult& result) {
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    SweepRow& row = result.rows[i];
    for (std::size_t j = i; j-- > 0;) {
      const SweepRow& prev = result.rows[j];
      if (!same_group(prev.cfg, row.cfg)) continue;
      const bool spatial = prev.cfg.level != row.cfg.level && prev.dt_over_T == row.dt_over_T;
      const bool temporal = prev.cfg.level == row.cfg.level && prev.dt_over_T != row.dt_over_T;
      if (!spatial && !temporal) continue;
      if (!std::isfinite(prev.e_u) || !std::isfinite(row.e_u) || prev.e_u <= 0.0 ||
          row.e_u <= 0.0 || prev.e_p <= 0.0 || row.e_p <= 0.0 || !std::isfinite(prev.e_p) ||
          !std::isfinite(row.e_p))
        break;
      if (spatial) {
        const double h1 = std::pow(0.5, prev.cfg.level);
        const double h2 = std::pow(0.5, row.cfg.level);
        row.rate_u = convergence_rate(prev.e_u, row.e_u, h1, h2);
        row.rate_p = convergence_rate(prev.e_p, row.e_p, h1, h2);
      } else {
        row.rate_u = convergence_rate(prev.e_u, row.e_u, prev.dt_over_T, row.dt_over_T);
        row.rate_p = convergence_rate(prev.e_p, row.e_p, prev.dt_over_T, row.dt_over_T);
      }
      break;
    }
  }
}

}  // namespace

SweepResult run_sweep(const Sweep& sweep, const std::string& out_dir, int workers, bool verbose) {
  struct Task {
    std::size_t cfg_index;
    double ratio;
  };
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    sweep[i].validate();
    for (double r : sweep[i].dt_over_T) tasks.push_back({i, r});
  }
  SweepResult result;
  result.rows.resize(tasks.size());

  int n_workers = workers;
  if (n_workers <= 0) {
    n_workers = 1;
    for (const RunConfig& c : sweep) n_workers = std::max(n_workers, c.workers);
  }
  n_workers = std::min<int>(n_workers, static_cast<int>(tasks.size()));

  std::atomic<std::size_t> next{0};
  std::mutex io_mutex;
  auto work = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const Task& t = tasks[i];
      result.rows[i] = run_single(sweep[t.cfg_index], t.ratio, out_dir);
      if (verbose) {
        std::lock_guard<std::mutex> lock(io_mutex);
        const SweepRow& row = result.rows[i];
        std::fprintf(stderr, "[%zu/%zu] %s e_u=%.4e e_p=%.4e %s its=%ld %.1fs\n", i + 1,
                     tasks.size(), row.cfg.label(row.dt_over_T).c_str(), row.e_u, row.e_p,
                     row.diverged ? "DIVERGED" : "ok", row.linear_iterations, row.seconds);
      }
    }
  };
  if (n_workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(work);
    for (std::thread& th : pool) th.join();
  }
  fill_rates(result);
  return result;
}

void emit_csv(const SweepResult& result, const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // LF line endings everywhere
  if (!out) throw std::runtime_error("emit_csv: cannot open " + path);
  out << "problem,scheme,formulation,order_mode,k_u,k_p,level,J,Jp,chi,dt_over_T,e_u,e_p,rate_u,"
         "rate_p,verdict\n";
  char buf[64];
  auto num = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.8g", v);
    return std::string(buf);
  };
  for (const SweepRow& row : result.rows) {
    const RunConfig& c = row.cfg;
    const int kp = c.order_mode == OrderMode::equal ? c.k_u : c.k_u - 1;
    const SchemeConfig sc = c.scheme_config(row.dt_over_T);
    out << c.problem << ',' << scheme_name(c.scheme) << ',' << formulation_name(c.formulation)
        << ',' << order_mode_name(c.order_mode) << ',' << c.k_u << ',' << kp << ',' << c.level
        << ',' << c.J << ',' << sc.effective_jp() << ',' << c.chi << ',' << num(row.dt_over_T)
        << ',' << num(row.e_u) << ',' << num(row.e_p) << ','
        << (std::isfinite(row.rate_u) ? num(row.rate_u) : "") << ','
        << (std::isfinite(row.rate_p) ? num(row.rate_p) : "") << ','
        << (row.diverged ? "diverged" : "finite") << '\n';
  }
}

}  // namespace nsdg
