#include <cstdio>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "nsdg/harness.hpp"

namespace {

int run_and_emit(const nsdg::Sweep& sweep, const std::string& out_dir, int workers, bool verbose) {
  std::filesystem::create_directories(out_dir);
  const nsdg::SweepResult result = nsdg::run_sweep(sweep, out_dir, workers, verbose);
  const std::string csv = out_dir + "/results.csv";
  nsdg::emit_csv(result, csv);
  std::size_t diverged = 0;
  for (const nsdg::SweepRow& row : result.rows)
    if (row.diverged) ++diverged;
  std::printf("wrote %s (%zu rows, %zu diverged)\n", csv.c_str(), result.rows.size(), diverged);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"High-order DG solver for the unsteady incompressible Stokes/Navier-Stokes "
               "equations: coupled, dual-splitting and pressure-correction time integrators"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", preset_name;
  int workers = 0;
  bool verbose = false;

  CLI::App* run = app.add_subcommand("run", "run the sweeps defined in a config file");
  run->add_option("--config", config_path, "config file (key = value, one [run] per block)")
      ->required();
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--workers", workers, "concurrent runs (0: from config)");
  run->add_flag("-v,--verbose", verbose, "per-run progress on stderr");

  CLI::App* pre = app.add_subcommand("preset", "run a named preset");
  pre->add_option("name", preset_name, "preset name (see 'nsdg presets')")->required();
  pre->add_option("--out", out_dir, "output directory");
  pre->add_option("--workers", workers, "concurrent runs");
  pre->add_flag("-v,--verbose", verbose, "per-run progress on stderr");

  CLI::App* lst = app.add_subcommand("presets", "list preset names");

  std::string probe_scheme = "dual-splitting";
  int probe_jp = -1, probe_chi = 0;
  double probe_dt = 0.1;
  CLI::App* probe = app.add_subcommand(
      "probe", "steady-state fixed-point probe of the schemes' continuity defect");
  probe->add_option("--scheme", probe_scheme, "coupled | dual-splitting | pressure-correction");
  probe->add_option("--Jp", probe_jp, "pressure extrapolation order");
  probe->add_option("--chi", probe_chi, "rotational flag");
  probe->add_option("--dt", probe_dt, "coarse time step");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*lst) {
      for (const std::string& name : nsdg::preset_names()) std::printf("%s\n", name.c_str());
      return 0;
    }
    if (*run) return run_and_emit(nsdg::load_config(config_path), out_dir, workers, verbose);
    if (*pre) return run_and_emit(nsdg::preset(preset_name), out_dir, workers, verbose);
    if (*probe) {
      nsdg::SchemeConfig cfg;
      if (probe_scheme == "coupled") cfg.kind = nsdg::SchemeKind::coupled;
      else if (probe_scheme == "dual-splitting") cfg.kind = nsdg::SchemeKind::dual_splitting;
      else if (probe_scheme == "pressure-correction")
        cfg.kind = nsdg::SchemeKind::pressure_correction;
      else throw std::invalid_argument("unknown scheme '" + probe_scheme + "'");
      cfg.J = 2;
      cfg.Jp = probe_jp;
      cfg.chi = probe_chi;
      cfg.dt = probe_dt;
      cfg.end_time = 1.0;
      cfg.convective = false;
      const nsdg::SteadyProbeResult res = nsdg::steady_stokes_system_probe(cfg);
      std::printf("scheme=%s dt=%g/%g defect=%.6e/%.6e ratio=%.3f stabilization_factor=%g "
                  "(fixed point after %d/%d steps)\n",
                  probe_scheme.c_str(), res.dt_coarse, res.dt_fine, res.defect_coarse,
                  res.defect_fine, res.defect_ratio, res.stabilization_factor,
                  res.iterations_coarse, res.iterations_fine);
      return 0;
    }
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 1;
  }
  return 0;
}
