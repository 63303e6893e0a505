// Batch experiment runner for the ergodicity laboratory: named scenarios map
// contraction/ergodicity claims onto simulations and emit CSV tables plus
// machine-readable summaries.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ergolab/flow.hpp"
#include "ergolab/scenario.hpp"
#include "ergolab/util.hpp"

namespace {

using namespace ergolab;

struct CommonFlags {
  std::optional<std::uint64_t> seed;
  std::optional<int> paths;
  std::optional<double> dt;
  std::optional<double> horizon;
  std::string out;
  std::string format = "csv";
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--seed", f.seed, "master seed (64-bit)");
  cmd->add_option("--paths", f.paths, "ensemble size");
  cmd->add_option("--dt", f.dt, "Euler step size");
  cmd->add_option("--horizon", f.horizon, "simulation horizon");
  cmd->add_option("--out", f.out, "output directory for CSV and summary files");
  cmd->add_option("--format", f.format, "output format (csv)")->check(CLI::IsMember({"csv"}));
}

void apply_common(Scenario& s, const CommonFlags& f) {
  if (f.seed) s.sim.master_seed = *f.seed;
  if (f.paths) s.sim.n_paths = *f.paths;
  if (f.dt) s.sim.dt = *f.dt;
  if (f.horizon && *f.horizon != s.sim.horizon) {
    // rebuild the record grid with the same point count on the new horizon,
    // snapped to multiples of dt
    double h = *f.horizon;
    Eigen::Index n = s.sim.record_grid.size();
    double step = std::max(s.sim.dt, std::round(h / static_cast<double>(n) / s.sim.dt) * s.sim.dt);
    long count = std::max(1L, std::lround(std::floor(h / step)));
    s.sim.record_grid = uniform_grid(step, count);
    s.sim.horizon = s.sim.record_grid[s.sim.record_grid.size() - 1];
  }
  if (!f.out.empty()) s.out_dir = f.out;
}

int run_and_report(const Scenario& s) {
  RunResult res = run_scenario(s);
  std::cout << res.summary.dump(2) << "\n";
  for (const std::string& path : res.written) std::cout << "wrote " << path << "\n";
  return exit_code(res.verdict);
}

int run_preset_command(const std::string& preset, const CommonFlags& flags) {
  Scenario s = preset_scenario(preset);
  apply_common(s, flags);
  return run_and_report(s);
}

int run_simulate(const std::string& preset, double x0, const CommonFlags& flags) {
  Scenario s = preset_scenario(preset);
  apply_common(s, flags);
  s.model.validate();

  EnsembleResult ens = simulate_ensemble(s.model, x0, s.sim);
  const CbiParams* p = nullptr;
  if (const auto* c = std::get_if<CbiModel>(&s.model.variant)) p = &c->params;

  std::string csv = "t,estimate,stderr,theoretical_bound\n";
  for (Eigen::Index j = 0; j < ens.times.size(); ++j) {
    Eigen::ArrayXd col = ens.states.col(j);
    double mean = col.mean();
    double sd = std::sqrt(std::max((col - mean).square().sum() / col.size(), 0.0));
    double se = sd / std::sqrt(static_cast<double>(col.size()));
    double bound = std::numeric_limits<double>::quiet_NaN();
    if (p) {
      try {
        bound = first_moment(*p, x0, ens.times[j]);
      } catch (const std::exception&) {
      }
    }
    csv += format_double(ens.times[j]) + "," + format_double(mean) + "," + format_double(se) +
           "," + format_double(bound) + "\n";
  }
  if (!flags.out.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(flags.out);
    auto path = fs::path(flags.out) / (s.name + "-trajectory.csv");
    std::ofstream(path) << csv;
    std::cout << "wrote " << path.string() << "\n";
  } else {
    std::cout << csv;
  }
  return ens.truncated_count == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ergolab: simulation laboratory for ergodicity of nonnegative jump processes"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string scenario_name;
  std::string config_path;
  double x0 = 0.0;

  auto* check = app.add_subcommand("check", "mechanism and condition report");
  check->add_option("--scenario", scenario_name, "preset name");
  add_common(check, flags);

  auto* flow = app.add_subcommand("flow", "flow ODE evaluation");
  flow->add_option("--scenario", scenario_name, "preset name");
  add_common(flow, flags);

  auto* simulate = app.add_subcommand("simulate", "simulate an ensemble, emit mean trajectory");
  simulate->add_option("--scenario", scenario_name, "preset supplying the model");
  simulate->add_option("--x0", x0, "initial state");
  add_common(simulate, flags);

  auto* ergodicity = app.add_subcommand("ergodicity", "coupled-decay ergodicity experiment");
  ergodicity->add_option("--scenario", scenario_name, "preset name");
  add_common(ergodicity, flags);

  auto* fclt = app.add_subcommand("fclt", "long-run variance experiment");
  fclt->add_option("--scenario", scenario_name, "preset name");
  add_common(fclt, flags);

  auto* run = app.add_subcommand("run", "run a scenario from a config document");
  run->add_option("config", config_path, "path to a JSON scenario document")->required();
  add_common(run, flags);

  auto* list = app.add_subcommand("list", "list built-in scenario presets");

  CLI11_PARSE(app, argc, argv);

  try {
    if (list->parsed()) {
      for (const CatalogEntry& e : list_scenarios())
        std::cout << e.name << "\t" << e.kind << "\t" << e.claim << "\n";
      return 0;
    }
    if (run->parsed()) {
      Scenario s = parse_scenario_file(config_path);
      apply_common(s, flags);
      return run_and_report(s);
    }
    auto named = [&](const char* dflt) { return scenario_name.empty() ? dflt : scenario_name.c_str(); };
    if (simulate->parsed()) return run_simulate(named("cir-w1"), x0, flags);
    if (check->parsed()) return run_preset_command(named("cir-check"), flags);
    if (flow->parsed()) return run_preset_command(named("cir-flow"), flags);
    if (ergodicity->parsed()) return run_preset_command(named("cir-w1"), flags);
    if (fclt->parsed()) return run_preset_command(named("fclt-cir"), flags);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const RefusalError& e) {
    std::cerr << "refused (" << e.condition << "): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
