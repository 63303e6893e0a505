#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "ergolab/metrics.hpp"
#include "ergolab/sde.hpp"

namespace ergolab {

enum class ExperimentKind {
  MechanismReport,
  FlowEval,
  W1Decay,
  WlogDecay,
  TvDecay,
  InvariantConvergence,
  Slln,
  Fclt,
  CbireTv,
  LyapunovScan,
};

const char* to_string(ExperimentKind k);
ExperimentKind experiment_kind_from(const std::string& s);

struct ConfigError : std::runtime_error {
  ConfigError(std::string where_, const std::string& what)
      : std::runtime_error(where_ + ": " + what), where(std::move(where_)) {}
  std::string where;  // JSON-pointer-style field address
};

/// A theorem precondition failed for the requested experiment; the run is
/// refused rather than producing a meaningless verdict.
struct RefusalError : std::runtime_error {
  RefusalError(std::string condition_, const std::string& what)
      : std::runtime_error(what), condition(std::move(condition_)) {}
  std::string condition;
};

struct FitBand {
  double lo = 0.8;
  double hi = 1.3;  // <= 0 disables the upper check
};

struct Scenario {
  std::string name;
  ExperimentKind kind = ExperimentKind::MechanismReport;
  std::string claim;  // the statement the experiment exercises, echoed in reports
  ModelSpec model;
  SimConfig sim;
  double x0 = 0.0;
  double y0 = 0.0;
  FitBand fit;
  std::string expect = "contraction";  // "no-contraction" flips the decay verdict
  double lambda = 1.0;                 // transform/test-function parameter
  double tolerance = 0.15;             // relative tolerance (fclt)
  double w1_max = std::numeric_limits<double>::quiet_NaN();
  double tv_max = std::numeric_limits<double>::quiet_NaN();
  int env_samples = 200;   // environment sample count (cbire-tv)
  double burn_in = 0.0;    // 0 = auto (10 / dissipativity rate)
  double batch_len = 0.0;  // 0 = auto
  std::string test_fn = "log1p";  // lyapunov-scan: "log1p" or "power"
  std::string out_dir;            // empty: no files written
};

Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const Scenario& s);
Scenario parse_scenario_file(const std::string& path);

struct RunResult {
  Verdict verdict = Verdict::Inconclusive;
  nlohmann::json summary;
  std::string csv;  // [t, estimate, stderr, theoretical_bound]
  std::vector<std::string> written;
};

RunResult run_scenario(const Scenario& s, int n_threads = 0);

int exit_code(Verdict v);

struct CatalogEntry {
  std::string name;
  std::string kind;
  std::string claim;
};

/// Built-in presets in stable, documented order.
std::vector<CatalogEntry> list_scenarios();
Scenario preset_scenario(const std::string& name);

const std::string& version_string();

}  // namespace ergolab
