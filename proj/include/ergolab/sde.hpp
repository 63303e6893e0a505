#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>

#include "ergolab/flow.hpp"
#include "ergolab/mechanisms.hpp"
#include "ergolab/rng.hpp"

namespace ergolab {

struct SimulationError : std::runtime_error {
  explicit SimulationError(const std::string& what) : std::runtime_error(what) {}
};

/// gamma0(x) = beta - b x
struct AffineDrift {
  double beta = 0.0;
  double b = 0.0;
  double operator()(double x) const { return beta - b * x; }
};

/// piecewise-linear drift table; Lipschitz by construction, extended by the
/// boundary slopes outside the tabulated range
struct TabulatedDrift {
  Eigen::ArrayXd x;
  Eigen::ArrayXd y;
  double operator()(double xq) const;
  /// largest A with gamma0(y)-gamma0(x) <= -A(y-x); negative slopes only
  double dissipativity() const;
};

/// scale * x^exponent with exponent in [1, 2]
struct PowerRate {
  double scale = 1.0;
  double exponent = 1.0;
  double operator()(double x) const;
};

struct NonlinearRates {
  std::variant<AffineDrift, TabulatedDrift> gamma0;
  PowerRate gamma1;
  PowerRate gamma2;

  double drift(double x) const;
  double drift_dissipativity() const;
  void validate() const;
};

struct EnvironmentParams {
  double b_env = 0.0;
  double sigma_env = 0.0;
  LevyMeasure mu_env;  // Levy measure on R (atoms may sit on either side)

  /// E[Z_1] = b_env + ∫_{|z|>1} (e^z - 1) mu_env(dz); +inf when the
  /// exponential tail moment diverges
  double mean_z1() const;
  /// drift of the log-environment: a_env = b_env - sigma_env^2/2
  /// - ∫_{[-1,1]} (e^z - 1 - z) mu_env(dz)
  double a_env() const;
};

struct CbiModel {
  CbiParams params;
};

struct CnbiModel {
  NonlinearRates rates;
  LevyMeasure m;
  LevyMeasure nu;
};

struct CbireModel {
  CbiParams params;
  EnvironmentParams env;
};

struct ModelSpec {
  std::variant<CbiModel, CnbiModel, CbireModel> variant;

  /// theoretical contraction rate A: b for CBI, the drift dissipativity for
  /// CNBI, b - E[Z_1] for CBIRE (may be <= 0 or -inf; callers decide whether
  /// that is an error)
  double dissipativity_rate() const;
  void validate() const;
  bool is_cbire() const { return std::holds_alternative<CbireModel>(variant); }
};

struct SimConfig {
  double dt = 1e-3;
  double horizon = 1.0;
  double jump_cutoff = 1e-3;  // small-jump truncation for infinite-activity measures
  std::uint64_t master_seed = 1;
  int n_paths = 1;
  Eigen::ArrayXd record_grid;  // increasing, multiples of dt, last defines horizon

  void validate() const;
  /// indices such that record_grid[i] == step_index * dt
  std::vector<long> record_steps() const;
};

struct PathResult {
  Eigen::ArrayXd times;
  Eigen::ArrayXd states;
  Eigen::ArrayXd martingale;  // running compensated-noise sum at record times
  bool truncated = false;
  double failure_time = std::numeric_limits<double>::quiet_NaN();
};

struct EnsembleResult {
  Eigen::ArrayXd times;
  Eigen::ArrayXXd states;      // n_paths x n_times
  Eigen::ArrayXXd martingale;  // n_paths x n_times
  int truncated_count = 0;
};

/// N pairs driven by identical noise from two starting points.
struct CoupledEnsemble {
  double x0 = 0.0;
  double y0 = 0.0;
  Eigen::ArrayXd times;
  Eigen::ArrayXXd lower;  // paths started from min(x0, y0)
  Eigen::ArrayXXd upper;  // paths started from max(x0, y0)
  bool shared_noise = true;
  int truncated_count = 0;

  /// fraction of (path, record-time) cells with lower <= upper
  double ordering_fraction() const;
};

struct EnvPathResult {
  Eigen::ArrayXd times;
  Eigen::ArrayXd xi;
  Eigen::ArrayXd z;
};

PathResult simulate_path(const ModelSpec& model, double x0, const SimConfig& config,
                         std::uint64_t path_index);

EnsembleResult simulate_ensemble(const ModelSpec& model, double x0, const SimConfig& config,
                                 int n_threads = 0);

CoupledEnsemble simulate_coupled(const ModelSpec& model, double x0, double y0,
                                 const SimConfig& config, int n_threads = 0);

/// xi and Z increments built from one Brownian motion and one Poisson stream;
/// recorded on the config record grid.
EnvPathResult simulate_environment(const EnvironmentParams& env, const SimConfig& config,
                                   std::uint64_t path_index);

enum class TestFunctionKind { Log1p, Power, ExpNeg };

struct TestFunction {
  TestFunctionKind kind = TestFunctionKind::Log1p;
  double lambda = 1.0;  // exponent for Power (in [1,2]), rate for ExpNeg

  static TestFunction log1p() { return {TestFunctionKind::Log1p, 0.0}; }
  static TestFunction power(double lam) { return {TestFunctionKind::Power, lam}; }
  static TestFunction exp_neg(double lam) { return {TestFunctionKind::ExpNeg, lam}; }

  double value(double x) const;
  double d1(double x) const;
  double d2(double x) const;
};

/// Pointwise generator action L V(x): drift/diffusion terms analytically,
/// jump terms through levy_integral on numerically stable integrands. Throws
/// SimulationError when a required jump moment diverges.
double generator_apply(const ModelSpec& model, const TestFunction& f, double x);

}  // namespace ergolab
