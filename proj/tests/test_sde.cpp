#include <catch_amalgamated.hpp>

#include <cmath>

#include "ergolab/metrics.hpp"
#include "ergolab/sde.hpp"
#include "ergolab/util.hpp"

using namespace ergolab;
using Catch::Approx;

namespace {

ModelSpec cir_model(double beta = 1.0, double b = 1.0, double sigma2 = 2.0) {
  CbiParams p;
  p.beta = beta;
  p.b = b;
  p.sigma = std::sqrt(sigma2);
  ModelSpec m;
  m.variant = CbiModel{p};
  return m;
}

SimConfig quick_config(double dt, double horizon, int paths, double step) {
  SimConfig c;
  c.dt = dt;
  c.horizon = horizon;
  c.n_paths = paths;
  c.master_seed = 777;
  long n = std::llround(horizon / step);
  c.record_grid = uniform_grid(step, n);
  return c;
}

}  // namespace

TEST_CASE("all-zero coefficients give a constant path") {
  CbiParams p;
  ModelSpec model;
  model.variant = CbiModel{p};
  PathResult res = simulate_path(model, 5.0, quick_config(1e-3, 1.0, 1, 0.25), 0);
  for (Eigen::Index i = 0; i < res.states.size(); ++i) CHECK(res.states[i] == 5.0);
  CHECK_FALSE(res.truncated);
}

TEST_CASE("deterministic drift follows the ODE solution to Euler order") {
  ModelSpec model = cir_model(1.0, 1.0, 0.0);
  double dt = 1e-3;
  PathResult res = simulate_path(model, 0.0, quick_config(dt, 1.0, 1, 0.5), 0);
  double exact = 1.0 - std::exp(-1.0);
  CHECK(std::abs(res.states[1] - exact) < 5.0 * dt);
}

TEST_CASE("dissipativity rates per model family") {
  CHECK(cir_model().dissipativity_rate() == 1.0);

  CnbiModel nl;
  nl.rates.gamma0 = AffineDrift{1.0, 0.7};
  nl.rates.gamma1 = PowerRate{1.0, 1.5};
  nl.rates.gamma2 = PowerRate{1.0, 1.2};
  ModelSpec m1;
  m1.variant = nl;
  CHECK(m1.dissipativity_rate() == Approx(0.7));

  CbireModel ce;
  ce.params.beta = 1.0;
  ce.params.b = 1.0;
  ce.params.sigma = 1.0;
  ce.env.b_env = 0.25;
  ModelSpec m2;
  m2.variant = ce;
  CHECK(m2.dissipativity_rate() == Approx(0.75));

  // an atom inside [-1,1] is compensated and does not shift E[Z_1]
  ce.env.mu_env = LevyMeasure::atoms({{std::log(2.0), 1.0}});
  CHECK(ce.env.mean_z1() == Approx(0.25));
  // an atom outside [-1,1] contributes e^z - 1
  ce.env.mu_env = LevyMeasure::atoms({{1.5, 0.5}});
  CHECK(ce.env.mean_z1() == Approx(0.25 + 0.5 * std::expm1(1.5)));
}

TEST_CASE("ensemble mean matches the first-moment formula") {
  ModelSpec model = cir_model();
  SimConfig cfg = quick_config(2e-3, 1.0, 20000, 1.0);
  EnsembleResult ens = simulate_ensemble(model, 0.0, cfg);
  Eigen::ArrayXd col = ens.states.col(0);
  double mean = col.mean();
  double se = std::sqrt((col - mean).square().mean() / col.size());
  double target = first_moment(std::get<CbiModel>(model.variant).params, 0.0, 1.0);
  CHECK(std::abs(mean - target) <= 4.0 * se + 5.0 * cfg.dt);
}

TEST_CASE("compensated infinite-activity branching keeps the mean unbiased") {
  // the mean is insensitive to m; a truncation-bias bug would show up here
  CbiParams p;
  p.beta = 1.0;
  p.b = 1.0;
  p.m = LevyMeasure::tempered(1.0, -2.5, 1.0);
  ModelSpec model;
  model.variant = CbiModel{p};
  SimConfig cfg = quick_config(1e-3, 1.0, 10000, 1.0);
  cfg.jump_cutoff = 0.01;  // simulated rate ~ 670 per unit state
  EnsembleResult ens = simulate_ensemble(model, 1.0, cfg);
  Eigen::ArrayXd col = ens.states.col(0);
  double mean = col.mean();
  double se = std::sqrt((col - mean).square().mean() / col.size());
  double target = first_moment(p, 1.0, 1.0);
  CHECK(std::abs(mean - target) <= 4.0 * se + 5.0 * cfg.dt);
}

TEST_CASE("immigration jumps raise the mean by their rate") {
  CbiParams p;
  p.beta = 2.0;
  p.b = 1.0;
  p.nu = LevyMeasure::atoms({{1.0, 1.0}});
  ModelSpec model;
  model.variant = CbiModel{p};
  SimConfig cfg = quick_config(1e-3, 1.0, 20000, 1.0);
  EnsembleResult ens = simulate_ensemble(model, 0.0, cfg);
  Eigen::ArrayXd col = ens.states.col(0);
  double mean = col.mean();
  double se = std::sqrt((col - mean).square().mean() / col.size());
  CHECK(std::abs(mean - first_moment(p, 0.0, 1.0)) <= 4.0 * se + 5.0 * cfg.dt);
}

TEST_CASE("coupled pairs from identical states are identical bit for bit") {
  ModelSpec model = cir_model();
  SimConfig cfg = quick_config(1e-3, 1.0, 64, 0.25);
  CoupledEnsemble c = simulate_coupled(model, 2.0, 2.0, cfg);
  CHECK((c.lower == c.upper).all());
  CHECK(c.ordering_fraction() == 1.0);
}

TEST_CASE("drift-only coupled gap contracts deterministically") {
  ModelSpec model = cir_model(1.0, 1.0, 0.0);
  double dt = 1e-3;
  SimConfig cfg = quick_config(dt, 2.0, 4, 0.5);
  CoupledEnsemble c = simulate_coupled(model, 0.0, 5.0, cfg);
  for (Eigen::Index j = 0; j < c.times.size(); ++j) {
    long n = std::llround(c.times[j] / dt);
    double exact_euler = 5.0 * std::pow(1.0 - dt, static_cast<double>(n));
    CHECK(c.upper(0, j) - c.lower(0, j) == Approx(exact_euler).epsilon(1e-10));
    CHECK(std::abs(exact_euler - 5.0 * std::exp(-c.times[j])) < 10.0 * dt);
  }
}

TEST_CASE("coupled CIR gap sits under the contraction bound") {
  ModelSpec model = cir_model();
  SimConfig cfg = quick_config(1e-3, 2.0, 2000, 0.5);
  CoupledEnsemble c = simulate_coupled(model, 0.0, 5.0, cfg);
  CHECK(c.ordering_fraction() >= 0.99);
  for (double t : {0.5, 1.0, 2.0}) {
    ValueWithError gap = mean_abs_gap(c, t);
    CHECK(gap.value <= 5.0 * std::exp(-t) + 3.0 * gap.stderr_value);
  }
}

TEST_CASE("coupled branching jumps preserve ordering") {
  CbiParams p;
  p.beta = 0.5;
  p.b = 1.0;
  p.sigma = 1.0;
  p.m = LevyMeasure::atoms({{0.5, 1.0}});
  p.nu = LevyMeasure::atoms({{0.3, 0.5}});
  ModelSpec model;
  model.variant = CbiModel{p};
  SimConfig cfg = quick_config(1e-3, 2.0, 1000, 0.25);
  CoupledEnsemble c = simulate_coupled(model, 0.5, 2.0, cfg);
  CHECK(c.ordering_fraction() >= 0.99);
  CHECK((c.lower >= 0.0).all());
  CHECK((c.upper >= 0.0).all());
}

TEST_CASE("ensemble results are deterministic across thread counts") {
  ModelSpec model = cir_model();
  SimConfig cfg = quick_config(1e-3, 0.5, 256, 0.25);
  EnsembleResult a = simulate_ensemble(model, 1.0, cfg, 1);
  EnsembleResult b = simulate_ensemble(model, 1.0, cfg, 3);
  CHECK((a.states == b.states).all());
  // each row reproduces the standalone path with the same index
  PathResult p7 = simulate_path(model, 1.0, cfg, 7);
  CHECK((a.states.row(7).transpose() == p7.states).all());
}

TEST_CASE("martingale part of the noise has mean zero") {
  CbiParams p;
  p.beta = 1.0;
  p.b = 1.0;
  p.sigma = 1.0;
  p.m = LevyMeasure::atoms({{0.4, 1.0}});
  ModelSpec model;
  model.variant = CbiModel{p};
  SimConfig cfg = quick_config(1e-3, 1.0, 20000, 0.5);
  EnsembleResult ens = simulate_ensemble(model, 1.0, cfg);
  for (Eigen::Index j = 0; j < ens.times.size(); ++j) {
    Eigen::ArrayXd col = ens.martingale.col(j);
    double mean = col.mean();
    double se = std::sqrt((col - mean).square().mean() / col.size());
    CHECK(std::abs(mean) <= 4.0 * se);
  }
}

TEST_CASE("state overflow is reported as a truncated path") {
  ModelSpec model = cir_model(0.0, -6.0, 0.0);  // explosive linear drift
  SimConfig cfg = quick_config(1e-2, 8.0, 1, 1.0);
  PathResult res = simulate_path(model, 1.0, cfg, 0);
  CHECK(res.truncated);
  CHECK(res.failure_time > 0.0);
  CHECK(std::isnan(res.states[res.states.size() - 1]));
}

TEST_CASE("environment increments: deterministic drift") {
  EnvironmentParams env;
  env.b_env = 0.7;
  SimConfig cfg = quick_config(1e-2, 1.0, 1, 0.5);
  EnvPathResult res = simulate_environment(env, cfg, 0);
  CHECK(res.xi[1] == Approx(0.7).epsilon(1e-12));
  CHECK(res.z[1] == Approx(0.7).epsilon(1e-12));
}

TEST_CASE("environment increments: Brownian case matches lognormal moments") {
  EnvironmentParams env;
  env.sigma_env = 1.0;  // a_env = -1/2
  CHECK(env.a_env() == Approx(-0.5));
  SimConfig cfg = quick_config(1e-2, 1.0, 1, 1.0);
  const int n = 100000;
  double acc_exp = 0.0, acc_exp2 = 0.0, acc_z = 0.0, acc_z2 = 0.0;
  for (int i = 0; i < n; ++i) {
    EnvPathResult res = simulate_environment(env, cfg, i);
    double e = std::exp(res.xi[0]);
    acc_exp += e;
    acc_exp2 += e * e;
    acc_z += res.z[0];
    acc_z2 += res.z[0] * res.z[0];
  }
  double mean_e = acc_exp / n;
  double se_e = std::sqrt((acc_exp2 / n - mean_e * mean_e) / n);
  CHECK(std::abs(mean_e - 1.0) <= 3.0 * se_e + 0.01);
  double mean_z = acc_z / n;
  double se_z = std::sqrt((acc_z2 / n - mean_z * mean_z) / n);
  CHECK(std::abs(mean_z) <= 3.0 * se_z);
}

TEST_CASE("environment jumps inside [-1,1] are compensated") {
  EnvironmentParams env;
  env.b_env = 0.3;
  env.mu_env = LevyMeasure::atoms({{std::log(2.0), 1.0}});
  CHECK(env.mean_z1() == Approx(0.3));
  SimConfig cfg = quick_config(1e-2, 1.0, 1, 1.0);
  const int n = 50000;
  double acc = 0.0, acc2 = 0.0;
  for (int i = 0; i < n; ++i) {
    EnvPathResult res = simulate_environment(env, cfg, i);
    acc += res.z[0];
    acc2 += res.z[0] * res.z[0];
  }
  double mean = acc / n;
  double se = std::sqrt((acc2 / n - mean * mean) / n);
  CHECK(std::abs(mean - 0.3) <= 4.0 * se);
}

TEST_CASE("CBIRE mean follows the environment-adjusted rate") {
  CbireModel mdl;
  mdl.params.beta = 1.0;
  mdl.params.b = 1.0;
  mdl.params.sigma = std::sqrt(2.0);
  mdl.env.sigma_env = 0.3;
  ModelSpec model;
  model.variant = mdl;
  SimConfig cfg = quick_config(1e-3, 1.0, 20000, 1.0);
  EnsembleResult ens = simulate_ensemble(model, 1.0, cfg);
  Eigen::ArrayXd col = ens.states.col(0);
  double mean = col.mean();
  double se = std::sqrt((col - mean).square().mean() / col.size());
  // E[Z_1] = 0: the mean obeys the plain CBI formula
  double target = first_moment(mdl.params, 1.0, 1.0);
  CHECK(std::abs(mean - target) <= 4.0 * se + 0.01);
}

TEST_CASE("CBIRE coupled gap mean tracks e^{-(b - E[Z1]) t}") {
  CbireModel mdl;
  mdl.params.beta = 1.0;
  mdl.params.b = 1.0;
  mdl.params.sigma = std::sqrt(2.0);
  mdl.env.b_env = 0.4;  // A = 0.6
  mdl.env.sigma_env = 0.2;
  ModelSpec model;
  model.variant = mdl;
  SimConfig cfg = quick_config(1e-3, 1.5, 4000, 0.75);
  CoupledEnsemble c = simulate_coupled(model, 0.0, 4.0, cfg);
  for (double t : {0.75, 1.5}) {
    ValueWithError gap = mean_abs_gap(c, t);
    double target = 4.0 * std::exp(-0.6 * t);
    CHECK(std::abs(gap.value - target) <= 4.0 * gap.stderr_value + 0.02 * target);
  }
}

TEST_CASE("CNBI coupled gap mean contracts at the affine drift rate") {
  CnbiModel mdl;
  mdl.rates.gamma0 = AffineDrift{1.0, 1.0};
  mdl.rates.gamma1 = PowerRate{1.0, 1.5};
  mdl.rates.gamma2 = PowerRate{1.0, 1.2};
  mdl.m = LevyMeasure::atoms({{0.5, 1.0}});
  ModelSpec model;
  model.variant = mdl;
  SimConfig cfg = quick_config(1e-3, 1.0, 4000, 0.5);
  CoupledEnsemble c = simulate_coupled(model, 0.0, 5.0, cfg);
  CHECK(c.ordering_fraction() >= 0.99);
  for (double t : {0.5, 1.0}) {
    ValueWithError gap = mean_abs_gap(c, t);
    double target = 5.0 * std::exp(-t);
    CHECK(std::abs(gap.value - target) <= 4.0 * gap.stderr_value + 0.02 * target);
  }
}

TEST_CASE("tabulated drifts interpolate and report their dissipativity") {
  TabulatedDrift t;
  t.x = Eigen::ArrayXd(3);
  t.y = Eigen::ArrayXd(3);
  t.x << 0.0, 1.0, 2.0;
  t.y << 1.0, 0.0, -1.5;
  CHECK(t(0.5) == Approx(0.5));
  CHECK(t(1.5) == Approx(-0.75));
  CHECK(t(3.0) == Approx(-3.0));      // extended by the last slope
  CHECK(t.dissipativity() == Approx(1.0));  // min over segment contraction rates
}

TEST_CASE("generator on log1p at the origin is the immigration drift") {
  ModelSpec model = cir_model(1.0, 1.0, 0.0);
  CHECK(generator_apply(model, TestFunction::log1p(), 0.0) == Approx(1.0).epsilon(1e-12));
  // x -> inf: (beta - b x)/(1+x) -> -b, and the whole value stays below beta + |b|
  double far = generator_apply(model, TestFunction::log1p(), 1e6);
  CHECK(far == Approx(-1.0).epsilon(1e-3));
  CHECK(far <= 2.0);
}

TEST_CASE("generator identity on exponential test functions") {
  // L f_l(x) = f_l(x) (-psi(l) + x phi(l))
  CbiParams p;
  p.beta = 1.0;
  p.b = 1.0;
  p.sigma = std::sqrt(2.0);
  p.m = LevyMeasure::atoms({{0.6, 0.8}});
  p.nu = LevyMeasure::atoms({{1.2, 0.4}});
  ModelSpec model;
  model.variant = CbiModel{p};
  for (double lam : {0.5, 1.0, 2.0}) {
    for (double x : {0.0, 1.0, 3.5}) {
      double lhs = generator_apply(model, TestFunction::exp_neg(lam), x);
      double rhs = std::exp(-lam * x) * (-psi_eval(p, lam) + x * phi_eval(p, lam));
      CHECK(lhs == Approx(rhs).margin(1e-9));
    }
  }
}

TEST_CASE("generator identity for the pure CIR case at (1,1)") {
  ModelSpec model = cir_model();
  double lhs = generator_apply(model, TestFunction::exp_neg(1.0), 1.0);
  CHECK(lhs == Approx(std::exp(-1.0)).epsilon(1e-10));
}

TEST_CASE("generator jump integrals refuse divergent moments") {
  CbiParams p;
  p.beta = 1.0;
  p.b = 1.0;
  p.nu = LevyMeasure::power_law(1.0, -1.5);  // infinite first moment
  ModelSpec model;
  model.variant = CbiModel{p};
  // power test function with lambda = 1.5 needs ∫ z^{1.5} nu < inf: diverges
  CHECK_THROWS_AS(generator_apply(model, TestFunction::power(1.5), 1.0), SimulationError);
  // log1p only needs the log moment: finite
  CHECK(std::isfinite(generator_apply(model, TestFunction::log1p(), 1.0)));
}

TEST_CASE("CBIRE generator includes the environment part") {
  CbireModel mdl;
  mdl.params.beta = 1.0;
  mdl.params.b = 1.0;
  mdl.params.sigma = std::sqrt(2.0);
  mdl.env.b_env = 0.5;
  mdl.env.sigma_env = 0.4;
  ModelSpec model;
  model.variant = mdl;
  double x = 2.0, lam = 1.0;
  double cbi_part = std::exp(-lam * x) * (-psi_eval(mdl.params, lam) + x * phi_eval(mdl.params, lam));
  double env_part = mdl.env.b_env * x * (-lam * std::exp(-lam * x)) +
                    0.5 * mdl.env.sigma_env * mdl.env.sigma_env * x * x * lam * lam *
                        std::exp(-lam * x);
  double got = generator_apply(model, TestFunction::exp_neg(lam), x);
  CHECK(got == Approx(cbi_part + env_part).margin(1e-10));
}

TEST_CASE("config validation rejects inconsistent grids") {
  ModelSpec model = cir_model();
  SimConfig cfg = quick_config(1e-3, 1.0, 1, 0.25);
  cfg.record_grid[1] = 0.2503;  // not a multiple of dt
  CHECK_THROWS_AS(simulate_path(model, 0.0, cfg, 0), SimulationError);
  SimConfig cfg2 = quick_config(1e-3, 1.0, 0, 0.25);
  CHECK_THROWS_AS(simulate_ensemble(model, 0.0, cfg2), SimulationError);
}
