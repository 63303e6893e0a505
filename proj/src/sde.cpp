#include "ergolab/sde.hpp"

#include <algorithm>
#include <cmath>

#include "ergolab/util.hpp"

namespace ergolab {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kStateOverflow = 1e14;
}  // namespace

double TabulatedDrift::operator()(double xq) const {
  const auto n = x.size();
  if (n == 0) return 0.0;
  if (n == 1) return y[0];
  Eigen::Index i = 0;
  while (i + 2 < n && xq > x[i + 1]) ++i;
  double slope = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
  if (xq < x[0]) {
    return y[0] + (xq - x[0]) * (y[1] - y[0]) / (x[1] - x[0]);
  }
  if (xq > x[n - 1]) {
    double s = (y[n - 1] - y[n - 2]) / (x[n - 1] - x[n - 2]);
    return y[n - 1] + (xq - x[n - 1]) * s;
  }
  return y[i] + (xq - x[i]) * slope;
}

double TabulatedDrift::dissipativity() const {
  const auto n = x.size();
  if (n < 2) return 0.0;
  double a = kInf;
  for (Eigen::Index i = 0; i + 1 < n; ++i)
    a = std::min(a, -(y[i + 1] - y[i]) / (x[i + 1] - x[i]));
  return a;
}

double PowerRate::operator()(double x) const {
  if (x <= 0.0) return 0.0;
  return scale * std::pow(x, exponent);
}

double NonlinearRates::drift(double x) const {
  return std::visit([x](const auto& g) { return g(x); }, gamma0);
}

double NonlinearRates::drift_dissipativity() const {
  if (const auto* a = std::get_if<AffineDrift>(&gamma0)) return a->b;
  return std::get<TabulatedDrift>(gamma0).dissipativity();
}

void NonlinearRates::validate() const {
  if (!(drift(0.0) >= 0.0)) throw AdmissibilityError("gamma0(0) must be nonnegative");
  for (const PowerRate* r : {&gamma1, &gamma2}) {
    if (!(r->scale >= 0.0)) throw AdmissibilityError("rate scales must be nonnegative");
    if (r->scale > 0.0 && (r->exponent < 1.0 || r->exponent > 2.0))
      throw AdmissibilityError("rate exponents must lie in [1, 2]");
  }
  if (const auto* t = std::get_if<TabulatedDrift>(&gamma0)) {
    if (t->x.size() != t->y.size() || t->x.size() < 2)
      throw AdmissibilityError("tabulated drift needs matching x/y tables of size >= 2");
    for (Eigen::Index i = 0; i + 1 < t->x.size(); ++i)
      if (!(t->x[i] < t->x[i + 1]))
        throw AdmissibilityError("tabulated drift abscissae must be increasing");
  }
}

double EnvironmentParams::mean_z1() const {
  double tail = 0.0;
  if (!mu_env.is_zero()) {
    double pos = levy_integral(mu_env, [](double z) { return std::expm1(z); }, {1.0, kInf}).value;
    double neg =
        levy_integral(mu_env, [](double z) { return std::expm1(z); }, {-kInf, -1.0}).value;
    tail = pos + neg;
  }
  return b_env + tail;
}

double EnvironmentParams::a_env() const {
  double comp = 0.0;
  if (!mu_env.is_zero())
    comp = levy_integral(mu_env, [](double z) { return std::expm1(z) - z; }, {-1.0, 1.0}).value;
  return b_env - 0.5 * sigma_env * sigma_env - comp;
}

double ModelSpec::dissipativity_rate() const {
  if (const auto* c = std::get_if<CbiModel>(&variant)) return c->params.b;
  if (const auto* n = std::get_if<CnbiModel>(&variant)) return n->rates.drift_dissipativity();
  const auto& c = std::get<CbireModel>(variant);
  double ez = c.env.mean_z1();
  if (!std::isfinite(ez)) return -kInf;
  return c.params.b - ez;
}

void ModelSpec::validate() const {
  if (const auto* c = std::get_if<CbiModel>(&variant)) {
    ergolab::validate(c->params);
    return;
  }
  if (const auto* n = std::get_if<CnbiModel>(&variant)) {
    n->rates.validate();
    MeasureConditionReport mc = measure_condition(n->m, n->nu);
    if (!mc.pass) throw AdmissibilityError("CNBI jump measures fail the integrability condition");
    return;
  }
  const auto& c = std::get<CbireModel>(variant);
  ergolab::validate(c.params);
  if (!(c.env.sigma_env >= 0.0)) throw AdmissibilityError("sigma_env must be nonnegative");
  if (!c.env.mu_env.is_zero()) {
    double lm =
        levy_integral(c.env.mu_env, [](double z) { return std::min(1.0, z * z); }, Interval::all())
            .value;
    if (!std::isfinite(lm))
      throw AdmissibilityError("mu_env is not a Levy measure (∫ 1^z^2 diverges)");
  }
}

void SimConfig::validate() const {
  if (!(dt > 0.0)) throw SimulationError("dt must be positive");
  if (n_paths < 1) throw SimulationError("n_paths must be >= 1");
  if (record_grid.size() == 0) throw SimulationError("record_grid must be nonempty");
  double prev = -1.0;
  for (double t : record_grid) {
    if (!(t >= 0.0) || t <= prev) throw SimulationError("record_grid must be increasing and nonnegative");
    double steps = t / dt;
    if (std::abs(steps - std::llround(steps)) > 1e-6)
      throw SimulationError("record times must be integer multiples of dt");
    prev = t;
  }
  if (record_grid[record_grid.size() - 1] > horizon * (1.0 + 1e-12))
    throw SimulationError("record_grid extends past the horizon");
}

std::vector<long> SimConfig::record_steps() const {
  std::vector<long> steps;
  steps.reserve(record_grid.size());
  for (double t : record_grid) steps.push_back(std::llround(t / dt));
  return steps;
}

namespace {

// Simulated portion of a jump measure plus the moments of the part that is
// replaced by its moments. Atom measures are simulated in full; densities are
// restricted to (cutoff, inf) with the sub-cutoff mean folded into the drift
// (immigration) or matched by a Gaussian (compensated branching). The
// neglected error is O(∫_0^eps z^2 measure(dz)).
struct JumpSetup {
  std::optional<JumpSampler> sampler;
  double mass = 0.0;        // total rate of the simulated restriction
  double mean = 0.0;        // ∫ z over the simulated restriction
  double small_mean = 0.0;  // ∫_{(0,eps]} z (densities only)
  double small_var = 0.0;   // ∫_{(0,eps]} z^2 (densities only)
};

JumpSetup make_jump_setup(const LevyMeasure& m, double cutoff) {
  JumpSetup s;
  if (m.is_zero()) return s;
  Interval domain = m.has_density() ? Interval{cutoff, kInf} : Interval::positive();
  if (m.has_density()) {
    if (!(cutoff > 0.0)) throw SimulationError("jump_cutoff must be positive for density measures");
    s.small_mean = measure_mean(m, {0.0, cutoff});
    s.small_var = measure_second_moment(m, {0.0, cutoff});
  }
  s.sampler.emplace(m, domain);
  s.mass = s.sampler->total_mass();
  s.mean = measure_mean(m, domain);
  if (!std::isfinite(s.mean))
    throw SimulationError("simulated jump restriction has infinite mean (inadmissible measure)");
  return s;
}

struct EnvSetup {
  double a_drift = 0.0;
  double b_drift = 0.0;
  double sigma = 0.0;
  std::optional<JumpSampler> sampler;
  double mass = 0.0;
  double comp_xi = 0.0;  // ∫_{[-1,1] ∩ simulated} z mu
  double comp_z = 0.0;   // ∫_{[-1,1] ∩ simulated} (e^z - 1) mu
};

EnvSetup make_env_setup(const EnvironmentParams& env, double cutoff) {
  EnvSetup s;
  s.sigma = env.sigma_env;
  s.b_drift = env.b_env;
  s.a_drift = env.a_env();
  if (!env.mu_env.is_zero()) {
    Interval domain = env.mu_env.has_density() ? Interval{cutoff, kInf} : Interval::all();
    s.sampler.emplace(env.mu_env, domain);
    s.mass = s.sampler->total_mass();
    double lo = std::max(domain.lo, -1.0);
    s.comp_xi = levy_integral(env.mu_env, [](double z) { return z; }, {lo, 1.0}).value;
    s.comp_z = levy_integral(env.mu_env, [](double z) { return std::expm1(z); }, {lo, 1.0}).value;
  }
  return s;
}

// One increment of (xi, Z) over dt; dz_mart is the compensated-martingale part
// of the Z increment (Brownian plus compensated small jumps).
void env_step(const EnvSetup& e, double dt, RngStream& rng, double& dxi, double& dz,
              double& dz_mart) {
  double br = e.sigma * std::sqrt(dt) * rng.normal();
  double ji_small = 0.0, jz_small = 0.0, ji_big = 0.0, jz_big = 0.0;
  if (e.mass > 0.0) {
    long n = rng.poisson(e.mass * dt);
    for (long i = 0; i < n; ++i) {
      double z = e.sampler->sample(rng);
      double ez = std::expm1(z);
      if (std::abs(z) <= 1.0) {
        ji_small += z;
        jz_small += ez;
      } else {
        ji_big += z;
        jz_big += ez;
      }
    }
  }
  dxi = e.a_drift * dt + br + ji_small - e.comp_xi * dt + ji_big;
  dz = e.b_drift * dt + br + jz_small - e.comp_z * dt + jz_big;
  dz_mart = br + jz_small - e.comp_z * dt;
}

struct ModelRuntime {
  enum class Kind { Cbi, Cnbi, Cbire } kind;
  double beta = 0.0, b = 0.0, sigma2 = 0.0;
  const NonlinearRates* rates = nullptr;
  JumpSetup branch;
  JumpSetup immig;
  std::optional<EnvSetup> env;

  double jump_rate(double x) const {
    return kind == Kind::Cnbi ? rates->gamma2(x) : std::max(x, 0.0);
  }
  double drift(double x) const {
    return kind == Kind::Cnbi ? rates->drift(x) : beta - b * x;
  }
  double diff_var(double x) const {
    return kind == Kind::Cnbi ? rates->gamma1(x) : sigma2 * std::max(x, 0.0);
  }
};

ModelRuntime make_runtime(const ModelSpec& model, const SimConfig& config) {
  ModelRuntime rt;
  if (const auto* c = std::get_if<CbiModel>(&model.variant)) {
    rt.kind = ModelRuntime::Kind::Cbi;
    rt.beta = c->params.beta;
    rt.b = c->params.b;
    rt.sigma2 = c->params.sigma2();
    rt.branch = make_jump_setup(c->params.m, config.jump_cutoff);
    rt.immig = make_jump_setup(c->params.nu, config.jump_cutoff);
  } else if (const auto* n = std::get_if<CnbiModel>(&model.variant)) {
    rt.kind = ModelRuntime::Kind::Cnbi;
    rt.rates = &n->rates;
    rt.branch = make_jump_setup(n->m, config.jump_cutoff);
    rt.immig = make_jump_setup(n->nu, config.jump_cutoff);
  } else {
    const auto& c = std::get<CbireModel>(model.variant);
    rt.kind = ModelRuntime::Kind::Cbire;
    rt.beta = c.params.beta;
    rt.b = c.params.b;
    rt.sigma2 = c.params.sigma2();
    rt.branch = make_jump_setup(c.params.m, config.jump_cutoff);
    rt.immig = make_jump_setup(c.params.nu, config.jump_cutoff);
    rt.env = make_env_setup(c.env, config.jump_cutoff);
  }
  return rt;
}

// Evolves K members (1 or 2) in lockstep on one shared noise stream set.
// Writes the record matrix rows rec[k] (size n_rec each) and the running
// compensated-noise sums mart_rec[k].
struct MemberRun {
  bool truncated = false;
  double failure_time = kNaN;
};

MemberRun run_members(const ModelRuntime& rt, const SimConfig& config, std::uint64_t path_index,
                      const double* x_init, int K, double* const* rec, double* const* mart_rec) {
  RngStream gauss(child_seed(config.master_seed, path_index, StreamTag::Gauss));
  RngStream branch(child_seed(config.master_seed, path_index, StreamTag::BranchJump));
  RngStream immig(child_seed(config.master_seed, path_index, StreamTag::ImmigrationJump));
  RngStream envs(child_seed(config.master_seed, path_index, StreamTag::Environment));

  const double dt = config.dt;
  const double sqdt = std::sqrt(dt);
  std::vector<long> rec_steps = config.record_steps();
  const long n_steps = rec_steps.empty() ? 0 : rec_steps.back();

  double x[2] = {x_init[0], K > 1 ? x_init[1] : 0.0};
  double mart[2] = {0.0, 0.0};
  MemberRun out;

  std::size_t cursor = 0;
  auto record = [&](long step) {
    while (cursor < rec_steps.size() && rec_steps[cursor] == step) {
      for (int k = 0; k < K; ++k) {
        rec[k][cursor] = out.truncated ? kNaN : x[k];
        mart_rec[k][cursor] = out.truncated ? kNaN : mart[k];
      }
      ++cursor;
    }
  };
  record(0);

  const bool has_branch = rt.branch.mass > 0.0;
  const bool has_small_gauss = rt.branch.small_var > 0.0;
  const bool has_immig = rt.immig.mass > 0.0;

  for (long step = 0; step < n_steps && !out.truncated; ++step) {
    double g1 = gauss.normal();
    double g2 = has_small_gauss ? gauss.normal() : 0.0;

    // state-dependent branching jumps by thinning against a refreshed
    // dominating rate; acceptance shares one uniform across members so the
    // accepted sets are nested whenever the rates are ordered. The
    // compensator integrates the actual left-limit rate over the step, which
    // keeps the compensated jump part a martingale even at high activity.
    double jump_sum[2] = {0.0, 0.0};
    double compensator[2] = {0.0, 0.0};
    if (has_branch) {
      double cur[2] = {x[0], x[1]};
      double tau = 0.0;
      for (;;) {
        double rmax = 0.0;
        for (int k = 0; k < K; ++k) rmax = std::max(rmax, rt.jump_rate(cur[k]));
        double dom = 1.5 * rmax * rt.branch.mass;
        if (!(dom > 0.0)) break;
        double seg_end = std::min(tau + branch.exponential() / dom, dt);
        for (int k = 0; k < K; ++k)
          compensator[k] += rt.jump_rate(cur[k]) * rt.branch.mean * (seg_end - tau);
        tau = seg_end;
        if (tau >= dt) break;
        double z = rt.branch.sampler->sample(branch);
        double u = branch.uniform();
        for (int k = 0; k < K; ++k) {
          if (u * dom <= rt.jump_rate(cur[k]) * rt.branch.mass) {
            cur[k] += z;
            jump_sum[k] += z;
          }
        }
      }
    }

    double immig_sum = 0.0;
    if (has_immig) {
      long n = immig.poisson(rt.immig.mass * dt);
      for (long i = 0; i < n; ++i) immig_sum += rt.immig.sampler->sample(immig);
    }

    double dxi = 0.0, dz = 0.0, dz_mart = 0.0;
    if (rt.env) env_step(*rt.env, dt, envs, dxi, dz, dz_mart);

    for (int k = 0; k < K; ++k) {
      double xk = x[k];
      double diff = std::sqrt(std::max(rt.diff_var(xk), 0.0)) * sqdt * g1;
      double small_gauss =
          has_small_gauss ? std::sqrt(rt.jump_rate(xk) * rt.branch.small_var) * sqdt * g2 : 0.0;
      double xn = xk + rt.drift(xk) * dt + rt.immig.small_mean * dt + diff + small_gauss +
                  (jump_sum[k] - compensator[k]) + immig_sum;
      mart[k] += diff + small_gauss + (jump_sum[k] - compensator[k]);
      xn = std::max(xn, 0.0);
      if (rt.env) {
        mart[k] += xk * dz_mart;
        xn = std::max(xn * (1.0 + std::max(dz, -1.0 + 1e-12)), 0.0);
      }
      if (!std::isfinite(xn) || xn > kStateOverflow) {
        out.truncated = true;
        out.failure_time = (step + 1) * dt;
      }
      x[k] = xn;
    }
    record(step + 1);
  }
  // fill anything left (covers truncation before later record times)
  while (cursor < rec_steps.size()) {
    for (int k = 0; k < K; ++k) {
      rec[k][cursor] = out.truncated ? kNaN : x[k];
      mart_rec[k][cursor] = out.truncated ? kNaN : mart[k];
    }
    ++cursor;
  }
  return out;
}

}  // namespace

double CoupledEnsemble::ordering_fraction() const {
  long ok = 0, total = 0;
  for (Eigen::Index p = 0; p < lower.rows(); ++p)
    for (Eigen::Index j = 0; j < lower.cols(); ++j) {
      double lo = lower(p, j), hi = upper(p, j);
      if (std::isnan(lo) || std::isnan(hi)) continue;
      ++total;
      if (lo <= hi) ++ok;
    }
  return total == 0 ? 0.0 : static_cast<double>(ok) / static_cast<double>(total);
}

PathResult simulate_path(const ModelSpec& model, double x0, const SimConfig& config,
                         std::uint64_t path_index) {
  if (!(x0 >= 0.0)) throw SimulationError("x0 must be nonnegative");
  model.validate();
  config.validate();
  ModelRuntime rt = make_runtime(model, config);

  PathResult res;
  res.times = config.record_grid;
  res.states = Eigen::ArrayXd::Zero(res.times.size());
  res.martingale = Eigen::ArrayXd::Zero(res.times.size());
  double* rec[1] = {res.states.data()};
  double* mart[1] = {res.martingale.data()};
  MemberRun run = run_members(rt, config, path_index, &x0, 1, rec, mart);
  res.truncated = run.truncated;
  res.failure_time = run.failure_time;
  return res;
}

EnsembleResult simulate_ensemble(const ModelSpec& model, double x0, const SimConfig& config,
                                 int n_threads) {
  if (!(x0 >= 0.0)) throw SimulationError("x0 must be nonnegative");
  model.validate();
  config.validate();
  ModelRuntime rt = make_runtime(model, config);

  EnsembleResult res;
  res.times = config.record_grid;
  const auto n_rec = res.times.size();
  res.states = Eigen::ArrayXXd::Zero(config.n_paths, n_rec);
  res.martingale = Eigen::ArrayXXd::Zero(config.n_paths, n_rec);

  std::vector<char> truncated(config.n_paths, 0);
  parallel_for(config.n_paths, n_threads, [&](std::int64_t p) {
    Eigen::ArrayXd row(n_rec), mrow(n_rec);
    double* rec[1] = {row.data()};
    double* mart[1] = {mrow.data()};
    MemberRun run = run_members(rt, config, static_cast<std::uint64_t>(p), &x0, 1, rec, mart);
    res.states.row(p) = row;
    res.martingale.row(p) = mrow;
    truncated[p] = run.truncated ? 1 : 0;
  });
  for (char c : truncated) res.truncated_count += c;
  return res;
}

CoupledEnsemble simulate_coupled(const ModelSpec& model, double x0, double y0,
                                 const SimConfig& config, int n_threads) {
  if (!(x0 >= 0.0) || !(y0 >= 0.0)) throw SimulationError("initial states must be nonnegative");
  model.validate();
  config.validate();
  if (x0 > y0) std::swap(x0, y0);
  ModelRuntime rt = make_runtime(model, config);

  CoupledEnsemble res;
  res.x0 = x0;
  res.y0 = y0;
  res.times = config.record_grid;
  const auto n_rec = res.times.size();
  res.lower = Eigen::ArrayXXd::Zero(config.n_paths, n_rec);
  res.upper = Eigen::ArrayXXd::Zero(config.n_paths, n_rec);

  std::vector<char> truncated(config.n_paths, 0);
  parallel_for(config.n_paths, n_threads, [&](std::int64_t p) {
    Eigen::ArrayXd lo(n_rec), hi(n_rec), mlo(n_rec), mhi(n_rec);
    double init[2] = {x0, y0};
    double* rec[2] = {lo.data(), hi.data()};
    double* mart[2] = {mlo.data(), mhi.data()};
    MemberRun run = run_members(rt, config, static_cast<std::uint64_t>(p), init, 2, rec, mart);
    res.lower.row(p) = lo;
    res.upper.row(p) = hi;
    truncated[p] = run.truncated ? 1 : 0;
  });
  for (char c : truncated) res.truncated_count += c;
  return res;
}

EnvPathResult simulate_environment(const EnvironmentParams& env, const SimConfig& config,
                                   std::uint64_t path_index) {
  config.validate();
  EnvSetup setup = make_env_setup(env, config.jump_cutoff);
  RngStream rng(child_seed(config.master_seed, path_index, StreamTag::Environment));

  EnvPathResult res;
  res.times = config.record_grid;
  res.xi = Eigen::ArrayXd::Zero(res.times.size());
  res.z = Eigen::ArrayXd::Zero(res.times.size());

  std::vector<long> rec_steps = config.record_steps();
  const long n_steps = rec_steps.empty() ? 0 : rec_steps.back();
  double xi = 0.0, z = 0.0;
  std::size_t cursor = 0;
  auto record = [&](long step) {
    while (cursor < rec_steps.size() && rec_steps[cursor] == step) {
      res.xi[cursor] = xi;
      res.z[cursor] = z;
      ++cursor;
    }
  };
  record(0);
  for (long step = 0; step < n_steps; ++step) {
    double dxi, dz, dz_mart;
    env_step(setup, config.dt, rng, dxi, dz, dz_mart);
    xi += dxi;
    z += dz;
    record(step + 1);
  }
  return res;
}

// ---------------------------------------------------------------------------
// generator evaluation

double TestFunction::value(double x) const {
  switch (kind) {
    case TestFunctionKind::Log1p:
      return std::log1p(x);
    case TestFunctionKind::Power:
      return std::pow(1.0 + x, lambda);
    case TestFunctionKind::ExpNeg:
      return std::exp(-lambda * x);
  }
  return 0.0;
}

double TestFunction::d1(double x) const {
  switch (kind) {
    case TestFunctionKind::Log1p:
      return 1.0 / (1.0 + x);
    case TestFunctionKind::Power:
      return lambda * std::pow(1.0 + x, lambda - 1.0);
    case TestFunctionKind::ExpNeg:
      return -lambda * std::exp(-lambda * x);
  }
  return 0.0;
}

double TestFunction::d2(double x) const {
  switch (kind) {
    case TestFunctionKind::Log1p:
      return -1.0 / ((1.0 + x) * (1.0 + x));
    case TestFunctionKind::Power:
      return lambda * (lambda - 1.0) * std::pow(1.0 + x, lambda - 2.0);
    case TestFunctionKind::ExpNeg:
      return lambda * lambda * std::exp(-lambda * x);
  }
  return 0.0;
}

namespace {

// log1p(w) - w, stable for small |w|
double log1p_minus(double w) {
  if (std::abs(w) < 1e-5) {
    double w2 = w * w;
    return -0.5 * w2 + w2 * w / 3.0 - 0.25 * w2 * w2;
  }
  return std::log1p(w) - w;
}

// (1+w)^lam - 1 - lam w, stable for small |w|
double powm1_minus(double w, double lam) {
  if (std::abs(w) < 1e-5) {
    double c2 = 0.5 * lam * (lam - 1.0);
    double c3 = c2 * (lam - 2.0) / 3.0;
    double c4 = c3 * (lam - 3.0) / 4.0;
    return w * w * (c2 + w * (c3 + w * c4));
  }
  return std::expm1(lam * std::log1p(w)) - lam * w;
}

// e^{-s} - 1 + s, stable for small |s|
double expm1_plus(double s) {
  if (std::abs(s) < 1e-5) {
    double s2 = s * s;
    return 0.5 * s2 - s2 * s / 6.0 + s2 * s2 / 24.0;
  }
  return std::expm1(-s) + s;
}

// V(x + d) - V(x)
double delta_v(const TestFunction& f, double x, double d) {
  switch (f.kind) {
    case TestFunctionKind::Log1p:
      return std::log1p(d / (1.0 + x));
    case TestFunctionKind::Power:
      return std::pow(1.0 + x, f.lambda) * std::expm1(f.lambda * std::log1p(d / (1.0 + x)));
    case TestFunctionKind::ExpNeg:
      return std::exp(-f.lambda * x) * std::expm1(-f.lambda * d);
  }
  return 0.0;
}

// V(x + d) - V(x) - d V'(x)
double delta_v_compensated(const TestFunction& f, double x, double d) {
  double w = d / (1.0 + x);
  switch (f.kind) {
    case TestFunctionKind::Log1p:
      return log1p_minus(w);
    case TestFunctionKind::Power:
      return std::pow(1.0 + x, f.lambda) * powm1_minus(w, f.lambda);
    case TestFunctionKind::ExpNeg:
      return std::exp(-f.lambda * x) * expm1_plus(f.lambda * d);
  }
  return 0.0;
}

double require_finite(const Integral& v, const char* what) {
  if (!std::isfinite(v.value))
    throw SimulationError(std::string("generator_apply: ") + what + " diverges (moment condition violated)");
  return v.value;
}

double cbi_generator(const CbiParams& p, const TestFunction& f, double x) {
  double val = (p.beta - p.b * x) * f.d1(x) + 0.5 * p.sigma2() * x * f.d2(x);
  if (!p.m.is_zero()) {
    Integral jm = levy_integral(
        p.m, [&](double z) { return delta_v_compensated(f, x, z); }, Interval::positive());
    val += x * require_finite(jm, "branching jump integral");
  }
  if (!p.nu.is_zero()) {
    Integral jn =
        levy_integral(p.nu, [&](double z) { return delta_v(f, x, z); }, Interval::positive());
    val += require_finite(jn, "immigration jump integral");
  }
  return val;
}

double cnbi_generator(const CnbiModel& mdl, const TestFunction& f, double x) {
  double val = mdl.rates.drift(x) * f.d1(x) + 0.5 * mdl.rates.gamma1(x) * f.d2(x);
  if (!mdl.m.is_zero()) {
    Integral jm = levy_integral(
        mdl.m, [&](double z) { return delta_v_compensated(f, x, z); }, Interval::positive());
    val += mdl.rates.gamma2(x) * require_finite(jm, "branching jump integral");
  }
  if (!mdl.nu.is_zero()) {
    Integral jn =
        levy_integral(mdl.nu, [&](double z) { return delta_v(f, x, z); }, Interval::positive());
    val += require_finite(jn, "immigration jump integral");
  }
  return val;
}

double env_generator(const EnvironmentParams& env, const TestFunction& f, double x) {
  double val = env.b_env * x * f.d1(x) + 0.5 * env.sigma_env * env.sigma_env * x * x * f.d2(x);
  if (!env.mu_env.is_zero()) {
    // x e^z = x + x(e^z - 1): reuse the displacement forms with d = x(e^z - 1)
    auto small = [&](double z) { return delta_v_compensated(f, x, x * std::expm1(z)); };
    auto big = [&](double z) { return delta_v(f, x, x * std::expm1(z)); };
    Integral js = levy_integral(env.mu_env, small, {-1.0, 1.0});
    val += require_finite(js, "environment small-jump integral");
    Integral jp = levy_integral(env.mu_env, big, {1.0, kInf});
    Integral jn = levy_integral(env.mu_env, big, {-kInf, -1.0});
    val += require_finite(jp, "environment tail integral");
    val += require_finite(jn, "environment tail integral");
  }
  return val;
}

}  // namespace

double generator_apply(const ModelSpec& model, const TestFunction& f, double x) {
  if (!(x >= 0.0)) throw std::invalid_argument("generator_apply: x must be nonnegative");
  if (f.kind == TestFunctionKind::Power && (f.lambda < 1.0 || f.lambda > 2.0))
    throw std::invalid_argument("generator_apply: power test functions need lambda in [1,2]");
  if (const auto* c = std::get_if<CbiModel>(&model.variant)) return cbi_generator(c->params, f, x);
  if (const auto* n = std::get_if<CnbiModel>(&model.variant)) return cnbi_generator(*n, f, x);
  const auto& c = std::get<CbireModel>(model.variant);
  return cbi_generator(c.params, f, x) + env_generator(c.env, f, x);
}

}  // namespace ergolab
