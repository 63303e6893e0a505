#pragma once

#include <Eigen/Core>
#include <functional>
#include <stdexcept>
#include <string>

#include "ergolab/mechanisms.hpp"
#include "ergolab/sde.hpp"

namespace ergolab {

struct MetricsError : std::runtime_error {
  explicit MetricsError(const std::string& what) : std::runtime_error(what) {}
};

/// Exact W1 between two 1-D empirical measures. Equal sizes pair sorted
/// samples (the comonotone coupling is optimal for |x-y|); unequal sizes
/// integrate the quantile difference on the merged probability grid.
double w1_empirical(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b);

struct ValueWithError {
  double value = 0.0;
  double stderr_value = 0.0;
};

Eigen::Index record_index(const Eigen::ArrayXd& times, double t);

/// E[log(1 + |X_t - Y_t|)] over a coupled ensemble: an upper bound for the
/// W_log distance of the two time-t laws (the coupling need not be optimal
/// for concave costs).
ValueWithError wlog_coupled(const CoupledEnsemble& ensemble, double t);

/// E[|X_t - Y_t|] with standard error.
ValueWithError mean_abs_gap(const CoupledEnsemble& ensemble, double t);

struct Binning {
  int bins = 0;  // <= 0: Freedman-Diaconis on the pooled sample
  double lo = std::numeric_limits<double>::quiet_NaN();
  double hi = std::numeric_limits<double>::quiet_NaN();
};

struct TvEstimate {
  double value = 0.0;
  bool bias_flag = false;  // some occupied bin has < 5 expected counts
  int bins = 0;
  double lo = 0.0, hi = 0.0;
};

/// Plug-in histogram estimate of the total variation distance over shared
/// bins; a biased estimator (upward for equal laws), flagged when bins are
/// too thin to trust.
TvEstimate tv_histogram(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b, Binning binning = {});

/// Multinomial bootstrap standard error of the tv_histogram value.
double tv_bootstrap_stderr(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b, Binning binning,
                           int reps, std::uint64_t seed);

enum class Verdict { Pass, Fail, Inconclusive };
const char* to_string(Verdict v);

struct DecayFit {
  Eigen::ArrayXd times, values, stderrs;
  double fitted_rate = std::numeric_limits<double>::quiet_NaN();
  double intercept = std::numeric_limits<double>::quiet_NaN();
  double r_squared = std::numeric_limits<double>::quiet_NaN();
  double rate_stderr = std::numeric_limits<double>::quiet_NaN();
  double target_rate = 0.0;
  double lo_factor = 0.8, hi_factor = 1.3;
  int n_used = 0;
  Verdict verdict = Verdict::Inconclusive;
};

/// Weighted least squares of log(value) on time. Points below the noise floor
/// (value <= 3 * stderr) are excluded; fewer than 4 usable points yields an
/// Inconclusive verdict, never a fabricated one.
DecayFit fit_decay(const Eigen::ArrayXd& times, const Eigen::ArrayXd& values,
                   const Eigen::ArrayXd& stderrs, double target_rate, double lo_factor = 0.8,
                   double hi_factor = 1.3);

struct TimeAverage {
  double value = 0.0;
  Eigen::ArrayXd batch_means;
  double batch_stderr = 0.0;
  bool short_horizon = false;
};

/// (1/T) ∫_0^T f(X_s) ds by trapezoid on the record grid, plus contiguous
/// batch sub-averages for variance estimation.
TimeAverage time_average(const PathResult& path, const std::function<double(double)>& f,
                         int n_batches = 20, double mixing_rate_hint = 0.0);

struct FcltEstimate {
  double gamma2 = 0.0;
  double stderr_value = 0.0;  // rough sampling error of gamma2
  int n_batches = 0;
  double batch_len = 0.0;
};

/// Long-run variance of t^{-1/2} ∫ g(X_s) ds for the compensated observable
/// g(y) = e^{-lambda y} (-psi(lambda) + y phi(lambda)), estimated by
/// overlapping batch means after discarding the burn-in.
FcltEstimate fclt_variance_empirical(const PathResult& path, const CbiParams& params,
                                     double lambda, double burn_in, double batch_len);

}  // namespace ergolab
