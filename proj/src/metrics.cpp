#include "ergolab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "ergolab/util.hpp"

namespace ergolab {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> sorted_copy(const Eigen::ArrayXd& a) {
  std::vector<double> v(a.data(), a.data() + a.size());
  std::sort(v.begin(), v.end());
  return v;
}
}  // namespace

double w1_empirical(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b) {
  if (a.size() == 0 || b.size() == 0) throw MetricsError("w1_empirical: empty sample set");
  std::vector<double> sa = sorted_copy(a);
  std::vector<double> sb = sorted_copy(b);
  const std::size_t na = sa.size(), nb = sb.size();
  if (na == nb) {
    KahanSum acc;
    for (std::size_t i = 0; i < na; ++i) acc.add(std::abs(sa[i] - sb[i]));
    return acc.value() / static_cast<double>(na);
  }
  // quantile-function integration on the merged grid; boundaries compared as
  // integers over the common denominator na*nb
  KahanSum acc;
  std::size_t i = 0, j = 0;
  unsigned long long cur = 0;
  const unsigned long long denom =
      static_cast<unsigned long long>(na) * static_cast<unsigned long long>(nb);
  while (i < na && j < nb) {
    unsigned long long ba = static_cast<unsigned long long>(i + 1) * nb;
    unsigned long long bb = static_cast<unsigned long long>(j + 1) * na;
    unsigned long long next = std::min(ba, bb);
    acc.add(static_cast<double>(next - cur) * std::abs(sa[i] - sb[j]));
    cur = next;
    if (ba == next) ++i;
    if (bb == next) ++j;
  }
  return acc.value() / static_cast<double>(denom);
}

Eigen::Index record_index(const Eigen::ArrayXd& times, double t) {
  for (Eigen::Index i = 0; i < times.size(); ++i)
    if (std::abs(times[i] - t) <= 1e-9 * std::max(1.0, std::abs(t))) return i;
  throw MetricsError("time " + std::to_string(t) + " is not on the record grid");
}

namespace {
ValueWithError column_stat(const CoupledEnsemble& ensemble, double t,
                           const std::function<double(double)>& transform) {
  Eigen::Index j = record_index(ensemble.times, t);
  KahanSum sum, sumsq;
  long n = 0;
  for (Eigen::Index p = 0; p < ensemble.lower.rows(); ++p) {
    double lo = ensemble.lower(p, j), hi = ensemble.upper(p, j);
    if (std::isnan(lo) || std::isnan(hi)) continue;
    double v = transform(std::abs(hi - lo));
    sum.add(v);
    sumsq.add(v * v);
    ++n;
  }
  if (n == 0) throw MetricsError("no usable paths at the requested time");
  double mean = sum.value() / n;
  double var = std::max(sumsq.value() / n - mean * mean, 0.0);
  return {mean, std::sqrt(var / n)};
}
}  // namespace

ValueWithError wlog_coupled(const CoupledEnsemble& ensemble, double t) {
  return column_stat(ensemble, t, [](double g) { return std::log1p(g); });
}

ValueWithError mean_abs_gap(const CoupledEnsemble& ensemble, double t) {
  return column_stat(ensemble, t, [](double g) { return g; });
}

namespace {

struct HistPair {
  std::vector<long> ca, cb;
  int bins;
  double lo, hi;
};

double quantile_sorted(const std::vector<double>& s, double q) {
  if (s.empty()) return 0.0;
  double pos = q * (s.size() - 1);
  std::size_t i = static_cast<std::size_t>(pos);
  if (i + 1 >= s.size()) return s.back();
  double w = pos - i;
  return s[i] * (1.0 - w) + s[i + 1] * w;
}

HistPair build_histograms(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b, Binning binning) {
  if (a.size() == 0 || b.size() == 0) throw MetricsError("tv_histogram: empty sample set");
  double lo = binning.lo, hi = binning.hi;
  int bins = binning.bins;
  if (std::isnan(lo) || std::isnan(hi)) {
    lo = std::min(a.minCoeff(), b.minCoeff());
    hi = std::max(a.maxCoeff(), b.maxCoeff());
  }
  if (bins <= 0) {
    // Freedman-Diaconis on the pooled sample
    std::vector<double> pooled(a.data(), a.data() + a.size());
    pooled.insert(pooled.end(), b.data(), b.data() + b.size());
    std::sort(pooled.begin(), pooled.end());
    double iqr = quantile_sorted(pooled, 0.75) - quantile_sorted(pooled, 0.25);
    double n = static_cast<double>(pooled.size());
    double width = 2.0 * iqr / std::cbrt(n);
    if (!(width > 0.0)) width = (hi - lo) / std::max(1.0, std::sqrt(n));
    bins = width > 0.0 ? static_cast<int>(std::ceil((hi - lo) / width)) : 1;
    bins = std::clamp(bins, 1, 4096);
  }
  if (!(hi > lo)) {
    hi = lo + 1.0;
    bins = 1;
  }
  HistPair h;
  h.bins = bins;
  h.lo = lo;
  h.hi = hi;
  h.ca.assign(bins, 0);
  h.cb.assign(bins, 0);
  double scale = bins / (hi - lo);
  auto fill = [&](const Eigen::ArrayXd& s, std::vector<long>& c) {
    for (double x : s) {
      int k = static_cast<int>((x - lo) * scale);
      k = std::clamp(k, 0, bins - 1);  // boundary and out-of-range values go to edge bins
      ++c[k];
    }
  };
  fill(a, h.ca);
  fill(b, h.cb);
  return h;
}

double tv_from_counts(const std::vector<long>& ca, const std::vector<long>& cb, double na,
                      double nb) {
  KahanSum acc;
  for (std::size_t k = 0; k < ca.size(); ++k)
    acc.add(std::abs(ca[k] / na - cb[k] / nb));
  return 0.5 * acc.value();
}

}  // namespace

TvEstimate tv_histogram(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b, Binning binning) {
  HistPair h = build_histograms(a, b, binning);
  TvEstimate est;
  est.bins = h.bins;
  est.lo = h.lo;
  est.hi = h.hi;
  est.value = tv_from_counts(h.ca, h.cb, static_cast<double>(a.size()), static_cast<double>(b.size()));
  double n_half = 0.5 * (a.size() + b.size());
  double pooled_n = static_cast<double>(a.size() + b.size());
  for (int k = 0; k < h.bins; ++k) {
    long pooled = h.ca[k] + h.cb[k];
    if (pooled == 0) continue;
    double expected = n_half * (pooled / pooled_n);
    if (expected < 5.0) {
      est.bias_flag = true;
      break;
    }
  }
  return est;
}

double tv_bootstrap_stderr(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b, Binning binning,
                           int reps, std::uint64_t seed) {
  HistPair h = build_histograms(a, b, binning);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::mt19937_64 eng(seed);
  auto resample = [&](const std::vector<long>& counts, double n, std::vector<long>& out) {
    // multinomial via conditional binomials
    out.assign(counts.size(), 0);
    long remaining = static_cast<long>(n);
    double prob_left = 1.0;
    for (std::size_t k = 0; k < counts.size() && remaining > 0; ++k) {
      double p = (counts[k] / n) / prob_left;
      p = std::clamp(p, 0.0, 1.0);
      std::binomial_distribution<long> bin(remaining, p);
      long c = bin(eng);
      out[k] = c;
      remaining -= c;
      prob_left -= counts[k] / n;
      if (prob_left <= 0.0) break;
    }
  };
  KahanSum sum, sumsq;
  std::vector<long> ra, rb;
  for (int r = 0; r < reps; ++r) {
    resample(h.ca, na, ra);
    resample(h.cb, nb, rb);
    double tv = tv_from_counts(ra, rb, na, nb);
    sum.add(tv);
    sumsq.add(tv * tv);
  }
  double mean = sum.value() / reps;
  return std::sqrt(std::max(sumsq.value() / reps - mean * mean, 0.0));
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass:
      return "pass";
    case Verdict::Fail:
      return "fail";
    case Verdict::Inconclusive:
      return "inconclusive";
  }
  return "?";
}

DecayFit fit_decay(const Eigen::ArrayXd& times, const Eigen::ArrayXd& values,
                   const Eigen::ArrayXd& stderrs, double target_rate, double lo_factor,
                   double hi_factor) {
  if (times.size() != values.size() || (stderrs.size() != 0 && stderrs.size() != times.size()))
    throw MetricsError("fit_decay: mismatched series lengths");
  DecayFit fit;
  fit.times = times;
  fit.values = values;
  fit.stderrs = stderrs.size() ? stderrs : Eigen::ArrayXd::Zero(times.size());
  fit.target_rate = target_rate;
  fit.lo_factor = lo_factor;
  fit.hi_factor = hi_factor;

  std::vector<Eigen::Index> used;
  for (Eigen::Index i = 0; i < times.size(); ++i) {
    double v = values[i], s = fit.stderrs[i];
    if (!(v > 0.0) || std::isnan(v)) continue;
    if (s > 0.0 && v <= 3.0 * s) continue;  // below the noise floor
    used.push_back(i);
  }
  fit.n_used = static_cast<int>(used.size());
  if (fit.n_used < 4) {
    fit.verdict = Verdict::Inconclusive;
    return fit;
  }

  double sw = 0, swt = 0, swtt = 0, swy = 0, swty = 0;
  for (Eigen::Index i : used) {
    double v = values[i], s = fit.stderrs[i];
    double s_eff = std::max(s, 1e-12 * v);
    double w = s > 0.0 ? sqr(v / s_eff) : 1.0;
    double t = times[i], y = std::log(v);
    sw += w;
    swt += w * t;
    swtt += w * t * t;
    swy += w * y;
    swty += w * t * y;
  }
  double det = sw * swtt - swt * swt;
  if (!(std::abs(det) > 0.0)) {
    fit.verdict = Verdict::Inconclusive;
    return fit;
  }
  double slope = (sw * swty - swt * swy) / det;
  double intercept = (swtt * swy - swt * swty) / det;
  fit.fitted_rate = -slope;
  fit.intercept = intercept;

  double ss_res = 0, ss_tot = 0, wmean_y = swy / sw;
  for (Eigen::Index i : used) {
    double v = values[i], s = fit.stderrs[i];
    double s_eff = std::max(s, 1e-12 * v);
    double w = s > 0.0 ? sqr(v / s_eff) : 1.0;
    double y = std::log(v);
    double yhat = intercept + slope * times[i];
    ss_res += w * sqr(y - yhat);
    ss_tot += w * sqr(y - wmean_y);
  }
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  double dof = std::max(fit.n_used - 2, 1);
  fit.rate_stderr = std::sqrt(std::max(ss_res / dof, 0.0) * sw / det);

  if (target_rate > 0.0) {
    bool ok = fit.fitted_rate >= lo_factor * target_rate && fit.fitted_rate <= hi_factor * target_rate;
    fit.verdict = ok ? Verdict::Pass : Verdict::Fail;
  } else {
    fit.verdict = Verdict::Inconclusive;
  }
  return fit;
}

TimeAverage time_average(const PathResult& path, const std::function<double(double)>& f,
                         int n_batches, double mixing_rate_hint) {
  const auto n = path.times.size();
  if (n < 2) throw MetricsError("time_average: need at least two record points");
  Eigen::ArrayXd fx(n);
  for (Eigen::Index i = 0; i < n; ++i) fx[i] = f(path.states[i]);

  auto trapz = [&](Eigen::Index lo, Eigen::Index hi) {
    KahanSum acc;
    for (Eigen::Index i = lo; i + 1 <= hi; ++i)
      acc.add(0.5 * (fx[i] + fx[i + 1]) * (path.times[i + 1] - path.times[i]));
    return acc.value();
  };

  TimeAverage out;
  double span = path.times[n - 1] - path.times[0];
  out.value = trapz(0, n - 1) / span;

  n_batches = std::max(2, std::min<int>(n_batches, static_cast<int>(n - 1)));
  out.batch_means = Eigen::ArrayXd::Zero(n_batches);
  KahanSum bsum, bsumsq;
  for (int k = 0; k < n_batches; ++k) {
    Eigen::Index lo = k * (n - 1) / n_batches;
    Eigen::Index hi = (k + 1) * (n - 1) / n_batches;
    double len = path.times[hi] - path.times[lo];
    double m = len > 0.0 ? trapz(lo, hi) / len : fx[lo];
    out.batch_means[k] = m;
    bsum.add(m);
    bsumsq.add(m * m);
  }
  double bm = bsum.value() / n_batches;
  double bv = std::max(bsumsq.value() / n_batches - bm * bm, 0.0);
  out.batch_stderr = std::sqrt(bv / n_batches);
  out.short_horizon = mixing_rate_hint > 0.0 && span < 10.0 / mixing_rate_hint;
  return out;
}

FcltEstimate fclt_variance_empirical(const PathResult& path, const CbiParams& params,
                                     double lambda, double burn_in, double batch_len) {
  const auto n = path.times.size();
  if (n < 16) throw MetricsError("fclt_variance_empirical: record grid too short");
  double h = path.times[1] - path.times[0];
  for (Eigen::Index i = 1; i + 1 < n; ++i)
    if (std::abs((path.times[i + 1] - path.times[i]) - h) > 1e-9 * std::max(1.0, h))
      throw MetricsError("fclt_variance_empirical: record grid must be uniform");

  double psi_l = psi_eval(params, lambda);
  double phi_l = phi_eval(params, lambda);
  auto g = [&](double y) { return std::exp(-lambda * y) * (-psi_l + y * phi_l); };

  Eigen::Index start = 0;
  while (start < n && path.times[start] < burn_in) ++start;
  if (n - start < 16) throw MetricsError("fclt_variance_empirical: horizon too short after burn-in");

  // cumulative trapezoid of g along the path
  Eigen::ArrayXd cum(n - start);
  cum[0] = 0.0;
  double prev_g = g(path.states[start]);
  for (Eigen::Index i = 1; i < n - start; ++i) {
    double gi = g(path.states[start + i]);
    cum[i] = cum[i - 1] + 0.5 * (prev_g + gi) * h;
    prev_g = gi;
  }

  Eigen::Index m = static_cast<Eigen::Index>(std::llround(batch_len / h));
  if (m < 2 || m >= cum.size()) throw MetricsError("fclt_variance_empirical: bad batch length");
  double span = (cum.size() - 1) * h;
  double gbar = cum[cum.size() - 1] / span;

  Eigen::Index stride = std::max<Eigen::Index>(1, m / 4);
  KahanSum acc;
  int count = 0;
  for (Eigen::Index k = 0; k + m < cum.size(); k += stride) {
    double batch = cum[k + m] - cum[k] - m * h * gbar;
    acc.add(batch * batch);
    ++count;
  }
  FcltEstimate est;
  est.batch_len = m * h;
  est.n_batches = count;
  est.gamma2 = acc.value() / count / (m * h);
  double k_eff = span / est.batch_len;  // overlapping windows: ~4/3 efficiency
  est.stderr_value = est.gamma2 * std::sqrt(8.0 / (3.0 * std::max(k_eff, 2.0)));
  return est;
}

}  // namespace ergolab
