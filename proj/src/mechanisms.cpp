#include "ergolab/mechanisms.hpp"

#include <cmath>
#include <limits>

namespace ergolab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// e^{-s} - 1 + s for s >= 0, stable near 0
double em1p(double s) {
  if (s < 1e-3) {
    double s2 = s * s;
    return s2 * (0.5 - s / 6.0 + s2 / 24.0 - s2 * s / 120.0);
  }
  return std::expm1(-s) + s;
}

// (e^{-s} - 1 + s)/s
double em1p_over(double s) {
  if (s <= 0.0) return 0.0;
  if (s < 1e-3) return s * (0.5 - s / 6.0 + s * s / 24.0);
  return std::expm1(-s) / s + 1.0;
}

// (1 - e^{-s})/s, equals 1 at s = 0
double om_exp_over(double s) {
  if (s <= 0.0) return 1.0;
  if (s < 1e-3) return 1.0 - s * (0.5 - s / 6.0 + s * s / 24.0);
  return -std::expm1(-s) / s;
}

}  // namespace

MeasureConditionReport measure_condition(const LevyMeasure& m, const LevyMeasure& nu) {
  double bi = levy_integral(m, [](double z) { return std::min(z, z * z); }, Interval::positive()).value;
  double ii = levy_integral(nu, [](double z) { return std::min(1.0, z); }, Interval::positive()).value;
  return {bi, ii, std::isfinite(bi) && std::isfinite(ii)};
}

void validate(const CbiParams& params) {
  if (!(params.beta >= 0.0) || !std::isfinite(params.beta))
    throw AdmissibilityError("immigration drift beta must be finite and nonnegative");
  if (!(params.sigma >= 0.0) || !std::isfinite(params.sigma))
    throw AdmissibilityError("sigma must be finite and nonnegative");
  if (!std::isfinite(params.b)) throw AdmissibilityError("b must be finite");
  for (const LevyMeasure* mp : {&params.m, &params.nu}) {
    if (const auto* a = std::get_if<FiniteAtoms>(&mp->variant()))
      for (const Atom& at : a->atoms)
        if (!(at.z > 0.0))
          throw AdmissibilityError("branching/immigration atoms must sit on (0, infinity)");
  }
  MeasureConditionReport mc = measure_condition(params.m, params.nu);
  if (!std::isfinite(mc.branching_integral))
    throw AdmissibilityError("branching measure fails the (z ^ z^2) integrability condition");
  if (!std::isfinite(mc.immigration_integral))
    throw AdmissibilityError("immigration measure fails the (1 ^ z) integrability condition");
}

double phi_eval(const CbiParams& params, double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("phi_eval: lambda must be nonnegative");
  if (lambda == 0.0) return 0.0;
  double val = params.b * lambda + 0.5 * params.sigma2() * lambda * lambda;
  if (!params.m.is_zero())
    val += levy_integral(params.m, [lambda](double z) { return em1p(lambda * z); },
                         Interval::positive())
               .value;
  return val;
}

double psi_eval(const CbiParams& params, double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("psi_eval: lambda must be nonnegative");
  if (lambda == 0.0) return 0.0;
  double val = params.beta * lambda;
  if (!params.nu.is_zero())
    val += levy_integral(params.nu, [lambda](double z) { return -std::expm1(-lambda * z); },
                         Interval::positive())
               .value;
  return val;
}

double psi_prime0(const CbiParams& params) {
  if (params.nu.is_zero()) return params.beta;
  return params.beta + measure_mean(params.nu, Interval::positive());
}

double phi_slope(const CbiParams& params, double lambda) {
  double val = params.b + 0.5 * params.sigma2() * lambda;
  if (!params.m.is_zero())
    val += levy_integral(params.m, [lambda](double z) { return z * em1p_over(lambda * z); },
                         Interval::positive())
               .value;
  return val;
}

double psi_slope(const CbiParams& params, double lambda) {
  double val = params.beta;
  if (!params.nu.is_zero())
    val += levy_integral(params.nu, [lambda](double z) { return z * om_exp_over(lambda * z); },
                         Interval::positive())
               .value;
  return val;
}

double grey_integral(const CbiParams& params, double theta, double lambda_cap) {
  if (!(theta > 0.0) || !(lambda_cap > theta))
    throw std::invalid_argument("grey_integral: need 0 < theta < lambda_cap");
  if (!(phi_eval(params, theta) > 0.0))
    throw AdmissibilityError("grey_integral: phi is not positive at theta");

  auto inv_phi = [&](double u) { return 1.0 / phi_eval(params, u); };

  // dyadic cells keep the adaptive rule effective across the huge range
  double total = 0.0;
  double lo = theta;
  while (lo < lambda_cap) {
    double hi = std::min(2.0 * lo, lambda_cap);
    total += integrate(inv_phi, lo, hi).value;
    lo = hi;
  }

  double tail;
  if (params.sigma > 0.0) {
    // phi >= sigma^2 lambda^2 / 2 makes the remaining tail at most this
    tail = 2.0 / (params.sigma2() * lambda_cap);
  } else {
    double f2 = phi_eval(params, lambda_cap);
    double f1 = phi_eval(params, 0.5 * lambda_cap);
    double q = std::log2(f2 / f1);
    if (!(q > 1.05)) return kInf;
    tail = lambda_cap / (f2 * (q - 1.0));
  }
  return total + tail;
}

double psi_over_phi_integral(const CbiParams& params, double lambda) {
  if (!(lambda > 0.0)) return 0.0;
  bool phi_degenerate = params.b == 0.0 && params.sigma == 0.0 && params.m.is_zero();
  bool psi_degenerate = params.beta == 0.0 && params.nu.is_zero();
  if (phi_degenerate) return psi_degenerate ? 0.0 : kNaN;
  if (params.b < 0.0) return kNaN;  // phi < 0 near the origin

  auto ratio = [&](double u) {
    if (u < 1e-4) {
      // slope form is stable arbitrarily close to 0
      double sp = phi_slope(params, u);
      double ss = psi_slope(params, u);
      return ss / sp;
    }
    return psi_eval(params, u) / phi_eval(params, u);
  };

  double head_hi = std::min(lambda, 1.0);
  Integral head = integrate_to_zero(ratio, head_hi);
  if (!head.finite()) return head.value;
  double total = head.value;
  if (lambda > 1.0) {
    Integral rest = integrate(ratio, 1.0, lambda);
    total += rest.value;
  }
  return total;
}

MechanismReport check_conditions(const CbiParams& params) {
  validate(params);
  MechanismReport report;

  report.log_moment =
      levy_integral(params.nu, [](double z) { return std::log(z); }, {1.0, kInf}).value;
  report.first_moment_tail =
      levy_integral(params.nu, [](double z) { return z; }, {1.0, kInf}).value;

  // positivity threshold scan for Grey's condition
  constexpr double kLo = 1e-4, kCap = 1e6;
  constexpr int kN = 121;
  double theta = kNaN;
  {
    int last_bad = -1;
    double step = std::log(kCap / kLo) / (kN - 1);
    double phi_at_end = 0.0;
    for (int i = 0; i < kN; ++i) {
      double u = kLo * std::exp(step * i);
      double p = phi_eval(params, u);
      if (!(p > 0.0)) last_bad = i;
      if (i == kN - 1) phi_at_end = p;
    }
    if (last_bad == kN - 1 || !(phi_at_end > 0.0)) {
      report.grey_holds = false;
      report.grey_theta = kNaN;
      report.grey_integral = kNaN;
      report.grey_note = "inapplicable: phi is not eventually positive on the scanned range";
    } else {
      theta = kLo * std::exp(step * (last_bad + 1));
      report.grey_theta = theta;
      report.grey_integral = grey_integral(params, theta, kCap);
      report.grey_holds = std::isfinite(report.grey_integral);
      report.grey_note = report.grey_holds ? "" : "tail of 1/phi is not integrable";
    }
  }

  report.psi_over_phi_integral = psi_over_phi_integral(params, 1.0);
  report.invariant_exists = std::isfinite(report.psi_over_phi_integral);
  return report;
}

}  // namespace ergolab
