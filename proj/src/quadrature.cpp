#include "ergolab/quadrature.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace ergolab {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt_g(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

double eval(const Integrand& f, double x) {
  double y = f(x);
  if (std::isnan(y)) throw QuadratureError("integrand returned NaN at x=" + fmt_g(x));
  return y;
}

struct Panel {
  double value = 0.0;
  double error = 0.0;
};

double simpson(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

Panel adaptive(const Integrand& f, double a, double b, double fa, double fm, double fb,
               double whole, double eps, int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m);
  double rm = 0.5 * (m + b);
  double flm = eval(f, lm);
  double frm = eval(f, rm);
  double left = simpson(a, m, fa, flm, fm);
  double right = simpson(m, b, fm, frm, fb);
  double delta = left + right - whole;
  if (std::abs(delta) <= 15.0 * eps || depth <= 0) {
    // Richardson correction; residual estimate |delta|/15
    return {left + right + delta / 15.0, std::abs(delta) / 15.0};
  }
  Panel pl = adaptive(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1);
  Panel pr = adaptive(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1);
  return {pl.value + pr.value, pl.error + pr.error};
}

}  // namespace

Integral integrate(const Integrand& f, double a, double b, const QuadratureOptions& opt) {
  if (!(a < b)) return {0.0, 0.0};
  double fa = eval(f, a);
  double m = 0.5 * (a + b);
  double fm = eval(f, m);
  double fb = eval(f, b);
  if (std::isinf(fa) || std::isinf(fm) || std::isinf(fb))
    throw QuadratureError("integrand not finite inside the integration cell");
  double whole = simpson(a, b, fa, fm, fb);
  double eps = std::max(opt.abs_tol, opt.rel_tol * std::abs(whole));
  Panel p = adaptive(f, a, b, fa, fm, fb, whole, eps, opt.max_depth);
  double target = std::max(opt.abs_tol, opt.rel_tol * std::abs(p.value));
  if (p.error > 50.0 * target)
    throw QuadratureError("adaptive quadrature failed to converge on [" + fmt_g(a) + ", " +
                          fmt_g(b) + "]");
  return {p.value, p.error};
}

namespace {

// Shared cell-summation logic for both dyadic directions. cell(k) returns the
// integral over cell k; cells must tile the domain. Stops once the projected
// geometric tail of the remaining cells is negligible. Divergence is
// classified either by the running sum passing the overflow threshold or by
// cells that are still not decaying when the scale range is exhausted
// (log-type divergence); anything else that fails to settle is an error.
Integral sum_cells(const std::function<Integral(int)>& cell, int k_max, const QuadratureOptions& opt) {
  double total = 0.0;
  double err = 0.0;
  double prev_mag = kInf;
  double older_mag = kInf;
  double last_value = 0.0;
  int quiet = 0;  // consecutive cells with negligible projected tail
  for (int k = 0; k < k_max; ++k) {
    Integral c = cell(k);
    total += c.value;
    err += c.abs_error;
    if (std::abs(total) > kOverflowThreshold)
      return {total > 0 ? kInf : -kInf, 0.0};
    double mag = std::abs(c.value);
    double ratio = prev_mag > 0.0 ? std::min(mag / prev_mag, 0.9) : 0.0;
    double tail_estimate = mag * ratio / (1.0 - ratio);
    if (mag + tail_estimate <= std::max(0.25 * opt.abs_tol, opt.rel_tol * std::abs(total) * 0.25)) {
      if (++quiet >= 2) {
        err += tail_estimate;
        return {total, err};
      }
    } else {
      quiet = 0;
    }
    last_value = c.value;
    older_mag = prev_mag;
    prev_mag = mag;
  }
  // exhausted all scales: a still-not-decaying cell sequence is divergent
  if (std::abs(last_value) > opt.abs_tol && std::abs(last_value) >= 0.9 * older_mag)
    return {last_value > 0 ? kInf : -kInf, 0.0};
  throw QuadratureError("dyadic cell sum did not settle (integrand neither decays nor diverges cleanly)");
}

}  // namespace

Integral integrate_to_zero(const Integrand& f, double b, const QuadratureOptions& opt) {
  if (!(b > 0)) return {0.0, 0.0};
  QuadratureOptions cell_opt = opt;
  cell_opt.abs_tol = opt.abs_tol / 16.0;
  cell_opt.rel_tol = opt.rel_tol / 4.0;
  auto cell = [&](int k) {
    double hi = b * std::ldexp(1.0, -k);
    double lo = 0.5 * hi;
    return integrate(f, lo, hi, cell_opt);
  };
  return sum_cells(cell, 220, opt);
}

Integral integrate_to_infinity(const Integrand& f, double a, const QuadratureOptions& opt) {
  if (!(a > 0)) throw QuadratureError("integrate_to_infinity requires a positive left endpoint");
  QuadratureOptions cell_opt = opt;
  cell_opt.abs_tol = opt.abs_tol / 16.0;
  cell_opt.rel_tol = opt.rel_tol / 4.0;
  auto cell = [&](int k) {
    double lo = a * std::ldexp(1.0, k);
    double hi = 2.0 * lo;
    return integrate(f, lo, hi, cell_opt);
  };
  return sum_cells(cell, 140, opt);
}

Integral integrate_geometric(const Integrand& f, double a, double b, const QuadratureOptions& opt) {
  if (!(a > 0) || !(b > a)) return integrate(f, a, b, opt);
  QuadratureOptions cell_opt = opt;
  cell_opt.abs_tol = opt.abs_tol / 16.0;
  cell_opt.rel_tol = opt.rel_tol / 4.0;
  Integral total{0.0, 0.0};
  double lo = a;
  while (lo < b) {
    double hi = std::min(2.0 * lo, b);
    Integral c = integrate(f, lo, hi, cell_opt);
    total.value += c.value;
    total.abs_error += c.abs_error;
    lo = hi;
  }
  return total;
}

}  // namespace ergolab
