#include "ergolab/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ergolab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Dormand-Prince 5(4) pair with the classic quartic dense-output interpolant.
struct Dopri {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  static constexpr double d1 = -12715105075.0 / 11282082432.0;
  static constexpr double d3 = 87487479700.0 / 32700410799.0;
  static constexpr double d4 = -10690763975.0 / 1880347072.0;
  static constexpr double d5 = 701980252875.0 / 199316789632.0;
  static constexpr double d6 = -1453857185.0 / 822651844.0;
  static constexpr double d7 = 69997945.0 / 29380423.0;
};

struct State {
  double v;
  double i;
};

class FlowIntegrator {
 public:
  FlowIntegrator(const CbiParams& params, const OdeOptions& opt) : p_(params), opt_(opt) {}

  // integrates dv/dt = -phi(v), dI/dt = psi(v) over [0, horizon] starting at
  // (v0, i0); when capture is non-null, appends dense segments with their t0
  // shifted by t_offset and records grid points found in (t_offset, t_offset+horizon].
  State integrate(double v0, double i0, double horizon, FlowSolution* capture, double t_offset,
                  double* max_err_out) {
    State y{std::max(v0, 0.0), i0};
    if (horizon <= 0.0) return y;
    double t = 0.0;
    double h = initial_step(y.v, horizon);
    double hmin = opt_.min_step_factor * std::max(1.0, horizon);
    double max_err = 0.0;
    double k1v, k1i;
    rhs(y.v, k1v, k1i);
    std::size_t grid_cursor = 0;
    if (capture) {
      while (grid_cursor < static_cast<std::size_t>(capture->grid.size()) &&
             capture->grid[grid_cursor] <= t_offset + 1e-15 * std::max(1.0, t_offset)) {
        capture->v[grid_cursor] = y.v;
        capture->psi_integral[grid_cursor] = y.i;
        ++grid_cursor;
      }
    }
    long steps = 0;
    while (t < horizon) {
      if (++steps > 20'000'000) throw FlowError("flow solver exceeded the step budget", t_offset + t);
      if (h < hmin) throw FlowError("step size underflow in the flow solver", t_offset + t);
      // clip to the horizon and to the next requested grid point, so recorded
      // values are step endpoints rather than dense interpolations
      double h_try = std::min(h, horizon - t);
      if (capture && grid_cursor < static_cast<std::size_t>(capture->grid.size())) {
        double to_grid = capture->grid[grid_cursor] - t_offset - t;
        if (to_grid > 1e-300 && to_grid < h_try) h_try = to_grid;
      }

      double k2v, k2i, k3v, k3i, k4v, k4i, k5v, k5i, k6v, k6i, k7v, k7i;
      double vs;
      vs = y.v + h_try * Dopri::a21 * k1v;
      rhs(vs, k2v, k2i);
      vs = y.v + h_try * (Dopri::a31 * k1v + Dopri::a32 * k2v);
      rhs(vs, k3v, k3i);
      vs = y.v + h_try * (Dopri::a41 * k1v + Dopri::a42 * k2v + Dopri::a43 * k3v);
      rhs(vs, k4v, k4i);
      vs = y.v + h_try * (Dopri::a51 * k1v + Dopri::a52 * k2v + Dopri::a53 * k3v + Dopri::a54 * k4v);
      rhs(vs, k5v, k5i);
      vs = y.v + h_try * (Dopri::a61 * k1v + Dopri::a62 * k2v + Dopri::a63 * k3v + Dopri::a64 * k4v +
                          Dopri::a65 * k5v);
      rhs(vs, k6v, k6i);
      double v1 = y.v + h_try * (Dopri::b1 * k1v + Dopri::b3 * k3v + Dopri::b4 * k4v +
                                 Dopri::b5 * k5v + Dopri::b6 * k6v);
      double i1 = y.i + h_try * (Dopri::b1 * k1i + Dopri::b3 * k3i + Dopri::b4 * k4i +
                                 Dopri::b5 * k5i + Dopri::b6 * k6i);
      rhs(v1, k7v, k7i);

      double ev = h_try * (Dopri::e1 * k1v + Dopri::e3 * k3v + Dopri::e4 * k4v + Dopri::e5 * k5v +
                           Dopri::e6 * k6v + Dopri::e7 * k7v);
      double ei = h_try * (Dopri::e1 * k1i + Dopri::e3 * k3i + Dopri::e4 * k4i + Dopri::e5 * k5i +
                           Dopri::e6 * k6i + Dopri::e7 * k7i);
      // controller aims a factor 5 below the stated tolerance
      double scv = 0.2 * (opt_.abs_tol + opt_.rel_tol * std::max(std::abs(y.v), std::abs(v1)));
      double sci = 0.2 * (opt_.abs_tol + opt_.rel_tol * std::max(std::abs(y.i), std::abs(i1)));
      double err = std::sqrt(0.5 * (sqr_(ev / scv) + sqr_(ei / sci)));

      if (err <= 1.0) {
        if (capture) {
          FlowSolution::Segment seg;
          seg.t0 = t_offset + t;
          seg.h = h_try;
          fill_dense(seg, y.v, y.i, v1, i1, h_try, k1v, k1i, k3v, k3i, k4v, k4i, k5v, k5i, k6v,
                     k6i, k7v, k7i);
          capture->segments.push_back(seg);
          double t_new_abs = t_offset + t + h_try;
          while (grid_cursor < static_cast<std::size_t>(capture->grid.size()) &&
                 capture->grid[grid_cursor] <= t_new_abs + 1e-12 * std::max(1.0, t_new_abs)) {
            double theta = (capture->grid[grid_cursor] - seg.t0) / h_try;
            theta = std::clamp(theta, 0.0, 1.0);
            double vv, ii;
            eval_segment(seg, theta, vv, ii);
            capture->v[grid_cursor] = std::max(vv, 0.0);
            capture->psi_integral[grid_cursor] = ii;
            ++grid_cursor;
          }
        }
        max_err = std::max(max_err, err);
        t += h_try;
        y.v = std::max(v1, 0.0);
        y.i = i1;
        k1v = k7v;
        k1i = k7i;
        if (v1 < 0.0) rhs(y.v, k1v, k1i);  // clamp invalidates FSAL
        h = h_try * std::clamp(0.9 * std::pow(std::max(err, 1e-10), -0.2), 1.0, 5.0);
      } else {
        h = h_try * std::clamp(0.9 * std::pow(err, -0.2), 0.2, 0.9);
      }
    }
    if (max_err_out) *max_err_out = std::max(*max_err_out, max_err);
    return y;
  }

  static void eval_segment(const FlowSolution::Segment& s, double theta, double& v, double& i) {
    double om = 1.0 - theta;
    v = s.rc1[0] + theta * (s.rc2[0] + om * (s.rc3[0] + theta * (s.rc4[0] + om * s.rc5[0])));
    i = s.rc1[1] + theta * (s.rc2[1] + om * (s.rc3[1] + theta * (s.rc4[1] + om * s.rc5[1])));
  }

 private:
  static double sqr_(double x) { return x * x; }

  void rhs(double v, double& fv, double& fi) const {
    double vv = std::max(v, 0.0);
    fv = -phi_eval(p_, vv);
    fi = psi_eval(p_, vv);
  }

  double initial_step(double v0, double horizon) const {
    double f = std::abs(phi_eval(p_, std::max(v0, 0.0)));
    double h = 0.01 * std::max(v0, 1.0) / (1.0 + f);
    h = std::min(h, 0.05 * horizon);
    return std::max(h, 1e2 * opt_.min_step_factor * std::max(1.0, horizon));
  }

  void fill_dense(FlowSolution::Segment& seg, double v0, double i0, double v1, double i1, double h,
                  double k1v, double k1i, double k3v, double k3i, double k4v, double k4i,
                  double k5v, double k5i, double k6v, double k6i, double k7v, double k7i) const {
    double dv = v1 - v0, di = i1 - i0;
    seg.rc1[0] = v0;
    seg.rc1[1] = i0;
    seg.rc2[0] = dv;
    seg.rc2[1] = di;
    seg.rc3[0] = h * k1v - dv;
    seg.rc3[1] = h * k1i - di;
    seg.rc4[0] = dv - h * k7v - seg.rc3[0];
    seg.rc4[1] = di - h * k7i - seg.rc3[1];
    seg.rc5[0] = h * (Dopri::d1 * k1v + Dopri::d3 * k3v + Dopri::d4 * k4v + Dopri::d5 * k5v +
                      Dopri::d6 * k6v + Dopri::d7 * k7v);
    seg.rc5[1] = h * (Dopri::d1 * k1i + Dopri::d3 * k3i + Dopri::d4 * k4i + Dopri::d5 * k5i +
                      Dopri::d6 * k6i + Dopri::d7 * k7i);
  }

  const CbiParams& p_;
  OdeOptions opt_;
};

const FlowSolution::Segment* find_segment(const std::vector<FlowSolution::Segment>& segs,
                                          double t) {
  if (segs.empty()) return nullptr;
  auto it = std::upper_bound(segs.begin(), segs.end(), t,
                             [](double tt, const FlowSolution::Segment& s) { return tt < s.t0; });
  if (it == segs.begin()) return &segs.front();
  return &*(it - 1);
}

Eigen::ArrayXd default_flow_grid(double horizon) {
  return Eigen::ArrayXd::LinSpaced(129, 0.0, horizon);
}

}  // namespace

double FlowSolution::value_at(double t) const {
  if (t < 0.0 || t > horizon * (1.0 + 1e-12) + 1e-300)
    throw std::out_of_range("flow evaluation outside [0, horizon]");
  const Segment* s = find_segment(segments, t);
  if (!s) return lambda0;
  double theta = std::clamp((t - s->t0) / s->h, 0.0, 1.0);
  double v, i;
  FlowIntegrator::eval_segment(*s, theta, v, i);
  return std::max(v, 0.0);
}

double FlowSolution::psi_integral_at(double t) const {
  if (t < 0.0 || t > horizon * (1.0 + 1e-12) + 1e-300)
    throw std::out_of_range("flow evaluation outside [0, horizon]");
  const Segment* s = find_segment(segments, t);
  if (!s) return 0.0;
  double theta = std::clamp((t - s->t0) / s->h, 0.0, 1.0);
  double v, i;
  FlowIntegrator::eval_segment(*s, theta, v, i);
  return i;
}

FlowSolution solve_v(const CbiParams& params, double lambda, double horizon,
                     const Eigen::ArrayXd* grid, const OdeOptions& opt) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("solve_v: lambda must be nonnegative");
  if (!(horizon > 0.0)) throw std::invalid_argument("solve_v: horizon must be positive");
  FlowSolution sol;
  sol.lambda0 = lambda;
  sol.horizon = horizon;
  sol.grid = grid ? *grid : default_flow_grid(horizon);
  sol.v = Eigen::ArrayXd::Zero(sol.grid.size());
  sol.psi_integral = Eigen::ArrayXd::Zero(sol.grid.size());

  FlowIntegrator integ(params, opt);
  double max_err = 0.0;
  integ.integrate(lambda, 0.0, horizon, &sol, 0.0, &max_err);
  sol.tolerance = max_err;
  return sol;
}

double transition_laplace(const CbiParams& params, double x, double t, double lambda) {
  if (!(x >= 0.0) || !(t >= 0.0) || !(lambda >= 0.0))
    throw std::invalid_argument("transition_laplace: x, t, lambda must be nonnegative");
  if (lambda == 0.0) return 1.0;
  if (t == 0.0) return std::exp(-x * lambda);
  FlowIntegrator integ(params, OdeOptions{});
  auto end = integ.integrate(lambda, 0.0, t, nullptr, 0.0, nullptr);
  return std::exp(-x * end.v - end.i);
}

double invariant_laplace(const CbiParams& params, double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("invariant_laplace: lambda must be nonnegative");
  if (lambda == 0.0) return 1.0;
  double j = psi_over_phi_integral(params, lambda);
  if (!std::isfinite(j))
    throw InvariantError("no invariant distribution: psi/phi is not integrable at 0");
  return std::exp(-j);
}

double first_moment(const CbiParams& params, double x, double t) {
  if (!(x >= 0.0) || !(t >= 0.0))
    throw std::invalid_argument("first_moment: x and t must be nonnegative");
  double nu1 = params.nu.is_zero() ? 0.0 : measure_mean(params.nu, Interval::positive());
  if (!std::isfinite(nu1))
    throw AdmissibilityError("first_moment: nu has infinite first moment");
  double itg = params.b == 0.0 ? t : -std::expm1(-params.b * t) / params.b;
  return std::exp(-params.b * t) * x + (params.beta + nu1) * itg;
}

double fclt_gamma2(const CbiParams& params, double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("fclt_gamma2: lambda must be nonnegative");
  if (lambda == 0.0) return 0.0;
  bool psi_zero = params.beta == 0.0 && params.nu.is_zero();
  if (psi_zero) return 0.0;
  double phi2 = phi_eval(params, 2.0 * lambda);
  if (!(phi2 > 0.0)) throw InvariantError("fclt_gamma2: phi(2 lambda) must be positive");
  double j2 = psi_over_phi_integral(params, 2.0 * lambda);
  if (!std::isfinite(j2)) throw InvariantError("fclt_gamma2: invariant transform does not exist");
  double phi1 = phi_eval(params, lambda);
  double psi1 = psi_eval(params, lambda);
  double psi2 = psi_eval(params, 2.0 * lambda);
  // 2 psi(l) pi_hat(2l) - 2 phi(l) E[y e^{-2ly}] with E[y e^{-2ly}] read off
  // the transform derivative pi_hat'(2l) = -(psi/phi)(2l) pi_hat(2l);
  // nonnegative since psi/phi is nonincreasing
  return 2.0 * (psi1 - phi1 * psi2 / phi2) * std::exp(-j2);
}

EnvFlowSolution solve_v_env(const CbiParams& params, const Eigen::ArrayXd& grid,
                            const Eigen::ArrayXd& xi, double lambda, const OdeOptions& opt) {
  const auto n = grid.size();
  if (n < 2 || xi.size() != n)
    throw std::invalid_argument("solve_v_env: grid and xi need matching sizes >= 2");
  if (std::abs(grid[0]) > 1e-14)
    throw std::invalid_argument("solve_v_env: grid must start at 0");

  bool want_vbar = std::isinf(lambda);

  auto backward = [&](double lam, EnvFlowSolution* fill) {
    FlowIntegrator integ(params, opt);
    double w = lam;
    double acc = 0.0;
    if (fill) fill->v_env[n - 1] = w;
    for (Eigen::Index i = n - 1; i >= 1; --i) {
      w *= std::exp(xi[i] - xi[i - 1]);  // environment jump at grid[i], crossed backward
      double span = grid[i] - grid[i - 1];
      auto end = integ.integrate(w, 0.0, span, nullptr, 0.0, nullptr);
      w = end.v;
      acc += end.i;
      if (fill) fill->v_env[i - 1] = w;
    }
    return std::pair<double, double>(w, acc);
  };

  EnvFlowSolution sol;
  sol.grid = grid;
  sol.xi = xi;
  sol.v_env = Eigen::ArrayXd::Zero(n);
  sol.vbar_requested = want_vbar;

  if (!want_vbar) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("solve_v_env: lambda must be nonnegative");
    auto [v0, acc] = backward(lambda, &sol);
    sol.v0t = v0;
    sol.psi_integral = acc;
    return sol;
  }

  constexpr double kLambdaMax = 1e8;
  auto [v_hi, acc_hi] = backward(kLambdaMax, &sol);
  auto [v_lo, acc_lo] = backward(kLambdaMax / 10.0, nullptr);
  double ref = std::max(std::abs(v_hi), 1e-300);
  if (std::abs(v_hi - v_lo) > 1e-6 * ref)
    throw FlowError(
        "large-lambda limit did not stabilize; Grey's condition likely fails for these parameters",
        grid[n - 1]);
  sol.v0t = v_hi;
  sol.vbar = v_hi;
  sol.psi_integral = acc_hi;
  return sol;
}

}  // namespace ergolab
