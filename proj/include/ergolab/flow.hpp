#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>
#include <vector>

#include "ergolab/mechanisms.hpp"

namespace ergolab {

struct FlowError : std::runtime_error {
  FlowError(const std::string& what, double t) : std::runtime_error(what), time(t) {}
  double time;
};

struct OdeOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  double min_step_factor = 1e-14;  // relative to the horizon
};

/// Numerical solution of dv/dt = -phi(v), v_0 = lambda, together with the
/// accumulated immigration integral I(t) = ∫_0^t psi(v_s) ds. Dense output
/// allows evaluation anywhere in [0, horizon].
class FlowSolution {
 public:
  double lambda0 = 0.0;
  Eigen::ArrayXd grid;          // requested output times
  Eigen::ArrayXd v;             // v_t on grid, clamped to [0, inf)
  Eigen::ArrayXd psi_integral;  // ∫_0^t psi(v_s) ds on grid
  double tolerance = 0.0;       // max accepted local error estimate

  double value_at(double t) const;
  double psi_integral_at(double t) const;

  struct Segment {
    double t0, h;
    // dense interpolation coefficients for (v, I)
    double rc1[2], rc2[2], rc3[2], rc4[2], rc5[2];
  };
  std::vector<Segment> segments;
  double horizon = 0.0;
};

FlowSolution solve_v(const CbiParams& params, double lambda, double horizon,
                     const Eigen::ArrayXd* grid = nullptr, const OdeOptions& opt = {});

/// E[e^{-lambda X_t} | X_0 = x] = exp(-x v_t(lambda) - ∫_0^t psi(v_s) ds)
double transition_laplace(const CbiParams& params, double x, double t, double lambda);

struct InvariantError : std::runtime_error {
  explicit InvariantError(const std::string& what) : std::runtime_error(what) {}
};

/// Laplace transform of the invariant law: exp(-∫_0^lambda psi/phi du).
/// Throws InvariantError when no invariant distribution exists.
double invariant_laplace(const CbiParams& params, double lambda);

/// e^{-bt} x + (beta + ∫ z nu(dz)) ∫_0^t e^{-bs} ds; requires a finite first
/// moment of nu.
double first_moment(const CbiParams& params, double x, double t);

/// Long-run variance of the compensated observable built from f_l(y)=e^{-ly}:
/// (2 psi(l) + phi(l) psi(2l)/phi(2l)) * exp(-∫_0^{2l} psi/phi du)
double fclt_gamma2(const CbiParams& params, double lambda);

/// Flow in a frozen environment path. The environment enters as the
/// right-continuous piecewise-constant interpolant of xi on the grid.
struct EnvFlowSolution {
  Eigen::ArrayXd grid;   // r-grid, grid[0] = 0, grid[last] = t
  Eigen::ArrayXd xi;     // environment values on the grid
  Eigen::ArrayXd v_env;  // v_{r,t}(lambda) for r on the grid
  double v0t = 0.0;      // v_{0,t}(lambda)
  double psi_integral = 0.0;  // ∫_0^t psi(v_{s,t}) ds
  bool vbar_requested = false;
  double vbar = 0.0;  // large-lambda limit, only set when requested
};

/// lambda may be +infinity: the large-lambda limit is then computed from
/// lambda_max = 1e8 with a decade stabilization check (requires Grey's
/// condition to be meaningful).
EnvFlowSolution solve_v_env(const CbiParams& params, const Eigen::ArrayXd& grid,
                            const Eigen::ArrayXd& xi, double lambda, const OdeOptions& opt = {});

}  // namespace ergolab
