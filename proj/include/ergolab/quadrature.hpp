#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

namespace ergolab {

/// Integrals whose partial sums pass this magnitude are classified as infinite.
inline constexpr double kOverflowThreshold = 1e15;

struct QuadratureOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  int max_depth = 48;
};

struct Integral {
  double value = 0.0;      // +-infinity when the integral is classified divergent
  double abs_error = 0.0;  // error estimate, meaningless when not finite
  bool finite() const { return std::isfinite(value); }
};

struct QuadratureError : std::runtime_error {
  explicit QuadratureError(const std::string& what) : std::runtime_error(what) {}
};

using Integrand = std::function<double(double)>;

// Adaptive Simpson with Richardson correction on a finite interval.
// Throws QuadratureError when the error estimate cannot be brought near the
// requested tolerance (non-convergent integrand), never returns a silently
// wrong value.
Integral integrate(const Integrand& f, double a, double b, const QuadratureOptions& opt = {});

// Integral over (0, b] with a possible integrable singularity at 0, computed
// on dyadically shrinking cells. Divergence at the origin is classified and
// reported as +-infinity.
Integral integrate_to_zero(const Integrand& f, double b, const QuadratureOptions& opt = {});

// Integral over [a, infinity), dyadically growing cells, divergent tails
// classified as +-infinity.
Integral integrate_to_infinity(const Integrand& f, double a, const QuadratureOptions& opt = {});

// Integral over [a, b], 0 < a < b, on geometrically growing cells; suited to
// integrands that vary over many orders of magnitude near a.
Integral integrate_geometric(const Integrand& f, double a, double b,
                             const QuadratureOptions& opt = {});

}  // namespace ergolab
