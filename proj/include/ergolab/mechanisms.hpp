#pragma once

#include <string>

#include "ergolab/levy.hpp"

namespace ergolab {

/// Admissible branching/immigration parameter set (beta, b, sigma, m, nu).
struct CbiParams {
  double beta = 0.0;   // immigration drift, >= 0
  double b = 0.0;      // linear drift rate (subcritical when > 0)
  double sigma = 0.0;  // diffusion coefficient, >= 0
  LevyMeasure m;       // branching jump measure on (0, inf)
  LevyMeasure nu;      // immigration jump measure on (0, inf)

  double sigma2() const { return sigma * sigma; }
};

struct AdmissibilityError : std::runtime_error {
  explicit AdmissibilityError(const std::string& what) : std::runtime_error(what) {}
};

struct MeasureConditionReport {
  double branching_integral;    // ∫ (z ∧ z^2) m(dz)
  double immigration_integral;  // ∫ (1 ∧ z) nu(dz)
  bool pass;
};

MeasureConditionReport measure_condition(const LevyMeasure& m, const LevyMeasure& nu);

/// throws AdmissibilityError when the parameter set violates the admissibility
/// constraints (signs, measure integrability)
void validate(const CbiParams& params);

/// phi(l) = b l + sigma^2 l^2 / 2 + ∫ (e^{-lz} - 1 + lz) m(dz)
double phi_eval(const CbiParams& params, double lambda);

/// psi(l) = beta l + ∫ (1 - e^{-lz}) nu(dz)
double psi_eval(const CbiParams& params, double lambda);

/// psi'(0) = beta + ∫ z nu(dz); +infinity when nu has infinite first moment
double psi_prime0(const CbiParams& params);

/// phi(l)/l extended continuously to l = 0 (equals b there); numerically
/// stable down to arbitrarily small positive l
double phi_slope(const CbiParams& params, double lambda);
double psi_slope(const CbiParams& params, double lambda);

struct MechanismReport {
  bool grey_holds = false;
  double grey_theta = 0.0;     // positivity threshold used (NaN when none exists)
  double grey_integral = 0.0;  // ∫_theta^cap 1/phi + tail extrapolation, +inf when divergent
  std::string grey_note;

  double log_moment = 0.0;         // ∫_{z>1} log z nu(dz)
  double first_moment_tail = 0.0;  // ∫_{z>1} z nu(dz), possibly +inf

  bool invariant_exists = false;
  double psi_over_phi_integral = 0.0;  // ∫_0^1 psi/phi, +inf when divergent, NaN when phi <= 0
};

/// ∫_theta^infinity 1/phi with quadrature up to lambda_cap and a tail
/// extrapolated from the dominant growth of phi; +infinity when the tail is
/// not integrable. phi must be positive on [theta, lambda_cap].
double grey_integral(const CbiParams& params, double theta, double lambda_cap = 1e6);

/// ∫_0^lambda psi(u)/phi(u) du with the near-zero slope limit substituted
/// analytically; +infinity on divergence, NaN when the integrand is undefined
/// (phi <= 0 somewhere below lambda).
double psi_over_phi_integral(const CbiParams& params, double lambda);

MechanismReport check_conditions(const CbiParams& params);

}  // namespace ergolab
