#pragma once

#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ergolab/quadrature.hpp"
#include "ergolab/rng.hpp"

namespace ergolab {

struct MeasureError : std::runtime_error {
  explicit MeasureError(const std::string& what) : std::runtime_error(what) {}
};

/// Half-open interval (lo, hi]; lo may be -infinity and hi +infinity.
struct Interval {
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();

  bool contains(double z) const { return z > lo && z <= hi; }
  static Interval positive() { return {0.0, std::numeric_limits<double>::infinity()}; }
  static Interval all() {
    return {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  }
};

struct Atom {
  double z;  // position; positive for branching/immigration, any real for environments
  double w;  // mass, > 0
};

struct FiniteAtoms {
  std::vector<Atom> atoms;
};

/// density c * z^p on (0, z_max], z_max may be +infinity
struct PowerLawDensity {
  double c;
  double p;
  double z_max = std::numeric_limits<double>::infinity();
};

/// density c * z^p * exp(-theta * z) on (0, infinity)
struct TemperedPowerLaw {
  double c;
  double p;
  double theta;
};

struct ZeroMeasure {};

class LevyMeasure {
 public:
  using Variant = std::variant<ZeroMeasure, FiniteAtoms, PowerLawDensity, TemperedPowerLaw>;

  LevyMeasure() : v_(ZeroMeasure{}) {}
  explicit LevyMeasure(Variant v);

  static LevyMeasure zero() { return LevyMeasure(); }
  static LevyMeasure atoms(std::vector<Atom> atoms);
  static LevyMeasure power_law(double c, double p,
                               double z_max = std::numeric_limits<double>::infinity());
  static LevyMeasure tempered(double c, double p, double theta);

  const Variant& variant() const { return v_; }
  bool is_zero() const;
  bool has_density() const;
  /// true when the total mass on the support is finite (no small-jump cutoff needed)
  bool finite_activity() const;
  /// density value at z for density variants; throws for atoms
  double density(double z) const;
  /// smallest support point (0 for densities) and support upper end
  double support_lo() const;
  double support_hi() const;

 private:
  Variant v_;
};

/// integral of f against the measure over (domain.lo, domain.hi], exact for
/// atoms, adaptive quadrature for densities with every (0,.) integral split at
/// z = 1; classified-divergent integrals come back +-infinity.
Integral levy_integral(const LevyMeasure& m, const Integrand& f, Interval domain,
                       const QuadratureOptions& opt = {});

/// convenience moments
double measure_mass(const LevyMeasure& m, Interval domain);
double measure_mean(const LevyMeasure& m, Interval domain);         // ∫ z
double measure_second_moment(const LevyMeasure& m, Interval domain);  // ∫ z^2

/// Draws from the normalized restriction of a measure to a domain of finite
/// positive mass. Construction does the setup work; draws are cheap and
/// deterministic given the stream state.
class JumpSampler {
 public:
  JumpSampler(const LevyMeasure& m, Interval domain);
  double total_mass() const { return mass_; }
  double sample(RngStream& rng) const;

 private:
  struct AtomTable {
    std::vector<double> cum;
    std::vector<double> pos;
  };
  struct PowerInverse {
    double a, b, p;
  };
  struct EnvelopeCell {
    double lo, hi, height;  // density <= height on (lo, hi]
  };
  struct TemperedTable {
    std::vector<EnvelopeCell> cells;
    std::vector<double> cum;  // cumulative envelope mass over the tail cells
    std::optional<PowerInverse> head;  // near-zero piece, power-law proposal
    double head_envelope = 0.0;        // proposal mass of the head piece
    double c, p, theta;
  };
  std::variant<AtomTable, PowerInverse, TemperedTable> impl_;
  double mass_ = 0.0;
};

/// one-shot form of the sampler (the public operation)
double sample_jump(const LevyMeasure& m, Interval domain, RngStream& rng);

}  // namespace ergolab
