#include "ergolab/levy.hpp"

#include <algorithm>
#include <cmath>

namespace ergolab {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

LevyMeasure::LevyMeasure(Variant v) : v_(std::move(v)) {
  if (const auto* a = std::get_if<FiniteAtoms>(&v_)) {
    for (const Atom& at : a->atoms) {
      if (!(at.w > 0.0) || !std::isfinite(at.w) || !std::isfinite(at.z))
        throw MeasureError("atoms need finite positions and positive masses");
    }
  } else if (const auto* p = std::get_if<PowerLawDensity>(&v_)) {
    if (!(p->c > 0.0) || !(p->z_max > 0.0))
      throw MeasureError("power-law density needs c > 0 and z_max > 0");
  } else if (const auto* t = std::get_if<TemperedPowerLaw>(&v_)) {
    if (!(t->c > 0.0) || !(t->theta > 0.0))
      throw MeasureError("tempered power law needs c > 0 and theta > 0");
  }
}

LevyMeasure LevyMeasure::atoms(std::vector<Atom> atoms) {
  return LevyMeasure(Variant(FiniteAtoms{std::move(atoms)}));
}
LevyMeasure LevyMeasure::power_law(double c, double p, double z_max) {
  return LevyMeasure(Variant(PowerLawDensity{c, p, z_max}));
}
LevyMeasure LevyMeasure::tempered(double c, double p, double theta) {
  return LevyMeasure(Variant(TemperedPowerLaw{c, p, theta}));
}

bool LevyMeasure::is_zero() const {
  if (std::holds_alternative<ZeroMeasure>(v_)) return true;
  if (const auto* a = std::get_if<FiniteAtoms>(&v_)) return a->atoms.empty();
  return false;
}

bool LevyMeasure::has_density() const {
  return std::holds_alternative<PowerLawDensity>(v_) || std::holds_alternative<TemperedPowerLaw>(v_);
}

bool LevyMeasure::finite_activity() const {
  if (const auto* p = std::get_if<PowerLawDensity>(&v_)) return p->p > -1.0 && std::isfinite(p->z_max);
  if (const auto* t = std::get_if<TemperedPowerLaw>(&v_)) return t->p > -1.0;
  return true;  // zero / atoms
}

double LevyMeasure::density(double z) const {
  if (const auto* p = std::get_if<PowerLawDensity>(&v_)) {
    if (z <= 0.0 || z > p->z_max) return 0.0;
    return p->c * std::pow(z, p->p);
  }
  if (const auto* t = std::get_if<TemperedPowerLaw>(&v_)) {
    if (z <= 0.0) return 0.0;
    return t->c * std::pow(z, t->p) * std::exp(-t->theta * z);
  }
  throw MeasureError("density() called on a measure without a density");
}

double LevyMeasure::support_lo() const { return 0.0; }

double LevyMeasure::support_hi() const {
  if (const auto* p = std::get_if<PowerLawDensity>(&v_)) return p->z_max;
  if (std::holds_alternative<TemperedPowerLaw>(v_)) return kInf;
  if (const auto* a = std::get_if<FiniteAtoms>(&v_)) {
    double hi = 0.0;
    for (const Atom& at : a->atoms) hi = std::max(hi, at.z);
    return hi;
  }
  return 0.0;
}

Integral levy_integral(const LevyMeasure& m, const Integrand& f, Interval domain,
                       const QuadratureOptions& opt) {
  if (m.is_zero()) return {0.0, 0.0};

  if (const auto* a = std::get_if<FiniteAtoms>(&m.variant())) {
    // exact finite sum, in stored order, bit-for-bit reproducible
    double sum = 0.0;
    for (const Atom& at : a->atoms)
      if (domain.contains(at.z)) sum += at.w * f(at.z);
    return {sum, 0.0};
  }

  // density variants live on (0, support_hi]
  double lo = std::max(domain.lo, 0.0);
  double hi = std::min(domain.hi, m.support_hi());
  if (!(lo < hi)) return {0.0, 0.0};
  if (hi >= 1e290) hi = kInf;  // astronomically large ends route to the tail integrator

  auto g = [&](double z) { return f(z) * m.density(z); };

  Integral total{0.0, 0.0};
  auto absorb = [&](const Integral& part) {
    if (!part.finite() || !total.finite()) {
      if (part.finite()) return;            // keep the divergent classification
      if (!total.finite() && total.value != part.value)
        throw QuadratureError("integral diverges with opposite signs on subdomains");
      total.value = part.value;
      return;
    }
    total.value += part.value;
    total.abs_error += part.abs_error;
  };

  // split at z = 1 to isolate the small-jump singularity
  double mid = std::clamp(1.0, lo, hi);
  if (lo == 0.0) {
    absorb(integrate_to_zero(g, mid, opt));
  } else if (lo < mid) {
    absorb(mid > 4.0 * lo ? integrate_geometric(g, lo, mid, opt) : integrate(g, lo, mid, opt));
  }
  if (mid < hi) {
    if (std::isinf(hi))
      absorb(integrate_to_infinity(g, mid, opt));
    else
      absorb(integrate(g, mid, hi, opt));
  }
  return total;
}

double measure_mass(const LevyMeasure& m, Interval domain) {
  return levy_integral(m, [](double) { return 1.0; }, domain).value;
}
double measure_mean(const LevyMeasure& m, Interval domain) {
  return levy_integral(m, [](double z) { return z; }, domain).value;
}
double measure_second_moment(const LevyMeasure& m, Interval domain) {
  return levy_integral(m, [](double z) { return z * z; }, domain).value;
}

JumpSampler::JumpSampler(const LevyMeasure& m, Interval domain) {
  if (const auto* a = std::get_if<FiniteAtoms>(&m.variant())) {
    AtomTable table;
    double cum = 0.0;
    for (const Atom& at : a->atoms) {
      if (!domain.contains(at.z)) continue;
      cum += at.w;
      table.cum.push_back(cum);
      table.pos.push_back(at.z);
    }
    if (!(cum > 0.0)) throw MeasureError("sampling domain carries zero mass");
    mass_ = cum;
    impl_ = std::move(table);
    return;
  }

  if (const auto* p = std::get_if<PowerLawDensity>(&m.variant())) {
    double a0 = std::max(domain.lo, 0.0);
    double b0 = std::min(domain.hi, p->z_max);
    if (a0 == 0.0 && p->p <= -1.0)
      throw MeasureError("power-law sampling needs a positive lower cutoff (infinite activity at 0)");
    if (!(a0 < b0)) throw MeasureError("sampling domain carries zero mass");
    if (std::isinf(b0) && p->p >= -1.0)
      throw MeasureError("power-law tail has infinite mass on the requested domain");
    PowerInverse inv{a0, b0, p->p};
    if (p->p == -1.0)
      mass_ = p->c * std::log(b0 / a0);
    else
      mass_ = p->c / (p->p + 1.0) *
              ((std::isinf(b0) ? 0.0 : std::pow(b0, p->p + 1.0)) -
               (a0 == 0.0 ? 0.0 : std::pow(a0, p->p + 1.0)));
    if (!(mass_ > 0.0) || !std::isfinite(mass_))
      throw MeasureError("sampling domain carries zero or infinite mass");
    impl_ = inv;
    return;
  }

  if (const auto* t = std::get_if<TemperedPowerLaw>(&m.variant())) {
    double a0 = std::max(domain.lo, 0.0);
    double b0 = domain.hi;
    if (a0 == 0.0 && t->p <= -1.0)
      throw MeasureError("tempered sampling needs a positive lower cutoff (infinite activity at 0)");
    TemperedTable table;
    table.c = t->c;
    table.p = t->p;
    table.theta = t->theta;

    // On (a0, z1] with theta*z1 small the exponential factor is nearly flat:
    // propose from the pure power law there and accept with e^{-theta z}.
    double z1 = std::min(0.01 / t->theta, b0);
    if (a0 < z1) {
      table.head = PowerInverse{a0, z1, t->p};
      double s = t->p + 1.0;
      table.head_envelope =
          t->p == -1.0 ? t->c * std::log(z1 / a0)
                       : t->c / s * (std::pow(z1, s) - (a0 == 0.0 ? 0.0 : std::pow(a0, s)));
    }
    // geometric cells beyond z1; density bounded on each cell by endpoint values
    double lo = std::max(a0, z1);
    double total_env = 0.0;
    std::vector<double> cell_mass;
    while (lo < b0) {
      double hi = std::min(lo * 2.0, b0);
      double h = std::max(m.density(lo * (1.0 + 1e-12)), m.density(hi));
      if (t->p > 0.0) h = t->c * std::pow(hi, t->p) * std::exp(-t->theta * lo);
      double env = h * (hi - lo);
      table.cells.push_back({lo, hi, h});
      total_env += env;
      cell_mass.push_back(total_env);
      lo = hi;
      if (env < 1e-16 * total_env && t->theta * lo > 40.0) break;  // tail dead
      if (table.cells.size() > 400) break;
    }
    table.cum = std::move(cell_mass);
    mass_ = levy_integral(m, [](double) { return 1.0; }, {a0, b0}).value;
    if (!(mass_ > 0.0) || !std::isfinite(mass_))
      throw MeasureError("sampling domain carries zero or infinite mass");
    impl_ = std::move(table);
    return;
  }

  throw MeasureError("sampling domain carries zero mass");
}

double JumpSampler::sample(RngStream& rng) const {
  if (const auto* t = std::get_if<AtomTable>(&impl_)) {
    double u = rng.uniform() * t->cum.back();
    auto it = std::lower_bound(t->cum.begin(), t->cum.end(), u);
    std::size_t i = static_cast<std::size_t>(it - t->cum.begin());
    if (i >= t->pos.size()) i = t->pos.size() - 1;
    return t->pos[i];
  }
  if (const auto* p = std::get_if<PowerInverse>(&impl_)) {
    double u = rng.uniform();
    if (p->p == -1.0) return p->a * std::pow(p->b / p->a, u);
    double s = p->p + 1.0;
    double ga = std::pow(p->a, s);
    double gb = std::isinf(p->b) ? 0.0 : std::pow(p->b, s);
    return std::pow(ga + u * (gb - ga), 1.0 / s);
  }
  const auto& t = std::get<TemperedTable>(impl_);
  double tail_envelope = t.cum.empty() ? 0.0 : t.cum.back();
  for (;;) {
    // select the component by proposal mass so rejection stays exact
    if (rng.uniform() * (t.head_envelope + tail_envelope) <= t.head_envelope) {
      // power-law proposal, accept with the (nearly flat) exponential factor
      const PowerInverse& h = *t.head;
      double u = rng.uniform();
      double s = h.p + 1.0;
      double ga = h.a == 0.0 ? 0.0 : std::pow(h.a, s);
      double z = h.p == -1.0 ? h.a * std::pow(h.b / h.a, u)
                             : std::pow(ga + u * (std::pow(h.b, s) - ga), 1.0 / s);
      if (rng.uniform() <= std::exp(-t.theta * z)) return z;
      continue;
    }
    double u = rng.uniform() * t.cum.back();
    auto it = std::lower_bound(t.cum.begin(), t.cum.end(), u);
    std::size_t i = static_cast<std::size_t>(it - t.cum.begin());
    if (i >= t.cells.size()) i = t.cells.size() - 1;
    const EnvelopeCell& cell = t.cells[i];
    double z = cell.lo + rng.uniform() * (cell.hi - cell.lo);
    double dens = t.c * std::pow(z, t.p) * std::exp(-t.theta * z);
    if (rng.uniform() * cell.height <= dens) return z;
  }
}

double sample_jump(const LevyMeasure& m, Interval domain, RngStream& rng) {
  JumpSampler sampler(m, domain);
  return sampler.sample(rng);
}

}  // namespace ergolab
