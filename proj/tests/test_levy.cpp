#include <catch_amalgamated.hpp>

#include <cmath>

#include "ergolab/levy.hpp"
#include "ergolab/rng.hpp"

using namespace ergolab;
using Catch::Approx;

namespace {
constexpr double kPosInf = std::numeric_limits<double>::infinity();
}

TEST_CASE("levy_integral on atoms is the exact finite sum") {
  LevyMeasure m = LevyMeasure::atoms({{std::exp(1.0), 1.0}});
  Integral li = levy_integral(m, [](double z) { return std::log(z); }, {1.0, kPosInf});
  CHECK(li.value == 1.0);  // single atom, log e = 1, bit-exact

  LevyMeasure zero = LevyMeasure::zero();
  CHECK(levy_integral(zero, [](double z) { return z * z; }, Interval::positive()).value == 0.0);

  // domain boundaries are (lo, hi]: an atom at lo is excluded, at hi included
  LevyMeasure two = LevyMeasure::atoms({{1.0, 3.0}, {2.0, 5.0}});
  CHECK(levy_integral(two, [](double) { return 1.0; }, {1.0, 2.0}).value == 5.0);
}

TEST_CASE("levy_integral on power laws matches antiderivatives") {
  // ∫_1^inf z^{-2} dz = 1
  LevyMeasure m = LevyMeasure::power_law(1.0, -2.0);
  Integral one = levy_integral(m, [](double) { return 1.0; }, {1.0, kPosInf});
  CHECK(one.value == Approx(1.0).epsilon(1e-8));

  // ∫ (z ^ z^2) z^{-2.5} dz = ∫_0^1 z^{-0.5} + ∫_1^inf z^{-1.5} = 2 + 2
  LevyMeasure stable = LevyMeasure::power_law(1.0, -2.5);
  Integral zz =
      levy_integral(stable, [](double z) { return std::min(z, z * z); }, Interval::positive());
  CHECK(zz.value == Approx(4.0).epsilon(1e-8));

  // small-jump divergence is classified as +inf
  LevyMeasure bad = LevyMeasure::power_law(1.0, -3.2);
  Integral diverged =
      levy_integral(bad, [](double z) { return std::min(z, z * z); }, Interval::positive());
  CHECK(std::isinf(diverged.value));
}

TEST_CASE("tempered power law integrates against the exponential factor") {
  // ∫_0^inf z e^{-z} z^{-0.5} dz = Gamma(1.5)
  LevyMeasure t = LevyMeasure::tempered(1.0, -0.5, 1.0);
  Integral g = levy_integral(t, [](double z) { return z; }, Interval::positive());
  CHECK(g.value == Approx(std::tgamma(1.5)).epsilon(1e-8));
}

TEST_CASE("sample_jump draws atoms deterministically and proportionally") {
  RngStream rng(42);
  LevyMeasure single = LevyMeasure::atoms({{2.0, 1.0}});
  for (int i = 0; i < 16; ++i) CHECK(sample_jump(single, {1.0, kPosInf}, rng) == 2.0);

  LevyMeasure pair = LevyMeasure::atoms({{1.0, 1.0}, {3.0, 1.0}});
  JumpSampler sampler(pair, Interval::positive());
  const int n = 100000;
  int ones = 0;
  for (int i = 0; i < n; ++i)
    if (sampler.sample(rng) == 1.0) ++ones;
  // exact Bernoulli(1/2): 3 sigma band
  double sd = std::sqrt(0.25 * n);
  CHECK(std::abs(ones - 0.5 * n) <= 3.0 * sd);
}

TEST_CASE("power-law sampler matches the inverse CDF law") {
  // density z^{-2} on (1, inf): F(z) = 1 - 1/z
  LevyMeasure m = LevyMeasure::power_law(1.0, -2.0);
  JumpSampler sampler(m, {1.0, kPosInf});
  RngStream rng(7);
  const int n = 100000;
  std::vector<double> draws(n);
  for (int i = 0; i < n; ++i) draws[i] = sampler.sample(rng);
  std::sort(draws.begin(), draws.end());
  double ks = 0.0;
  for (int i = 0; i < n; ++i) {
    double f = 1.0 - 1.0 / draws[i];
    ks = std::max(ks, std::abs(f - (i + 0.5) / n));
  }
  CHECK(ks < 2.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("tempered sampler empirical mean matches the quadrature moment") {
  LevyMeasure t = LevyMeasure::tempered(2.0, -1.5, 3.0);
  Interval domain{0.05, kPosInf};
  JumpSampler sampler(t, domain);
  double mass = sampler.total_mass();
  double mean = measure_mean(t, domain) / mass;
  RngStream rng(99);
  const int n = 200000;
  double acc = 0.0, acc2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double z = sampler.sample(rng);
    acc += z;
    acc2 += z * z;
  }
  double emp = acc / n;
  double sd = std::sqrt((acc2 / n - emp * emp) / n);
  CHECK(std::abs(emp - mean) <= 4.0 * sd);
}

TEST_CASE("zero-mass domains are refused") {
  LevyMeasure m = LevyMeasure::atoms({{0.5, 1.0}});
  RngStream rng(1);
  CHECK_THROWS_AS(sample_jump(m, {1.0, 2.0}, rng), MeasureError);
  CHECK_THROWS_AS(sample_jump(LevyMeasure::zero(), Interval::positive(), rng), MeasureError);
}
