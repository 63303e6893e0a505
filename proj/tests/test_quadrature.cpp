#include <catch_amalgamated.hpp>

#include <cmath>

#include "ergolab/quadrature.hpp"

using namespace ergolab;
using Catch::Approx;

TEST_CASE("finite-interval adaptive rule matches antiderivatives") {
  Integral smooth = integrate([](double x) { return std::exp(-x); }, 0.0, 3.0);
  CHECK(smooth.value == Approx(1.0 - std::exp(-3.0)).margin(1e-10));

  QuadratureOptions tight;
  tight.abs_tol = 1e-13;
  tight.rel_tol = 1e-12;
  Integral sharp = integrate([](double x) { return std::exp(-x); }, 0.0, 3.0, tight);
  CHECK(sharp.value == Approx(1.0 - std::exp(-3.0)).epsilon(1e-12));

  Integral poly = integrate([](double x) { return x * x * x - 2.0 * x; }, -1.0, 2.0);
  CHECK(poly.value == Approx(0.75).margin(1e-12));

  Integral empty = integrate([](double) { return 1.0; }, 2.0, 2.0);
  CHECK(empty.value == 0.0);
}

TEST_CASE("dyadic descent handles integrable singularities at zero") {
  // ∫_0^1 x^{-1/2} dx = 2
  Integral root = integrate_to_zero([](double x) { return 1.0 / std::sqrt(x); }, 1.0);
  CHECK(root.value == Approx(2.0).margin(5e-10));

  // ∫_0^1 log(x) dx = -1
  Integral lg = integrate_to_zero([](double x) { return std::log(x); }, 1.0);
  CHECK(lg.value == Approx(-1.0).margin(5e-10));
}

TEST_CASE("dyadic descent classifies divergence at zero") {
  Integral harmonic = integrate_to_zero([](double x) { return 1.0 / x; }, 1.0);
  CHECK(std::isinf(harmonic.value));
  CHECK(harmonic.value > 0.0);

  Integral quad = integrate_to_zero([](double x) { return -1.0 / (x * x); }, 1.0);
  CHECK(std::isinf(quad.value));
  CHECK(quad.value < 0.0);
}

TEST_CASE("tail integration converges and classifies divergence") {
  // ∫_1^inf x^{-2} dx = 1
  Integral inv2 = integrate_to_infinity([](double x) { return 1.0 / (x * x); }, 1.0);
  CHECK(inv2.value == Approx(1.0).epsilon(1e-9));

  // ∫_2^inf e^{-x} dx
  Integral expo = integrate_to_infinity([](double x) { return std::exp(-x); }, 2.0);
  CHECK(expo.value == Approx(std::exp(-2.0)).epsilon(1e-9));

  Integral harmonic = integrate_to_infinity([](double x) { return 1.0 / x; }, 1.0);
  CHECK(std::isinf(harmonic.value));
}

TEST_CASE("NaN integrands are reported, not summed") {
  CHECK_THROWS_AS(integrate([](double) { return std::nan(""); }, 0.0, 1.0), QuadratureError);
}
