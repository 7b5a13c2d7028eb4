#include <cmath>
#include <random>

#include "doctest.h"
#include "gevrey/error.hpp"
#include "gevrey/regularity_constants.hpp"

using namespace gevrey;

namespace {

ConstantInputs fixture() {
  ConstantInputs in;
  in.a_bar = 2;
  in.b_bar = 1;
  in.f_bar = 1;
  in.m = 3;
  in.mode = AssumptionMode::positive_b();
  in.c_m = 1;
  return in;
}

}  // namespace

TEST_CASE("admissibility table") {
  CHECK(admissible(2, 3));
  CHECK(admissible(1, 40));
  CHECK(admissible(3, 5));
  CHECK_FALSE(admissible(3, 6));
  CHECK(admissible(4, 3));
  CHECK_FALSE(admissible(4, 4));
  CHECK(admissible(6, 2));
  CHECK_FALSE(admissible(5, 3));
  CHECK(admissible(7, 1));
  CHECK_FALSE(admissible(7, 2));
}

TEST_CASE("hand-derived constant chain") {
  const auto b = theory_constants(fixture());
  CHECK(b.c_A == 1);
  CHECK(b.u_bar == 1);
  CHECK(b.c_u == 4);
  CHECK(b.rho == 584);
  CHECK(b.rho >= 2);
  CHECK(b.rho_tilde == std::max(8.0, 584.0));
}

TEST_CASE("general-b branch") {
  ConstantInputs in = fixture();
  in.mode = AssumptionMode::general_b();
  in.m = 1;
  in.f_bar = 1;
  in.b_bar = 1;  // gamma = 1 * 1 * 1 / 2
  const auto b = theory_constants(in);
  CHECK(b.gamma == 0.5);
  CHECK(b.u_bar == 2);
  CHECK(b.c_A == 0.5);

  in.m = 3;
  in.f_bar = 2;
  in.b_bar = 1.0 / 12;  // gamma = 3 * 4 / 24
  const auto c = theory_constants(in);
  CHECK(c.gamma == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(c.u_bar == 2);

  in.b_bar = 1;
  CHECK_THROWS_AS(theory_constants(in), ValidationError);
  in = fixture();
  in.m = 2;
  CHECK_THROWS_AS(theory_constants(in), ValidationError);  // positive-b needs odd m
  in = fixture();
  in.d = 3;
  in.m = 6;
  CHECK_THROWS_AS(theory_constants(in), ValidationError);
}

TEST_CASE("constant chain invariants on random inputs") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(0.1, 5);
  for (int t = 0; t < 100; ++t) {
    ConstantInputs in;
    in.a_bar = 2 + u(rng);
    in.b_bar = u(rng);
    in.f_bar = u(rng);
    in.m = 1 + 2 * static_cast<int>(rng() % 3);
    in.mode = AssumptionMode::positive_b();
    in.c_m = u(rng) / 5;
    const auto b = theory_constants(in);
    CHECK(b.rho >= 2);
    CHECK(b.rho_tilde >= std::max(4 * in.a_bar, b.rho));
    CHECK(b.c_A > 0);
    CHECK(b.c_A <= 1);
    CHECK(std::isfinite(b.c_delta));
  }
}

TEST_CASE("embedding constants") {
  CHECK(embedding_constant(2) == doctest::Approx(1 / (std::sqrt(2.0) * M_PI)).epsilon(1e-15));
  CHECK(embedding_constant(4, EmbeddingMethod::override_value(1.0)) == 1.0);
  const double c4 = embedding_constant(4);
  CHECK(c4 == doctest::Approx(std::sqrt(std::sqrt(2.0) / 2 / (std::sqrt(2.0) * M_PI))).epsilon(1e-14));
  CHECK(embedding_constant(3) < c4);
  CHECK(embedding_constant(6) > c4);
  CHECK_THROWS_AS(embedding_constant(1), ValidationError);
}

TEST_CASE("discrete Rayleigh maximisation") {
  const double target = 1 / (std::sqrt(2.0) * M_PI);
  const double c32 = rayleigh_quotient_max(2, 32, 2000);
  const double c64 = rayleigh_quotient_max(2, 64, 2000);
  CHECK(std::abs(c32 - target) / target < 0.03);
  CHECK(std::abs(c64 - target) / target < 0.03);
  // the p = 4 quotient lies below its certified chain bound and is mesh-stable
  const double r64 = rayleigh_quotient_max(4, 64, 2000);
  const double r128 = rayleigh_quotient_max(4, 128, 2000);
  CHECK(r64 > 0);
  CHECK(r64 < 1);
  CHECK(std::abs(r64 - r128) / r128 < 0.02);
  CHECK(r64 <= embedding_constant(4));
  CHECK(embedding_constant(4, EmbeddingMethod::rayleigh(64)) == doctest::Approx(1.05 * r64));
}

TEST_CASE("envelope bounds") {
  GevreyEnvelope env{2.0, 1.0, RadiiRule::sequence({1.0}), "test"};
  CHECK(envelope_bound(env, MultiIndex(), EnvelopeForm::Assumption) == 1.0);
  CHECK(envelope_bound(env, MultiIndex::parse("(3)"), EnvelopeForm::Halved) == doctest::Approx(0.75).epsilon(1e-15));
  GevreyEnvelope env2{3.0, 1.5, RadiiRule::power_law(0.5, 5), "test"};
  CHECK(envelope_bound(env2, MultiIndex::unit(2), EnvelopeForm::Halved) ==
        doctest::Approx(3.0 / (2 * 0.5 * 32)).epsilon(1e-14));
  GevreyEnvelope flat{3.0, 1.0, RadiiRule::infinite(), "y-independent"};
  CHECK(envelope_bound(flat, MultiIndex::unit(1), EnvelopeForm::Halved) == 0);

  // halved(nu) = assumption(nu) * 2^|nu| [1/2]_|nu| / |nu|! * 2 and the
  // factor 2^n [1/2]_n / n! is at least 1/2
  std::mt19937 rng(5);
  for (int n = 0; n <= 20; ++n) {
    BigInt pow2 = 1;
    for (int i = 0; i < n; ++i) pow2 *= 2;
    const Rational ratio = Rational(pow2) * half_falling_factorial(n) / Rational(factorial(n));
    CHECK(ratio >= Rational(1, 2));
    MultiIndex nu;
    int left = n;
    while (left > 0) {
      const int d = 1 + static_cast<int>(rng() % 4);
      nu.set(d, nu[d] + 1);
      --left;
    }
    GevreyEnvelope e{1.7, 1.3, RadiiRule::sequence({0.9, 1.3, 2.0, 0.6}), "test"};
    const double a = envelope_bound(e, nu, EnvelopeForm::Assumption);
    const double h = envelope_bound(e, nu, EnvelopeForm::Halved);
    CHECK(h == doctest::Approx(a * 2 * ratio.get_d()).epsilon(1e-12));
    CHECK(h >= a);
  }
  // log-space branch continues the direct branch smoothly
  GevreyEnvelope e{1.0, 1.2, RadiiRule::constant(3.0), "test"};
  const double b20 = envelope_bound(e, MultiIndex::from_dense({20}), EnvelopeForm::Halved);
  const double b21 = envelope_bound(e, MultiIndex::from_dense({21}), EnvelopeForm::Halved);
  const double expected = b20 * (20.5 - 1.0) * std::pow(21.0, 0.2) / 3.0;  // [1/2]_21 = [1/2]_20 * 39/2
  CHECK(b21 == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("derivative bounds") {
  auto b = theory_constants(fixture());
  const auto radii = RadiiRule::sequence({0.7, 1.5});
  CHECK(derivative_bound(b, radii, MultiIndex::unit(2), 1.0, NormKind::H1) ==
        doctest::Approx(b.c_u / (b.c_m * 1.5)).epsilon(1e-14));
  CHECK(derivative_bound(b, radii, MultiIndex::from_dense({2}), 1.0, NormKind::V) ==
        doctest::Approx(b.c_u * b.rho * 0.25 / 0.49).epsilon(1e-14));
  CHECK(derivative_bound(b, radii, MultiIndex::unit(1), 1.0, NormKind::LaplacianL2) ==
        doctest::Approx(b.c_delta / (b.c_m * b.c_m * 0.7)).epsilon(1e-14));
  CHECK_THROWS_AS(derivative_bound(b, radii, MultiIndex(), 1.0, NormKind::V), ValidationError);
  CHECK(derivative_bound(b, radii, MultiIndex(), 1.0, NormKind::H2) > 0);
  CHECK(power_derivative_bound(b, radii, MultiIndex::unit(1), 1.0, 1) ==
        doctest::Approx(derivative_bound(b, radii, MultiIndex::unit(1), 1.0, NormKind::V)));

  // monotone in |nu| for radii <= 1
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (int t = 0; t < 100; ++t) {
    ConstantInputs in = fixture();
    in.a_bar = 2 + 3 * u(rng);
    in.b_bar = u(rng);
    in.f_bar = u(rng);
    const auto bb = theory_constants(in);
    const auto r = RadiiRule::sequence({u(rng), u(rng), u(rng)});
    const double delta = 1 + u(rng);
    MultiIndex nu = MultiIndex::unit(1 + static_cast<int>(rng() % 3));
    for (auto kind : {NormKind::V, NormKind::H1, NormKind::LaplacianL2, NormKind::H2}) {
      MultiIndex cur = nu;
      double prev = derivative_bound(bb, r, cur, delta, kind);
      for (int step = 0; step < 5; ++step) {
        cur = cur + MultiIndex::unit(1 + static_cast<int>(rng() % 3));
        const double next = derivative_bound(bb, r, cur, delta, kind);
        CHECK(next >= prev);
        prev = next;
      }
    }
  }
}
