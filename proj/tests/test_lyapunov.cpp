#include <cmath>
#include <variant>

#include "doctest.h"
#include "oracles.hpp"

#include "hkb/errors.hpp"
#include "hkb/lyapunov.hpp"

using namespace hkb;

namespace {
LyapunovSpec ou_spec() { return LyapunovSpec(ExpPowerForm{0.125, 2.0}, IdentityXi{}, PowerRate{0.125, 2.0}); }
}  // namespace

TEST_CASE("suggested exponential Lyapunov functions") {
  const auto s = suggest_exp_lyapunov({1.0, 2.0, 1.0}, 0.0);
  const auto& f = std::get<ExpPowerForm>(s.form());
  CHECK(f.a == doctest::Approx(0.125));
  CHECK(f.a < 0.25);
  CHECK(std::holds_alternative<IdentityXi>(s.xi_function()));
  CHECK(s.rate().exponent == doctest::Approx(2.0));

  CHECK(suggest_exp_lyapunov({1.3, 3.0, 2.0}, 0.0).rate().exponent == doctest::Approx(4.0));

  const auto lp = suggest_exp_lyapunov({1.0, 0.5, 1.0}, 0.6);
  CHECK(lp.rate().exponent == doctest::Approx(0.2));
  CHECK(std::holds_alternative<LogPowerXi>(lp.xi_function()));

  CHECK_THROWS_AS(suggest_exp_lyapunov({1.0, 0.5, 1.0}, 0.0), ParameterError);
  CHECK_THROWS_AS(suggest_exp_lyapunov({1.0, 2.0, 1.0}, -0.1), ParameterError);
}

TEST_CASE("OU: LW/W matches the symbolic form outside the smoothing radius") {
  const Potential q(Quadratic{1.0});
  const auto spec = ou_spec();
  for (double x : {1.5, 2.0, 3.0, -4.0, 6.5}) {
    CHECK(generator_on_w(q, spec, x) / spec.eval(x).w == doctest::Approx(oracle::ou_lyapunov_ratio(x)).epsilon(1e-10));
  }
}

TEST_CASE("OU certificate: r0 = 2, b = 1/4") {
  const Potential q(Quadratic{1.0});
  const auto cert = certify(q, ou_spec(), Grid1D::symmetric(10.0, 2001));
  CHECK(cert.admissible);
  CHECK(cert.r0 == doctest::Approx(2.0).epsilon(0.1));
  CHECK(cert.b_const == doctest::Approx(0.25).epsilon(0.2));
  CHECK(cert.margin_min >= 0.0);
}

TEST_CASE("a constant W certifies nothing") {
  const LyapunovSpec flat(CustomForm{[](double) { return 1.0; }, [](double) { return 0.0; }, [](double) { return 0.0; }},
                          IdentityXi{}, PowerRate{0.0, 2.0});
  CHECK_FALSE(certify(Potential(Quadratic{1.0}), flat, Grid1D::symmetric(10.0, 1001)).admissible);
}

TEST_CASE("Cauchy: polynomial W with a b > 2 and a < 2 + alpha") {
  const Potential gc(GeneralizedCauchy{1.0, 1});
  const DriftHypothesis h{1.0, 1.0, 0.01, true};
  const auto spec = suggest_power_lyapunov(h, 2.5, 0.9);
  CHECK(spec.rate().exponent == doctest::Approx(0.25));
  const auto cert = certify(gc, spec, Grid1D::symmetric(40.0, 4001));
  CHECK(cert.admissible);
  CHECK_THROWS_AS(suggest_power_lyapunov(h, 2.0, 0.9), ParameterError);
  CHECK_THROWS_AS(suggest_power_lyapunov(h, 3.5, 0.9), ParameterError);
  CHECK_THROWS_AS(suggest_power_lyapunov(h, 2.5, 1.0), ParameterError);
}

TEST_CASE("W derivatives agree with finite differences, including across the patch") {
  const LyapunovSpec specs[] = {ou_spec(), LyapunovSpec(PurePowerForm{2.5}, PowerTailXi{0.9}, PowerRate{1.0, 0.25}),
                                LyapunovSpec(ExpPowerForm{0.2, 3.0}, LogPowerXi{0.5, 3.0}, PowerRate{1.0, 5.0})};
  for (const auto& s : specs) {
    const auto w = [&](double x) { return s.eval(x).w; };
    const auto dw = [&](double x) { return s.eval(x).dw; };
    for (double x : {-2.3, -0.6, 0.2, 0.99, 1.01, 1.7, 3.2}) {
      CHECK(s.eval(x).w >= 1.0);
      CHECK(s.eval(x).dw == doctest::Approx(oracle::central_diff(w, x)).epsilon(1e-6));
      CHECK(s.eval(x).d2w == doctest::Approx(oracle::central_diff(dw, x)).epsilon(1e-6));
    }
  }
}

TEST_CASE("gradient weight") {
  const auto id = ou_spec();
  for (double x : {0.0, 1.0, 5.0}) CHECK(gradient_weight(id, x) == 1.0);

  // ξ(u) = u / log u for gamma = 1, alpha = 2, so 1/ξ'(e^{a x²}) = (a x²)² / (a x² − 1).
  const double a = 0.125;
  const LyapunovSpec lp(ExpPowerForm{a, 2.0}, LogPowerXi{1.0, 2.0}, PowerRate{1.0, 2.0});
  for (double x : {5.0, 6.0, 8.0, 10.0, 12.0}) {
    const double l = a * x * x;
    CHECK(gradient_weight(lp, x) == doctest::Approx(l * l / (l - 1.0)).epsilon(1e-6));
  }
  CHECK(gradient_weight(lp, 0.0) >= 1.0);
}
