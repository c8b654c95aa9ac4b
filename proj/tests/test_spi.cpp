#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "oracles.hpp"

#include "hkb/errors.hpp"
#include "hkb/spi.hpp"

using namespace hkb;

TEST_CASE("exponent p: d/2 whenever delta = alpha - 1, gamma = beta = 0") {
  for (double alpha : {1.5, 2.0, 3.0, 5.0})
    for (int d : {1, 2, 3}) CHECK(exponent_p(alpha, 0.0, alpha - 1.0, 0.0, d, false) == 0.5 * d);
  CHECK(exponent_p(2.0, 0.0, 1.0, 0.0, 1, false) == 0.5);
  CHECK(exponent_p(3.0, 0.0, 2.0, 0.0, 1, false) == 0.5);
  // beta = 2, alpha = 3: (2·2 + 1·2) / (2·2).
  CHECK(exponent_p(3.0, 0.0, 2.0, 2.0, 1, false) == 1.5);
}

TEST_CASE("exponent p: Cauchy case gamma beta + d (1 v delta gamma) / 2") {
  CHECK(exponent_p(3.0, 1.0, 0.0, 1.0, 2, true) == 2.0);
  CHECK(exponent_p(1.0, 8.0, 0.01, 1.0, 1, true) == 8.5);
  CHECK(exponent_p(1.0, 3.0, 1.0, 0.5, 3, true) == 6.0);
  CHECK_THROWS_AS(exponent_p(1.0, 2.0, 0.0, 1.0, 1, true), ParameterError);
  CHECK_THROWS_AS(exponent_p(1.0, 3.0, 0.0, 0.0, 1, true), ParameterError);
}

TEST_CASE("exponent p rejects gamma <= 1 - alpha") {
  try {
    exponent_p(0.5, 0.0, 1.0, 0.0, 1, false);
    FAIL("no throw");
  } catch (const ParameterError& e) {
    CHECK(std::string(e.what()).find("gamma > 1 - alpha") != std::string::npos);
  }
  CHECK_THROWS_AS(exponent_p(2.0, -0.5, 1.0, 0.0, 1, false), ParameterError);
}

TEST_CASE("profile pieces") {
  SPIProfile p;
  p.c_rate = 1.0;
  p.rate_exponent = 2.0;
  CHECK(p.psi_of(4.0) == doctest::Approx(2.0));

  // alpha = 3 power-exponential: φ exponent 4, so ψ(r) ∝ r^{1/4}.
  const Potential pot(PowerExponential{3.0});
  DriftHypothesis h{1.0, 3.0, 2.0};
  h.c = check_drift_hypothesis(pot, h, Grid1D::symmetric(10.0, 2001)).smallest_c * (1 + 1e-9);
  const auto spec = suggest_exp_lyapunov(h, 0.0);
  const auto cert = certify(pot, spec, Grid1D::symmetric(10.0, 2001));
  REQUIRE(cert.admissible);
  const Weight w(pot, 0.0);
  auto prof = profile_from_certificate(pot, cert, spec, w, 0.5);
  CHECK(prof.psi_of(16.0 * 3.0) / prof.psi_of(3.0) == doctest::Approx(2.0));
  for (double g : prof.g) CHECK(g == doctest::Approx(1.0));
  CHECK(prof.s0 > 0);
  calibrate(prof, 0.01, 7.0);
  CHECK(prof.b(0.01) == doctest::Approx(1.05 * 7.0));

  LyapunovCertificate bad = cert;
  bad.admissible = false;
  CHECK_THROWS_AS(profile_from_certificate(pot, bad, spec, w, 0.5), CertificateError);
}

TEST_CASE("Lebesgue-ball inequality") {
  const std::vector<TestFunction> one{{[](double) { return 1.0; }, [](double) { return 0.0; }}};
  CHECK(local_ball_spi_check(1.0, 1.0, 401, one).worst_ratio == doctest::Approx(0.5).epsilon(1e-6));
  const std::vector<TestFunction> lin{{[](double x) { return x; }, [](double) { return 1.0; }}};
  CHECK(local_ball_spi_check(1.0, 1.0, 401, lin).worst_ratio < 0.0);

  // g_r(x) = g(x/r) on [-r, r]: ratio(r, u) = ratio(1, u/r²) / r.
  const auto bump = [](double s) {
    return std::vector<TestFunction>{{[s](double x) { return std::cos(0.5 * std::numbers::pi * x / s); },
                                      [s](double x) {
                                        return -0.5 * std::numbers::pi / s * std::sin(0.5 * std::numbers::pi * x / s);
                                      }}};
  };
  const double r1 = local_ball_spi_check(1.0, 0.1, 801, bump(1.0)).worst_ratio;
  const double r2 = local_ball_spi_check(2.0, 0.4, 801, bump(2.0)).worst_ratio;
  CHECK(r2 == doctest::Approx(r1 / 2.0).epsilon(0.01));
}

namespace {
SpiForms ou_forms(std::size_t n) {
  const Potential q(Quadratic{1.0});
  const auto gen = build_generator(q, n, 6.0);
  return make_spi_forms(gen, Weight(gen.potential, 0.0));
}
}  // namespace

TEST_CASE("weighted simplex projection") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0), pos(0.1, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> y(30), v(30), f(30);
    for (auto& e : y) e = u(rng);
    for (auto& e : v) e = pos(rng);
    project_weighted_simplex(y, v, f);
    double vf = 0.0, dist = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      CHECK(f[i] >= 0.0);
      vf += v[i] * f[i];
      dist += (f[i] - y[i]) * (f[i] - y[i]);
    }
    CHECK(vf == doctest::Approx(1.0));
    // No feasible point along a random direction is closer.
    for (int k = 0; k < 20; ++k) {
      std::vector<double> g(30);
      double vg = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] = std::max(0.0, f[i] + 0.05 * u(rng));
        vg += v[i] * g[i];
      }
      double d2 = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) d2 += (g[i] / vg - y[i]) * (g[i] / vg - y[i]);
      CHECK(d2 >= dist - 1e-12);
    }
  }
}

TEST_CASE("b*(s) agrees with exhaustive enumeration of supports") {
  const auto forms = ou_forms(200);
  for (double s : {1e-3, 1e-2, 1e-1, 1.0}) {
    const double exact = oracle::best_b_by_intervals(forms.mass, forms.conductance, forms.v, s);
    const auto got = empirical_best_b(s, forms);
    CHECK(got.value == doctest::Approx(exact).epsilon(1e-3));
    CHECK(got.value <= exact * (1 + 1e-9));
  }
}

TEST_CASE("b*(s): constant lower bound, monotone curve, serial equals parallel") {
  const auto forms = ou_forms(200);
  double vmass = 0.0;
  for (double v : forms.v) vmass += v;
  const auto s = logspace(1e-3, 1.0, 7);
  const auto curve = empirical_best_b_curve(s, forms, {}, Exec::parallel);
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(curve.b[i] >= 1.0 / (vmass * vmass) * (1 - 1e-12));
    if (i > 0) CHECK(curve.b[i] <= curve.b[i - 1]);
  }
  const auto serial = empirical_best_b_curve(s, forms, {}, Exec::serial);
  CHECK(serial.b == curve.b);
  CHECK(empirical_best_b(2e-2, forms).value <= empirical_best_b(1e-2, forms).value * (1 + 1e-9));
  CHECK_THROWS_AS(empirical_best_b(0.1, ou_forms(150)), InputError);
}

TEST_CASE("Nash rates") {
  const NashProfile sq{1.0, 2.0, {}};
  for (double t : {0.1, 1.0, 7.0}) {
    CHECK(sq.n(t) == doctest::Approx(1.0 / t));
    CHECK(nash_rate(sq, t) == doctest::Approx(1.0 / t));
  }
  for (int d : {1, 2, 3}) {
    const auto p = NashProfile::classical(0.7, d);
    for (double t : logspace(1e-3, 10.0, 9)) {
      CHECK(nash_rate(p, t) == doctest::Approx(std::pow(d / (2.0 * 0.7 * t), 0.5 * d)).epsilon(1e-10));
      CHECK(std::abs(p.n(p.n_inverse(t)) - t) <= 1e-6 * t);
    }
  }
  NashProfile custom{0.0, 0.0, [](double x) { return 0.7 * std::pow(x, 3.0); }};
  const auto classical = NashProfile::classical(0.7, 1);
  for (double t : {0.05, 0.5, 2.0}) CHECK(nash_rate(custom, t) == doctest::Approx(nash_rate(classical, t)).epsilon(1e-6));
  CHECK_THROWS_AS(nash_rate(NashProfile{1.0, 1.0, {}}, 1.0), RateError);
  NashProfile linear{0.0, 0.0, [](double x) { return x; }};
  CHECK_THROWS_AS(nash_rate(linear, 1.0), RateError);
}
