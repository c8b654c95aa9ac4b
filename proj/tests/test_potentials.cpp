#include <cmath>
#include <limits>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"

#include "hkb/errors.hpp"
#include "hkb/potentials.hpp"

using namespace hkb;

TEST_CASE("potential values and derivatives at reference points") {
  const Potential q(Quadratic{1.0});
  CHECK(q.u(2.0) - q.u(0.0) == doctest::Approx(2.0));
  CHECK(q.du(2.0) == doctest::Approx(2.0));
  CHECK(q.eval(2.0).lap == doctest::Approx(1.0));

  const Potential pe(PowerExponential{3.0});
  CHECK(pe.du(0.0) == 0.0);

  const Potential gc(GeneralizedCauchy{1.0, 1});
  CHECK(gc.u(1.0) - gc.u(0.0) == doctest::Approx(std::log(2.0)));
  CHECK(gc.du(1.0) == doctest::Approx(1.0));
}

TEST_CASE("derivatives agree with finite differences") {
  const Potential fams[] = {Potential(Quadratic{2.5}), Potential(PowerExponential{3.0}),
                            Potential(PowerExponential{1.5}), Potential(GeneralizedCauchy{1.0, 1})};
  for (const auto& p : fams) {
    for (double x : {-3.1, -0.7, 0.4, 1.0, 2.9}) {
      const auto u = [&](double y) { return p.u(y); };
      const auto du = [&](double y) { return p.du(y); };
      CHECK(p.du(x) == doctest::Approx(oracle::central_diff(u, x)).epsilon(1e-7));
      CHECK(p.eval(x).lap == doctest::Approx(oracle::central_diff(du, x)).epsilon(1e-7));
    }
  }
}

TEST_CASE("gradient in higher dimension is radial") {
  const Potential p(PowerExponential{2.0}, 3);
  const double x[] = {1.0, -2.0, 0.5};
  const auto pt = p.eval(std::span<const double>(x));
  // U = 1 + |x|^2, so ∇U = 2x and ΔU = 2d.
  CHECK(pt.grad[0] == doctest::Approx(2.0));
  CHECK(pt.grad[1] == doctest::Approx(-4.0));
  CHECK(pt.lap == doctest::Approx(6.0));
}

TEST_CASE("normalization and masses") {
  const Potential q(Quadratic{1.0});
  CHECK(q.total_raw_mass() == doctest::Approx(std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-8));
  const auto n = q.normalized(6.0, 401);
  const auto g = Grid1D::symmetric(6.0, 401);
  double mass = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) mass += g.weight(i) * std::exp(-n.u(g[i]));
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(n.normalization() == doctest::Approx(std::log(q.box_raw_mass(6.0, 401))));
  // U = log(1 + x²) for d = alpha = 1.
  CHECK(Potential(GeneralizedCauchy{1.0, 1}).total_raw_mass() == doctest::Approx(std::numbers::pi).epsilon(1e-8));
}

TEST_CASE("bad potentials are rejected") {
  CHECK_THROWS_AS(Potential(Quadratic{-1.0}), InputError);
  CHECK_THROWS_AS(Potential(PowerExponential{0.0}), InputError);
  CHECK_THROWS_AS(Potential(CustomPotential{"x", nullptr, nullptr, nullptr}), InputError);
  const Potential bad(CustomPotential{"nan", [](double) { return std::nan(""); }, [](double) { return 0.0; },
                                      [](double) { return 0.0; }});
  CHECK_THROWS_AS(bad.eval(1.0), EvaluationError);
  CHECK_THROWS_AS(Potential(Quadratic{1.0}).eval(std::numeric_limits<double>::infinity()), InputError);
}

TEST_CASE("drift hypothesis: quadratic holds with c = 1, alpha = 2") {
  const Potential q(Quadratic{1.0});
  const DriftHypothesis h{1.0, 2.0, 1.0, false, 0.05, 1};
  const auto r = check_drift_hypothesis(q, h, Grid1D::symmetric(10.0, 2001));
  CHECK(r.pass);
  // x·U' − (x²/c − c) = 1 at every point.
  CHECK(r.worst_margin == doctest::Approx(1.0));
  CHECK(r.gradient_bound_pass);
}

TEST_CASE("drift hypothesis: alpha = 3 power-exponential on [-10, 10]") {
  const Potential p(PowerExponential{3.0});
  DriftHypothesis h{1.0, 3.0, 2.0, false, 0.05, 1};
  const auto grid = Grid1D::symmetric(10.0, 2001);
  auto r = check_drift_hypothesis(p, h, grid);
  REQUIRE(std::isfinite(r.smallest_c));
  h.c = r.smallest_c * (1 + 1e-9);
  r = check_drift_hypothesis(p, h, grid);
  CHECK(r.pass);
  CHECK(r.delta_fit == doctest::Approx(2.0).epsilon(0.05));
  h.c = 0.5 * r.smallest_c;
  CHECK_FALSE(check_drift_hypothesis(p, h, grid).pass);
}

TEST_CASE("drift hypothesis: Cauchy mode reaches d + alpha only in the limit") {
  const Potential p(GeneralizedCauchy{1.0, 1});
  DriftHypothesis h{1.0, 1.0, 0.01, true, 0.05, 1};
  const auto r = check_drift_hypothesis(p, h, Grid1D::symmetric(40.0, 4001));
  CHECK(r.pass);
  CHECK(h.liminf_target() == 2.0);
  // ∇U·x = 2x²/(1+x²) crosses 2(1 − 0.05) at x = √19.
  CHECK(r.cauchy_radius == doctest::Approx(std::sqrt(19.0)).epsilon(0.01));
  CHECK(r.edge_value == doctest::Approx(2.0 * 1600.0 / 1601.0));
}

TEST_CASE("drift hypothesis needs a wide enough grid") {
  const Potential q(Quadratic{1.0});
  CHECK_THROWS_AS(check_drift_hypothesis(q, {}, Grid1D::symmetric(4.0, 401)), InputError);
  CHECK_THROWS_AS(check_drift_hypothesis(q, {-1.0}, Grid1D::symmetric(10.0, 401)), ParameterError);
}
