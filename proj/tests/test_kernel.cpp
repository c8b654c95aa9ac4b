#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "oracles.hpp"

#include "hkb/errors.hpp"
#include "hkb/kernel.hpp"

using namespace hkb;

namespace {

const DiscretizedGenerator& ou_gen() {
  static const auto g = build_generator(Potential(Quadratic{1.0}), 400, 6.0);
  return g;
}
const KernelSpectrum& ou_spec() {
  static const KernelSpectrum s(ou_gen());
  return s;
}

double max_mehler_error(const KernelSpectrum& spec, double t, double kappa, double radius, double floor_frac) {
  const auto p = spec.heat_kernel(t);
  const auto& x = spec.grid().x;
  double pmax = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j)
      if (std::abs(x[i]) <= radius && std::abs(x[j]) <= radius) pmax = std::max(pmax, oracle::mehler(x[i], x[j], t, kappa));
  double err = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (std::abs(x[i]) > radius || std::abs(x[j]) > radius) continue;
      const double m = oracle::mehler(x[i], x[j], t, kappa);
      if (m < floor_frac * pmax) continue;
      err = std::max(err, std::abs(p(i, j) - m) / m);
    }
  return err;
}

}  // namespace

TEST_CASE("generator: zero-flux, mu-symmetric, OU gap") {
  const auto& g = ou_gen();
  std::vector<double> one(g.size(), 1.0);
  for (double v : g.apply(one)) CHECK(v == 0.0);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  std::vector<double> f(g.size()), h(g.size());
  for (auto& v : f) v = n(rng);
  for (auto& v : h) v = n(rng);
  const double lhs = g.inner(g.apply(f), h), rhs = g.inner(f, g.apply(h));
  CHECK(std::abs(lhs - rhs) <= 1e-12 * (std::abs(lhs) + std::abs(rhs)));
  CHECK(g.inner(g.apply(f), f) == doctest::Approx(-g.dirichlet(f, f)));

  double mass = 0.0;
  for (double m : g.mass) mass += m;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(ou_spec().lambda(1) == doctest::Approx(1.0).epsilon(0.01));
  CHECK(ou_spec().lambda(2) == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("OU kernel matches Mehler") {
  CHECK(max_mehler_error(ou_spec(), 0.5, 1.0, 3.0, 0.0) <= 0.02);
  CHECK(max_mehler_error(ou_spec(), 1.0, 1.0, 3.0, 0.0) <= 0.02);
  CHECK(max_mehler_error(ou_spec(), 0.1, 1.0, 3.0, 1e-8) <= 0.02);
}

TEST_CASE("Mehler with kappa = 2") {
  const auto g = build_generator(Potential(Quadratic{2.0}), 400, 4.5);
  const KernelSpectrum s(g);
  CHECK(s.lambda(1) == doctest::Approx(2.0).epsilon(0.01));
  CHECK(max_mehler_error(s, 0.25, 2.0, 2.0, 0.0) <= 0.02);
}

TEST_CASE("ergodic limit") {
  const auto p = ou_spec().heat_kernel(50.0);
  const auto& x = ou_spec().grid().x;
  double dev = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j)
      if (std::abs(x[i]) <= 3.0 && std::abs(x[j]) <= 3.0) dev = std::max(dev, std::abs(p(i, j) - 1.0));
  CHECK(dev <= 1e-8);
}

TEST_CASE("invariant suite") {
  const auto r = check_invariants(ou_gen(), ou_spec());
  CHECK(r.kernel_symmetric);
  CHECK(r.row_stochasticity <= 1e-8);
  CHECK(r.chapman_kolmogorov <= 1e-8);
  CHECK(std::abs(r.lambda0) <= 1e-10);
  CHECK(r.orthonormality <= 1e-10);
  CHECK(r.mu_symmetry <= 1e-12);
  CHECK(r.pass);
}

TEST_CASE("semigroup and rows are consistent with the table") {
  const auto& s = ou_spec();
  const double t = 0.4;
  const auto p = s.heat_kernel(t);
  const auto d = s.heat_kernel_diagonal(t);
  const auto row = s.heat_kernel_row(s.grid()[150], t);
  for (std::size_t j = 0; j < s.size(); j += 37) {
    CHECK(d[j] == doctest::Approx(p(j, j)).epsilon(1e-12));
    CHECK(row[j] == doctest::Approx(p(150, j)).epsilon(1e-10));
  }
  std::vector<double> one(s.size(), 1.0);
  for (double v : s.apply_semigroup(one, t)) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
  const auto dev = s.deviation_kernel(t);
  CHECK(dev(10, 200) == doctest::Approx(p(10, 200) - 1.0).epsilon(1e-9));
  CHECK_THROWS_AS(s.heat_kernel(0.0), InputError);
}

TEST_CASE("serial and OpenMP kernel tables are identical") {
  const auto& s = ou_spec();
  for (double t : {0.05, 1.0}) {
    const auto a = s.heat_kernel(t, Exec::serial);
    const auto b = s.heat_kernel(t, Exec::parallel);
    CHECK(a.data == b.data);
    CHECK(s.heat_kernel_diagonal(t, Exec::serial) == s.heat_kernel_diagonal(t, Exec::parallel));
    CHECK(s.deviation_kernel(t, Exec::serial).data == s.deviation_kernel(t, Exec::parallel).data);
  }
  const auto pairs = pair_grid(s.grid(), 3.0, 3);
  std::vector<double> a(pairs.size()), b(pairs.size());
  kernels::serial::heat_kernel_pairs(s.view(), 0.2, 0, pairs, a);
  kernels::omp::heat_kernel_pairs(s.view(), 0.2, 0, pairs, b);
  CHECK(a == b);
}

TEST_CASE("truncation and input errors") {
  CHECK_THROWS_AS(build_generator(Potential(Quadratic{1.0}), 400, 3.0), TruncationError);
  GeneratorOptions loose;
  loose.truncation_tol = 0.01;
  CHECK_NOTHROW(build_generator(Potential(Quadratic{1.0}), 400, 3.0, loose));
  CHECK_THROWS_AS(build_generator(Potential(Quadratic{1.0}), 2, 6.0), InputError);
  CHECK_THROWS_AS(build_generator(Potential(Quadratic{1.0}, 2), 100, 6.0), InputError);
  const auto bad = [](double) { return -1.0; };
  CHECK_THROWS_AS(build_weighted_generator(Potential(Quadratic{1.0}), bad, 100, 6.0), EvaluationError);
}

TEST_CASE("on-diagonal slope") {
  const auto t = logspace(0.05, 0.5, 10);
  const auto r = verify_ondiag(ou_spec(), Weight(ou_gen().potential, 0.0), 0.5, t);
  CHECK(r.slope <= 0.8);
  CHECK(r.pass);

  // beta = 2, alpha = 3: p = (4 + 2)/4 = 1.5.
  const auto g = build_generator(Potential(PowerExponential{3.0}), 400, 2.8);
  const KernelSpectrum s(g);
  const auto r2 = verify_ondiag(s, Weight(g.potential, 2.0), 1.5, t);
  CHECK(r2.slope <= 1.8);
  CHECK(r2.pass);
}

TEST_CASE("off-diagonal envelope") {
  const auto& s = ou_spec();
  const Weight w(ou_gen().potential, 0.0);
  const auto t = logspace(0.02, 1.0, 12);
  const auto pairs = pair_grid(s.grid(), 3.0, 4);
  const auto r = verify_offdiag(s, w, 0.5, 0.5, t, pairs);
  CHECK(std::isfinite(r.sup_overall));
  CHECK(r.pass);
  CHECK(r.sup_small_decade <= 3.0 * r.sup_rest);

  // The envelope grows with epsilon, so every ratio shrinks.
  const auto r1 = verify_offdiag(s, w, 0.5, 1.0, t, pairs);
  for (std::size_t k = 0; k < t.size(); ++k) CHECK(r1.sup_ratio[k] <= r.sup_ratio[k]);

  // On the diagonal the Gaussian factor is one, which is the on-diagonal quantity times t^p.
  std::vector<kernels::NodePair> diag;
  for (std::size_t i = 0; i < s.size(); ++i) diag.push_back({i, i});
  const auto rd = verify_offdiag(s, w, 0.5, 0.5, t, diag);
  const auto od = verify_ondiag(s, w, 0.5, t);
  for (std::size_t k = 0; k < t.size(); ++k)
    CHECK(rd.sup_ratio[k] == doctest::Approx(od.sup_ratio[k] * std::pow(t[k], 0.5)).epsilon(1e-9));

  CHECK_THROWS_AS(verify_offdiag(s, w, 0.5, -0.1, t, pairs), ParameterError);
  CHECK_THROWS_AS(verify_offdiag(s, w, 0.5, 0.0, t, pairs), ParameterError);
  OffdiagOptions zero;
  zero.allow_zero_epsilon = true;
  CHECK_NOTHROW(verify_offdiag(s, w, 0.5, 0.0, t, pairs, zero));
}

TEST_CASE("long-time decay at the spectral gap") {
  const auto r = verify_longtime(ou_spec(), Weight(ou_gen().potential, 0.0), linspace(1.0, 10.0, 10));
  CHECK(r.decay_rate >= 0.9 * r.lambda1);
  CHECK(r.pass);
  // |p_t − 1| changes sign at small t but the report is in absolute value.
  for (double v : r.sup_deviation) CHECK(v >= 0.0);
}

TEST_CASE("weighted Poincare") {
  const auto one = [](double) { return 1.0; };
  const auto four = [](double) { return 4.0; };
  const Potential q(Quadratic{1.0});
  const auto a = poincare_gap(q, one, 400, 6.0);
  CHECK(a.lambda1 == doctest::Approx(1.0).epsilon(0.01));
  CHECK(poincare_gap(q, four, 400, 6.0).lambda1 == doctest::Approx(4.0 * a.lambda1).epsilon(1e-10));

  GeneratorOptions o;
  o.truncation_tol = 0.02;
  const auto w = [](double x) { return 1.0 + x * x; };
  const Potential gc(GeneralizedCauchy{1.0, 1});
  const auto c1 = poincare_gap(gc, w, 400, 40.0, o);
  const auto c2 = poincare_gap(gc, w, 800, 40.0, o);
  CHECK(c1.lambda1 > 0.0);
  CHECK(std::abs(c2.lambda1 - c1.lambda1) <= 0.1 * c1.lambda1);
}

TEST_CASE("twist function") {
  const TwistFunction psi{2.0, 2.0};
  const auto v = [&](double x) { return psi.value(x); };
  const auto d = [&](double x) { return psi.d1(x); };
  for (double x : {-5.0, -3.3, -1.0, 0.5, 2.5, 3.9, 4.5}) {
    CHECK(psi.d1(x) == doctest::Approx(oracle::central_diff(v, x)).epsilon(1e-7));
    CHECK(psi.d2(x) == doctest::Approx(oracle::central_diff(d, x)).epsilon(1e-6));
    CHECK(std::abs(psi.d1(x)) <= 1.0);
    CHECK(std::abs(psi.d2(x)) <= psi.rho() + 1e-12);
    CHECK(psi.value(-x) == -psi.value(x));
  }
  CHECK(psi.value(1.5) == 1.5);
  CHECK(psi.value(7.0) == doctest::Approx(psi.sup_abs()));
  CHECK(psi.rho() == doctest::Approx(8.0 / (3.0 * std::sqrt(3.0) * 2.0)));
}

TEST_CASE("Davies twist on OU") {
  const std::vector<double> a{0.0, 0.5, 1.0, 2.0};
  const auto t = logspace(0.005, 0.5, 12);
  const auto r = davies_twist_check(ou_spec(), ou_gen(), Weight(ou_gen().potential, 0.0), a, TwistFunction{}, t, 0.5);
  CHECK(r.k_fit.c2 >= 0.5);
  CHECK(r.k_fit.c2 <= 1.2);
  CHECK(r.y_slope[0] <= 0.8);
  CHECK(r.pass);
  CHECK_THROWS_AS(davies_twist_check(ou_spec(), ou_gen(), Weight(ou_gen().potential, 0.0),
                                     std::vector<double>{0, 1, 300}, TwistFunction{}, t, 0.5),
                  TwistError);
}
