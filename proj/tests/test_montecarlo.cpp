#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "doctest.h"
#include "oracles.hpp"

#include "hkb/errors.hpp"
#include "hkb/montecarlo.hpp"

using namespace hkb;

namespace {
double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }
double var(const std::vector<double>& v) {
  const double m = mean(v);
  double a = 0.0;
  for (double x : v) a += (x - m) * (x - m);
  return a / (v.size() - 1);
}
}  // namespace

TEST_CASE("OU terminal law") {
  const Potential q(Quadratic{1.0});
  SimConfig c{100000, 1e-3, 1.0, 1.0, 7};
  const auto r = simulate(q, c, 6.0);
  const auto law = oracle::ou_law(1.0, 1.0);
  const double se = std::sqrt(law.var / c.n_paths);
  CHECK(std::abs(mean(r.samples) - law.mean) <= 3 * se);
  CHECK(var(r.samples) == doctest::Approx(law.var).epsilon(0.02));
  CHECK(r.escaped == 0);
}

TEST_CASE("degenerate and flat cases") {
  const Potential q(Quadratic{1.0});
  const auto r0 = simulate(q, {1000, 1e-3, 0.0, 0.3, 1}, 6.0);
  for (double x : r0.samples) CHECK(x == 0.3);

  const Potential flat(CustomPotential{"flat", [](double) { return 0.0; }, [](double) { return 0.0; },
                                       [](double) { return 0.0; }});
  const auto r = simulate(flat, {100000, 1e-2, 0.5, 0.0, 3}, 5.0);
  CHECK(var(r.samples) == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("effective step divides the horizon") {
  const auto r = simulate(Potential(Quadratic{1.0}), {100, 0.3, 1.0, 0.0, 1}, 6.0);
  CHECK(r.steps == 3);
  CHECK(r.dt * r.steps == doctest::Approx(1.0));
}

TEST_CASE("reproducible and identical across execution modes") {
  const Potential p(PowerExponential{3.0});
  const SimConfig c{20000, 1e-3, 0.2, 0.5, 11};
  const auto a = simulate(p, c, 2.8, Exec::serial);
  const auto b = simulate(p, c, 2.8, Exec::parallel);
  const auto d = simulate(p, c, 2.8, Exec::parallel);
  CHECK(a.samples == b.samples);
  CHECK(b.samples == d.samples);
  auto c2 = c;
  c2.seed = 12;
  CHECK(simulate(p, c2, 2.8).samples != a.samples);

  std::vector<double> starts(5000);
  for (std::size_t i = 0; i < starts.size(); ++i) starts[i] = -1.0 + 2.0 * i / starts.size();
  CHECK(simulate_from(p, starts, c, 2.8, Exec::serial).samples == simulate_from(p, starts, c, 2.8).samples);
}

TEST_CASE("escaping paths raise SimError") {
  const Potential repel(CustomPotential{"repel", [](double x) { return -x * x; }, [](double x) { return -2 * x; },
                                        [](double) { return -2.0; }});
  CHECK_THROWS_AS(simulate(repel, {10000, 1e-2, 3.0, 0.0, 1}, 1.0), SimError);
}

TEST_CASE("bandwidth") {
  CHECK_THROWS_AS(silverman_bandwidth(std::vector<double>(100, 2.0)), BandwidthError);
  CHECK_THROWS_AS(silverman_bandwidth(std::vector<double>{1.0}), BandwidthError);
  std::vector<double> s(1000);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<double>(i);
  CHECK(silverman_bandwidth(s) > 0);
}

TEST_CASE("KDE against the spectral row") {
  const Potential q(Quadratic{1.0});
  const auto gen = build_generator(q, 400, 6.0);
  const KernelSpectrum spec(gen);
  const auto r = simulate(q, {100000, 1e-3, 0.5, 1.0, 5}, 6.0);
  const auto cmp = compare_density(r.samples, spec, 0.5, 1.0);
  CHECK(cmp.l1 <= 0.05);
  // The spectral row integrates to one against Lebesgue measure.
  double mass = 0.0;
  for (std::size_t j = 0; j < cmp.x.size(); ++j) mass += spec.grid().weight(j) * cmp.spectral[j];
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));

  const auto eq = simulate(q, {100000, 1e-2, 10.0, 1.0, 6}, 6.0);
  CHECK(compare_density(eq.samples, spec, 10.0, 1.0).l1 <= 0.05);

  const auto serial = compare_density(r.samples, spec, 0.5, 1.0, Exec::serial);
  CHECK(serial.kde == cmp.kde);
  CHECK_THROWS_AS(compare_density(r.samples, spec, 0.5, 7.0), InputError);
}

TEST_CASE("more paths, smaller discrepancy") {
  const Potential q(Quadratic{1.0});
  const KernelSpectrum spec(build_generator(q, 400, 6.0));
  std::vector<double> small, large;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    small.push_back(compare_density(simulate(q, {10000, 1e-2, 0.5, 0.0, seed}, 6.0).samples, spec, 0.5, 0.0).l1);
    large.push_back(compare_density(simulate(q, {40000, 1e-2, 0.5, 0.0, seed}, 6.0).samples, spec, 0.5, 0.0).l1);
  }
  std::sort(small.begin(), small.end());
  std::sort(large.begin(), large.end());
  CHECK(large[2] < small[2]);
}

TEST_CASE("sample files round-trip") {
  const auto dir = std::filesystem::temp_directory_path() / "hkb_samples_test";
  std::filesystem::create_directories(dir);
  const std::vector<double> s{1.5, -2.25, 3e-7, 0.0};
  write_samples_binary(dir / "s.bin", s);
  CHECK(read_samples_binary(dir / "s.bin") == s);
  write_samples_csv(dir / "s.csv", s);
  CHECK(std::filesystem::file_size(dir / "s.csv") > 0);
  CHECK_THROWS_AS(read_samples_binary(dir / "missing.bin"), InputError);
  std::filesystem::remove_all(dir);
}
