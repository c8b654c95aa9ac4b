#pragma once

// Weighted super-Poincaré profiles b(s), the closed-form bound exponent p,
// the local Lebesgue-ball inequality, Nash-to-rate conversion, and the
// empirical best constant b*(s) from a cone-constrained quadratic program.

#include <cstdint>
#include <functional>
#include <span>
#include <variant>
#include <vector>

#include "json.hpp"

#include "hkb/kernel.hpp"
#include "hkb/lyapunov.hpp"
#include "hkb/potentials.hpp"
#include "hkb/weight.hpp"

namespace hkb {

/// Exponent of s^{-p} in the super-Poincaré profile (and of t^{-p} in the kernel bound).
/// Non-Cauchy: needs alpha + gamma > 1 and gamma >= 0. Cauchy: gamma > 2/alpha, beta > 0.
double exponent_p(double alpha, double gamma, double delta, double beta, int dim, bool cauchy);

/// b(s) = C s^{-p}.
struct PowerProfile {
  double c_spi = 1.0;
  double p = 0.5;
};
/// b(s) = exp(c (1 + s^{-theta})).
struct ExpPowerProfile {
  double c_exp = 1.0;
  double theta = 1.0;
};
using ProfileForm = std::variant<PowerProfile, ExpPowerProfile>;

struct SPIProfile {
  std::vector<double> r;  // log-spaced radii
  std::vector<double> g;  // sup_{|x|<=r} e^U / V^2
  std::vector<double> h;  // sup_{|x|<=r} |U'|^2
  std::vector<double> psi_arg;
  std::vector<double> psi;  // ψ(level) = inf{u >= 0 : inf_{|x|>=u} φ >= level}
  double s0 = 0.0;
  double exponent_p = 0.0;
  int dim = 1;
  double c_rate = 0.0;
  double rate_exponent = 0.0;
  double omega_gamma = 0.0;  // gradient weight 1 ∨ |x|^{2 gamma}
  ProfileForm form = PowerProfile{};
  // Potential and weight used for the closed-form shape.
  std::function<double(double)> g_fn;
  std::function<double(double)> h_fn;

  double b(double s) const;
  /// g(ψ(4/s)) (1/s ∨ h(ψ(4/s)))^{d/2}, the bound with its constant set to one.
  double shape(double s) const;
  double psi_of(double level) const;
};

/// Requires an admissible certificate with a power rate.
SPIProfile profile_from_certificate(const Potential& potential, const LyapunovCertificate& cert,
                                    const LyapunovSpec& spec, const Weight& weight, double p, double gamma = 0.0,
                                    bool exp_power = false, double theta = 1.0);

/// Scales the profile constant so that b(s_ref) = factor · b_star.
void calibrate(SPIProfile& profile, double s_ref, double b_star, double factor = 1.05);

struct TestFunction {
  std::function<double(double)> value;
  std::function<double(double)> derivative;
};

struct BallCheck {
  std::vector<double> ratios;  // NaN for skipped functions
  double worst_ratio = 0.0;
  double c_fit = 0.0;  // worst ratio / (u^{-d/2} + r^{-d})
  std::size_t skipped = 0;
};

/// max over test functions of [∫ g² − u ∫ |g'|²] / (∫ |g|)² on [-r, r] (Lebesgue, d = 1).
BallCheck local_ball_spi_check(double r, double u, std::size_t n, std::span<const TestFunction> tests);

/// Quadrature forms for b*(s): M = diag(m), A_ω from the edge conductances, v = m V.
struct SpiForms {
  std::vector<double> x;
  std::vector<double> mass;
  std::vector<double> conductance;
  std::vector<double> v;

  /// ⟨f, M f⟩ − s ⟨f, A_ω f⟩.
  double objective(std::span<const double> f, double s) const;
  /// (M − s A_ω) f.
  void apply(std::span<const double> f, double s, std::span<double> out) const;
  /// ⟨f, A_ω f⟩.
  double dirichlet(std::span<const double> f) const;
};

SpiForms make_spi_forms(const DiscretizedGenerator& weighted_gen, const Weight& weight);

struct BestBOptions {
  std::size_t restarts = 20;
  std::size_t max_iter = 10000;
  double rel_tol = 1e-8;
  std::uint64_t seed = 0;
};

struct BestBResult {
  double s = 0.0;
  double value = 0.0;
  bool converged = false;
  std::size_t iterations = 0;  // of the best restart
  std::vector<double> argmax;
};

/// Euclidean projection onto {f >= 0, ⟨v, f⟩ = 1}.
void project_weighted_simplex(std::span<const double> y, std::span<const double> v, std::span<double> out);

/// sup over nonnegative f with ⟨v, f⟩ = 1 of ⟨f, M f⟩ − s ⟨f, A_ω f⟩.
BestBResult empirical_best_b(double s, const SpiForms& forms, const BestBOptions& opts = {});

struct BestBCurve {
  std::vector<double> s;
  std::vector<double> b;
  std::vector<bool> converged;
  double slope = 0.0;  // of log b vs log(1/s)
};

/// b* on an s-grid; each maximizer is also scored at every smaller s, which is
/// admissible there, so the returned curve is nonincreasing in s.
BestBCurve empirical_best_b_curve(std::span<const double> s_grid, const SpiForms& forms, const BestBOptions& opts = {},
                                  Exec exec = Exec::parallel);

struct DominationReport {
  std::vector<double> s;
  std::vector<double> b_theory;
  std::vector<double> b_empirical;
  bool dominates = false;
  double worst_ratio = 0.0;  // min over sampled s <= s0 of b_theory / b_empirical
};

DominationReport check_domination(const SPIProfile& profile, const BestBCurve& curve);

/// Φ(x) = c x^q with q > 1 (q = 1 + 2/d for the classical Nash inequality), or a custom
/// increasing convex Φ evaluated numerically.
struct NashProfile {
  double c = 1.0;
  double q = 3.0;
  std::function<double(double)> custom;

  static NashProfile classical(double c, int dim) { return {c, 1.0 + 2.0 / dim, {}}; }
  double phi(double x) const;
  /// n(t) = ∫_t^∞ dx / Φ(x).
  double n(double t) const;
  double n_inverse(double tau) const;
};

/// n^{-1}(t), the ultracontractive rate.
double nash_rate(const NashProfile& profile, double t);

nlohmann::json to_json(const SPIProfile& p);
nlohmann::json to_json(const BestBCurve& c);
nlohmann::json to_json(const DominationReport& d);

}  // namespace hkb
