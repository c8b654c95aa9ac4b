#pragma once

// ξ-Lyapunov functions W >= 1 with LW / ξ(W) <= −φ + b 1{|x| <= r0}, their
// construction for the power-exponential and Cauchy-type families, and
// grid certification.

#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "hkb/grid.hpp"
#include "hkb/potentials.hpp"

namespace hkb {

/// W(x) = exp(a |x|^alpha) outside the smoothing radius.
struct ExpPowerForm {
  double a = 0.125;
  double alpha = 2.0;
};

/// W(x) = |x|^a_pow outside the smoothing radius.
struct PurePowerForm {
  double a_pow = 2.5;
};

/// Radial W given by value and first two derivatives in r = |x|.
struct CustomForm {
  std::function<double(double)> w;
  std::function<double(double)> dw;
  std::function<double(double)> d2w;
};

using LyapunovForm = std::variant<ExpPowerForm, PurePowerForm, CustomForm>;

struct IdentityXi {};
/// ξ(u) = u (log u)^{-2 gamma/alpha} for u > e^{4 gamma/alpha}, linear below.
struct LogPowerXi {
  double gamma = 0.0;
  double alpha = 2.0;
};
/// ξ(r) = r^{1 - b_exp}.
struct PowerTailXi {
  double b_exp = 0.0;
};

using XiFunction = std::variant<IdentityXi, LogPowerXi, PowerTailXi>;

/// φ(x) = c_rate |x|^exponent. c_rate <= 0 asks certify() to fit it.
struct PowerRate {
  double c_rate = 0.0;
  double exponent = 2.0;
};

/// Value and derivatives of W in one dimension.
struct LyapunovValue {
  double w = 1.0;
  double dw = 0.0;
  double d2w = 0.0;
};

class LyapunovSpec {
 public:
  LyapunovSpec(LyapunovForm form, XiFunction xi, PowerRate phi, double smoothing_radius = 1.0);

  LyapunovValue eval(double x) const;
  double xi(double u) const;
  double xi_prime(double u) const;
  double phi(double x, double c_rate) const;

  /// Lower end of the closed-form range of ξ; below it ξ is linearly extended.
  double xi_threshold() const;
  /// True when ξ is extended below its closed-form range (LogPower with gamma > 0).
  bool xi_extended() const;

  const LyapunovForm& form() const { return form_; }
  const XiFunction& xi_function() const { return xi_; }
  const PowerRate& rate() const { return phi_; }
  double smoothing_radius() const { return smoothing_radius_; }
  /// Additive shift applied to the patched W to keep W >= 1.
  double shift() const { return shift_; }

  std::string form_name() const;
  std::string xi_name() const;

  LyapunovSpec with_rate(PowerRate phi) const;

 private:
  LyapunovValue outer(double r) const;

  LyapunovForm form_;
  XiFunction xi_;
  PowerRate phi_;
  double smoothing_radius_;
  // Even quartic patch c0 + c2 x^2 + c4 x^4 on |x| <= smoothing radius.
  double c0_ = 0, c2_ = 0, c4_ = 0;
  double shift_ = 0;
};

struct LyapunovCertificate {
  double c_rate = 0.0;
  double exponent = 0.0;
  double b_const = 0.0;
  double r0 = 0.0;
  bool admissible = false;
  // Smallest −LW/ξ(W) − φ over |x| > r0 (>= 0 when admissible).
  double margin_min = 0.0;
  // Tail region |x| >= tail_radius on which the rate is certified.
  double tail_radius = 0.0;
  std::vector<double> grid;
  std::vector<double> margin_profile;  // −LW/ξ(W) − φ at each grid point
  bool xi_extended = false;
  std::string diagnostics;
};

struct CertifyOptions {
  double tail_fraction = 0.5;
  double min_rate = 1e-6;
};

/// W, ξ and φ from the proof for the power-exponential family:
/// a = 1/(4 c alpha), φ exponent 2(alpha + gamma − 1).
LyapunovSpec suggest_exp_lyapunov(const DriftHypothesis& hyp, double gamma);

/// W = |x|^a_pow, ξ(r) = r^{1-b}, φ exponent a b − 2 for Cauchy-type potentials.
LyapunovSpec suggest_power_lyapunov(const DriftHypothesis& hyp, double a_pow, double b_exp);

/// LW = W'' − U' W' in d = 1.
double generator_on_w(const Potential& potential, const LyapunovSpec& spec, double x);

LyapunovCertificate certify(const Potential& potential, const LyapunovSpec& spec, const Grid1D& grid,
                            const CertifyOptions& opts = {});

/// ω(x) = 1 ∨ 1/ξ'(W(x)).
double gradient_weight(const LyapunovSpec& spec, double x);

/// sup over the grid of ω(x) / (1 ∨ |x|^{2 gamma}).
double gradient_weight_constant(const LyapunovSpec& spec, const Grid1D& grid, double gamma);

nlohmann::json to_json(const LyapunovSpec& spec, const LyapunovCertificate& cert);

}  // namespace hkb
