#include "hkb/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hkb/errors.hpp"

namespace hkb {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

double log_power_k(const LogPowerXi& x) { return 2.0 * x.gamma / x.alpha; }

}  // namespace

LyapunovSpec::LyapunovSpec(LyapunovForm form, XiFunction xi, PowerRate phi, double smoothing_radius)
    : form_(std::move(form)), xi_(xi), phi_(phi), smoothing_radius_(smoothing_radius) {
  if (!(smoothing_radius_ > 0)) throw ParameterError("LyapunovSpec: smoothing radius must be > 0");
  if (!(phi_.exponent > 0)) throw ParameterError("LyapunovSpec: rate exponent must be > 0 so that phi -> infinity");
  std::visit(Overloaded{
                 [](const ExpPowerForm& f) {
                   if (!(f.a > 0) || !(f.alpha > 0)) throw ParameterError("ExpPower form: a and alpha must be > 0");
                 },
                 [](const PurePowerForm& f) {
                   if (!(f.a_pow > 0)) throw ParameterError("PurePower form: exponent must be > 0");
                 },
                 [](const CustomForm& f) {
                   if (!f.w || !f.dw || !f.d2w) throw ParameterError("Custom form: W, W' and W'' are required");
                 },
             },
             form_);
  std::visit(Overloaded{
                 [](const IdentityXi&) {},
                 [](const LogPowerXi& x) {
                   if (!(x.gamma >= 0) || !(x.alpha > 0)) throw ParameterError("LogPower xi: need gamma >= 0, alpha > 0");
                 },
                 [](const PowerTailXi& x) {
                   if (!(x.b_exp >= 0 && x.b_exp < 1)) throw ParameterError("PowerTail xi: need 0 <= b < 1");
                 },
             },
             xi_);

  // C^2 even quartic patch matching W, W', W'' at the smoothing radius.
  const double rho = smoothing_radius_;
  const auto o = outer(rho);
  c4_ = (o.d2w - o.dw / rho) / (8.0 * rho * rho);
  c2_ = (o.dw - 4.0 * c4_ * rho * rho * rho) / (2.0 * rho);
  c0_ = o.w - c2_ * rho * rho - c4_ * rho * rho * rho * rho;

  double wmin = std::numeric_limits<double>::infinity();
  constexpr int kSamples = 2000;
  for (int i = 0; i <= kSamples; ++i) {
    const double r = rho * i / kSamples;
    wmin = std::min(wmin, c0_ + c2_ * r * r + c4_ * r * r * r * r);
  }
  const double outer_span = std::holds_alternative<CustomForm>(form_) ? 10.0 * rho : rho;
  for (int i = 0; i <= kSamples; ++i) wmin = std::min(wmin, outer(rho + outer_span * i / kSamples).w);
  shift_ = std::max(0.0, 1.0 - wmin);
}

LyapunovSpec LyapunovSpec::with_rate(PowerRate phi) const {
  LyapunovSpec s = *this;
  if (!(phi.exponent > 0)) throw ParameterError("LyapunovSpec: rate exponent must be > 0");
  s.phi_ = phi;
  return s;
}

LyapunovValue LyapunovSpec::outer(double r) const {
  LyapunovValue v;
  std::visit(Overloaded{
                 [&](const ExpPowerForm& f) {
                   const double ra = std::pow(r, f.alpha);
                   v.w = std::exp(f.a * ra);
                   const double g1 = f.a * f.alpha * std::pow(r, f.alpha - 1.0);
                   const double g2 = f.a * f.alpha * (f.alpha - 1.0) * std::pow(r, f.alpha - 2.0);
                   v.dw = g1 * v.w;
                   v.d2w = (g2 + g1 * g1) * v.w;
                 },
                 [&](const PurePowerForm& f) {
                   v.w = std::pow(r, f.a_pow);
                   v.dw = f.a_pow * std::pow(r, f.a_pow - 1.0);
                   v.d2w = f.a_pow * (f.a_pow - 1.0) * std::pow(r, f.a_pow - 2.0);
                 },
                 [&](const CustomForm& f) {
                   v.w = f.w(r);
                   v.dw = f.dw(r);
                   v.d2w = f.d2w(r);
                 },
             },
             form_);
  return v;
}

LyapunovValue LyapunovSpec::eval(double x) const {
  const double r = std::abs(x);
  LyapunovValue v;
  if (r >= smoothing_radius_) {
    v = outer(r);
    if (x < 0) v.dw = -v.dw;
  } else {
    v.w = c0_ + c2_ * x * x + c4_ * x * x * x * x;
    v.dw = 2.0 * c2_ * x + 4.0 * c4_ * x * x * x;
    v.d2w = 2.0 * c2_ + 12.0 * c4_ * x * x;
  }
  v.w += shift_;
  return v;
}

double LyapunovSpec::xi_threshold() const {
  if (const auto* lp = std::get_if<LogPowerXi>(&xi_)) return std::exp(2.0 * log_power_k(*lp));
  return 0.0;
}

bool LyapunovSpec::xi_extended() const {
  const auto* lp = std::get_if<LogPowerXi>(&xi_);
  return lp != nullptr && lp->gamma > 0;
}

double LyapunovSpec::xi(double u) const {
  return std::visit(Overloaded{
                        [&](const IdentityXi&) { return u; },
                        [&](const LogPowerXi& x) {
                          const double k = log_power_k(x);
                          if (k == 0.0) return u;
                          const double us = std::exp(2.0 * k);
                          auto closed = [k](double v) { return v * std::pow(std::log(v), -k); };
                          if (u > us) return closed(u);
                          const double slope = 0.5 * std::pow(2.0 * k, -k);
                          return closed(us) + slope * (u - us);
                        },
                        [&](const PowerTailXi& x) { return std::pow(u, 1.0 - x.b_exp); },
                    },
                    xi_);
}

double LyapunovSpec::xi_prime(double u) const {
  return std::visit(Overloaded{
                        [&](const IdentityXi&) { return 1.0; },
                        [&](const LogPowerXi& x) {
                          const double k = log_power_k(x);
                          if (k == 0.0) return 1.0;
                          const double us = std::exp(2.0 * k);
                          const double lu = std::log(std::max(u, us));
                          return std::pow(lu, -k) - k * std::pow(lu, -k - 1.0);
                        },
                        [&](const PowerTailXi& x) { return (1.0 - x.b_exp) * std::pow(u, -x.b_exp); },
                    },
                    xi_);
}

double LyapunovSpec::phi(double x, double c_rate) const { return c_rate * std::pow(std::abs(x), phi_.exponent); }

std::string LyapunovSpec::form_name() const {
  return std::visit(Overloaded{
                        [](const ExpPowerForm&) { return std::string("exp_power"); },
                        [](const PurePowerForm&) { return std::string("pure_power"); },
                        [](const CustomForm&) { return std::string("custom"); },
                    },
                    form_);
}

std::string LyapunovSpec::xi_name() const {
  return std::visit(Overloaded{
                        [](const IdentityXi&) { return std::string("identity"); },
                        [](const LogPowerXi&) { return std::string("log_power"); },
                        [](const PowerTailXi&) { return std::string("power_tail"); },
                    },
                    xi_);
}

LyapunovSpec suggest_exp_lyapunov(const DriftHypothesis& hyp, double gamma) {
  if (!(hyp.c > 0) || !(hyp.alpha > 0)) throw ParameterError("suggest_exp_lyapunov: c and alpha must be > 0");
  if (!(gamma >= 0.0) || !(gamma > 1.0 - hyp.alpha))
    throw ParameterError("suggest_exp_lyapunov: requires gamma >= 0 and gamma > 1 - alpha (got gamma = " +
                         std::to_string(gamma) + ", alpha = " + std::to_string(hyp.alpha) + ")");
  const double a = 1.0 / (4.0 * hyp.c * hyp.alpha);
  XiFunction xi = IdentityXi{};
  if (gamma > 0) xi = LogPowerXi{gamma, hyp.alpha};
  return LyapunovSpec(ExpPowerForm{a, hyp.alpha}, xi, PowerRate{0.0, 2.0 * (hyp.alpha + gamma - 1.0)});
}

LyapunovSpec suggest_power_lyapunov(const DriftHypothesis& hyp, double a_pow, double b_exp) {
  if (!(b_exp >= 0 && b_exp < 1)) throw ParameterError("suggest_power_lyapunov: requires 0 <= b < 1");
  if (!(a_pow * b_exp > 2.0)) throw ParameterError("suggest_power_lyapunov: requires a b > 2");
  if (!(a_pow < 2.0 + hyp.alpha)) throw ParameterError("suggest_power_lyapunov: requires a < 2 + alpha");
  return LyapunovSpec(PurePowerForm{a_pow}, PowerTailXi{b_exp}, PowerRate{0.0, a_pow * b_exp - 2.0});
}

double generator_on_w(const Potential& potential, const LyapunovSpec& spec, double x) {
  const auto w = spec.eval(x);
  return w.d2w - potential.eval(x).du * w.dw;
}

LyapunovCertificate certify(const Potential& potential, const LyapunovSpec& spec, const Grid1D& grid,
                            const CertifyOptions& opts) {
  if (grid.empty()) throw InputError("certify: empty grid");
  LyapunovCertificate cert;
  cert.exponent = spec.rate().exponent;
  cert.xi_extended = spec.xi_extended();
  cert.grid = grid.x;
  const double radius = std::min(std::abs(grid.lo()), std::abs(grid.hi()));
  cert.tail_radius = opts.tail_fraction * radius;

  std::vector<double> ratio(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double w = spec.eval(grid[i]).w;
    ratio[i] = generator_on_w(potential, spec, grid[i]) / spec.xi(w);
  }

  double c = spec.rate().c_rate;
  if (!(c > 0)) {
    // Largest rate keeping −LW/ξ(W) >= c |x|^e on the tail.
    c = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double ax = std::abs(grid[i]);
      if (ax < cert.tail_radius || ax == 0.0) continue;
      c = std::min(c, -ratio[i] / std::pow(ax, cert.exponent));
    }
    if (!std::isfinite(c)) throw InputError("certify: grid has no tail points");
  }
  cert.c_rate = c;

  cert.margin_profile.resize(grid.size());
  bool tail_ok = true;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double ax = std::abs(grid[i]);
    const double phi = spec.phi(grid[i], c);
    double m = -ratio[i] - phi;
    // A fitted rate is attained with equality at the minimizer; do not count rounding as a violation.
    if (m < 0 && m > -1e-12 * (std::abs(ratio[i]) + phi)) m = 0.0;
    cert.margin_profile[i] = m;
    if (m < 0) {
      cert.r0 = std::max(cert.r0, ax);
      if (ax >= cert.tail_radius) tail_ok = false;
    }
  }
  cert.margin_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double ax = std::abs(grid[i]);
    if (ax <= cert.r0)
      cert.b_const = std::max(cert.b_const, -cert.margin_profile[i]);
    else
      cert.margin_min = std::min(cert.margin_min, cert.margin_profile[i]);
  }
  cert.admissible = c >= opts.min_rate && tail_ok;
  if (!(c >= opts.min_rate))
    cert.diagnostics = "no positive rate: -LW/xi(W) does not grow on the tail";
  else if (!tail_ok)
    cert.diagnostics = "rate violated on the tail region |x| >= " + std::to_string(cert.tail_radius);
  if (cert.xi_extended)
    cert.diagnostics += (cert.diagnostics.empty() ? "" : "; ") +
                        std::string("xi linearly extended below u = ") + std::to_string(spec.xi_threshold());
  return cert;
}

double gradient_weight(const LyapunovSpec& spec, double x) {
  return std::max(1.0, 1.0 / spec.xi_prime(spec.eval(x).w));
}

double gradient_weight_constant(const LyapunovSpec& spec, const Grid1D& grid, double gamma) {
  double c = 0.0;
  for (double x : grid.x)
    c = std::max(c, gradient_weight(spec, x) / std::max(1.0, std::pow(std::abs(x), 2.0 * gamma)));
  return c;
}

nlohmann::json to_json(const LyapunovSpec& spec, const LyapunovCertificate& cert) {
  nlohmann::json j;
  j["form"] = spec.form_name();
  std::visit(Overloaded{
                 [&](const ExpPowerForm& f) {
                   j["a"] = f.a;
                   j["alpha"] = f.alpha;
                 },
                 [&](const PurePowerForm& f) { j["a"] = f.a_pow; },
                 [&](const CustomForm&) { j["a"] = nullptr; },
             },
             spec.form());
  j["xi"] = spec.xi_name();
  std::visit(Overloaded{
                 [](const IdentityXi&) {},
                 [&](const LogPowerXi& x) { j["xi_gamma"] = x.gamma; },
                 [&](const PowerTailXi& x) { j["xi_b"] = x.b_exp; },
             },
             spec.xi_function());
  j["phi_exponent"] = cert.exponent;
  j["C_rate"] = cert.c_rate;
  j["b"] = cert.b_const;
  j["r0"] = cert.r0;
  j["margin_min"] = std::isfinite(cert.margin_min) ? nlohmann::json(cert.margin_min) : nlohmann::json(nullptr);
  j["admissible"] = cert.admissible;
  j["tail_radius"] = cert.tail_radius;
  j["smoothing_radius"] = spec.smoothing_radius();
  j["w_shift"] = spec.shift();
  j["xi_extended"] = cert.xi_extended;
  j["diagnostics"] = cert.diagnostics;
  return j;
}

}  // namespace hkb
