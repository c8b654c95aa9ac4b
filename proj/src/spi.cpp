#include "hkb/spi.hpp"

#include <algorithm>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "hkb/errors.hpp"
#include "hkb/kernels.hpp"

namespace hkb {
namespace {

std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

double exponent_p(double alpha, double gamma, double delta, double beta, int dim, bool cauchy) {
  if (dim < 1) throw ParameterError("exponent_p: dimension must be >= 1");
  if (!std::isfinite(alpha) || !std::isfinite(gamma) || !std::isfinite(delta) || !std::isfinite(beta))
    throw ParameterError("exponent_p: non-finite parameter");
  const double d = dim;
  if (cauchy) {
    if (!(alpha > 0)) throw ParameterError("exponent_p: alpha must be > 0");
    if (!(gamma > 2.0 / alpha))
      throw ParameterError("exponent_p: Cauchy case requires gamma > 2/alpha (got gamma = " + std::to_string(gamma) +
                           ", alpha = " + std::to_string(alpha) + ")");
    if (!(beta > 0)) throw ParameterError("exponent_p: Cauchy case requires beta > 0");
    return gamma * beta + d * std::max(1.0, delta * gamma) / 2.0;
  }
  if (!(gamma >= 0)) throw ParameterError("exponent_p: requires gamma >= 0");
  if (!(gamma > 1.0 - alpha))
    throw ParameterError("exponent_p: requires gamma > 1 - alpha (got gamma = " + std::to_string(gamma) +
                         ", alpha = " + std::to_string(alpha) + ")");
  const double k = alpha + gamma - 1.0;
  return (2.0 * std::max(beta, 0.0) + d * std::max(delta, k)) / (2.0 * k);
}

// ---------------------------------------------------------------------------

double SPIProfile::psi_of(double level) const {
  if (!(level >= 0)) return 0.0;
  return std::pow(level / c_rate, 1.0 / rate_exponent);
}

double SPIProfile::shape(double s) const {
  const double r = psi_of(4.0 / s);
  return g_fn(r) * std::pow(std::max(1.0 / s, h_fn(r)), 0.5 * dim);
}

double SPIProfile::b(double s) const {
  if (!(s > 0)) throw InputError("SPIProfile::b: s must be > 0");
  if (const auto* pw = std::get_if<PowerProfile>(&form)) return pw->c_spi * std::pow(s, -pw->p);
  const auto& ep = std::get<ExpPowerProfile>(form);
  return std::exp(ep.c_exp * (1.0 + std::pow(s, -ep.theta)));
}

SPIProfile profile_from_certificate(const Potential& potential, const LyapunovCertificate& cert,
                                    const LyapunovSpec& spec, const Weight& weight, double p, double gamma,
                                    bool exp_power, double theta) {
  if (!cert.admissible) throw CertificateError("profile_from_certificate: certificate is not admissible");
  if (!(cert.c_rate > 0) || !(cert.exponent > 0)) throw CertificateError("profile_from_certificate: bad rate");
  (void)spec;
  SPIProfile prof;
  prof.dim = potential.dim();
  prof.exponent_p = p;
  prof.c_rate = cert.c_rate;
  prof.rate_exponent = cert.exponent;
  prof.omega_gamma = gamma;
  prof.s0 = cert.r0 > 0 ? 4.0 / (cert.c_rate * std::pow(cert.r0, cert.exponent))
                        : std::numeric_limits<double>::infinity();
  if (exp_power)
    prof.form = ExpPowerProfile{1.0, theta};
  else
    prof.form = PowerProfile{1.0, p};

  // e^U / V^2 = (1 + x^2)^beta is radial and monotone in |x|.
  const double beta = weight.beta();
  prof.g_fn = [beta](double r) { return std::pow(1.0 + r * r, std::max(beta, 0.0)); };
  prof.h_fn = [potential](double r) {
    constexpr int kSamples = 1024;
    double h = 0.0;
    for (int i = -kSamples; i <= kSamples; ++i) {
      const double du = potential.du(r * i / kSamples);
      h = std::max(h, du * du);
    }
    return h;
  };

  double rmax = 0.0;
  for (double x : cert.grid) rmax = std::max(rmax, std::abs(x));
  if (!(rmax > 0)) throw CertificateError("profile_from_certificate: certificate grid is degenerate");
  prof.r = logspace(1e-3 * rmax, rmax, 64);
  for (double r : prof.r) {
    prof.g.push_back(prof.g_fn(r));
    prof.h.push_back(prof.h_fn(r));
  }
  for (std::size_t k = 1; k < prof.r.size(); ++k) {
    prof.g[k] = std::max(prof.g[k], prof.g[k - 1]);
    prof.h[k] = std::max(prof.h[k], prof.h[k - 1]);
  }
  prof.psi_arg = logspace(1e-3, 1e6, 64);
  for (double level : prof.psi_arg) prof.psi.push_back(prof.psi_of(level));
  return prof;
}

void calibrate(SPIProfile& profile, double s_ref, double b_star, double factor) {
  if (!(s_ref > 0) || !(b_star > 0) || !(factor > 0)) throw InputError("calibrate: need s_ref, b*, factor > 0");
  if (auto* pw = std::get_if<PowerProfile>(&profile.form)) {
    pw->c_spi = factor * b_star * std::pow(s_ref, pw->p);
    return;
  }
  auto& ep = std::get<ExpPowerProfile>(profile.form);
  ep.c_exp = std::log(factor * b_star) / (1.0 + std::pow(s_ref, -ep.theta));
}

// ---------------------------------------------------------------------------

BallCheck local_ball_spi_check(double r, double u, std::size_t n, std::span<const TestFunction> tests) {
  if (!(r > 0) || !(u > 0)) throw InputError("local_ball_spi_check: r and u must be > 0");
  if (n < 3) throw InputError("local_ball_spi_check: need at least 3 nodes");
  const auto grid = Grid1D::symmetric(r, n);
  BallCheck out;
  out.worst_ratio = -std::numeric_limits<double>::infinity();
  for (const auto& tf : tests) {
    if (!tf.value || !tf.derivative) throw InputError("local_ball_spi_check: test function needs value and derivative");
    double i2 = 0, i1 = 0, d2 = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double w = grid.weight(i), g = tf.value(grid[i]), dg = tf.derivative(grid[i]);
      i2 += w * g * g;
      i1 += w * std::abs(g);
      d2 += w * dg * dg;
    }
    if (!(i1 > 0)) {
      ++out.skipped;
      out.ratios.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    const double ratio = (i2 - u * d2) / (i1 * i1);
    out.ratios.push_back(ratio);
    out.worst_ratio = std::max(out.worst_ratio, ratio);
  }
  if (out.skipped == tests.size()) {
    out.worst_ratio = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  out.c_fit = out.worst_ratio / (1.0 / std::sqrt(u) + 1.0 / r);
  return out;
}

// ---------------------------------------------------------------------------

double SpiForms::dirichlet(std::span<const double> f) const {
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < f.size(); ++i) {
    const double d = f[i + 1] - f[i];
    acc += conductance[i] * d * d;
  }
  return acc;
}

double SpiForms::objective(std::span<const double> f, double s) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) acc += mass[i] * f[i] * f[i];
  return acc - s * dirichlet(f);
}

void SpiForms::apply(std::span<const double> f, double s, std::span<double> out) const {
  const std::size_t n = f.size();
  for (std::size_t i = 0; i < n; ++i) out[i] = mass[i] * f[i];
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double flux = s * conductance[i] * (f[i + 1] - f[i]);
    out[i] += flux;
    out[i + 1] -= flux;
  }
}

SpiForms make_spi_forms(const DiscretizedGenerator& gen, const Weight& weight) {
  SpiForms forms;
  forms.x = gen.grid.x;
  forms.mass = gen.mass;
  forms.conductance = gen.conductance;
  forms.v.resize(gen.size());
  for (std::size_t i = 0; i < gen.size(); ++i) forms.v[i] = gen.mass[i] * weight(gen.grid[i]);
  return forms;
}

void project_weighted_simplex(std::span<const double> y, std::span<const double> v, std::span<double> out) {
  const std::size_t n = y.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return y[a] / v[a] > y[b] / v[b]; });
  double s1 = 0.0, s2 = 0.0, tau = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = order[k];
    s1 += v[i] * y[i];
    s2 += v[i] * v[i];
    tau = (s1 - 1.0) / s2;
    if (k + 1 == n || tau >= y[order[k + 1]] / v[order[k + 1]]) break;
  }
  for (std::size_t i = 0; i < n; ++i) out[i] = std::max(0.0, y[i] - tau * v[i]);
}

BestBResult empirical_best_b(double s, const SpiForms& forms, const BestBOptions& opts) {
  const std::size_t n = forms.mass.size();
  if (n < 200) throw InputError("empirical_best_b: grid resolution must be >= 200 points");
  if (!(s > 0)) throw InputError("empirical_best_b: s must be > 0");
  if (opts.restarts == 0) throw InputError("empirical_best_b: need at least one restart");

  // Ascent runs in g = sqrt(m) f. The mass form becomes the identity and the
  // Dirichlet form has comparable curvature everywhere, so one step size
  // suits the tails as well as the bulk.
  std::vector<double> d(n), wv(n), fd(n), qd(n);
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = 1.0 / std::sqrt(forms.mass[i]);
    wv[i] = forms.v[i] * d[i];
  }
  const auto apply_g = [&](const std::vector<double>& g, std::vector<double>& out) {
    for (std::size_t i = 0; i < n; ++i) fd[i] = d[i] * g[i];
    forms.apply(fd, s, qd);
    for (std::size_t i = 0; i < n; ++i) out[i] = d[i] * qd[i];
  };
  const auto objective_g = [&](const std::vector<double>& g) {
    for (std::size_t i = 0; i < n; ++i) fd[i] = d[i] * g[i];
    return forms.objective(fd, s);
  };

  // Lipschitz constant of the gradient from the spectral radius of D (M − s A) D.
  std::vector<double> z(n), hz(n);
  {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (auto& e : z) e = unif(rng);
  }
  double lam = 0.0;
  for (int it = 0; it < 100; ++it) {
    apply_g(z, hz);
    lam = std::sqrt(std::inner_product(hz.begin(), hz.end(), hz.begin(), 0.0));
    for (std::size_t i = 0; i < n; ++i) z[i] = hz[i] / lam;
  }
  const double step = 2.0 / (2.0 * lam * 1.01);

  BestBResult best;
  best.s = s;
  best.value = -std::numeric_limits<double>::infinity();
  const double lo = forms.x.front(), hi = forms.x.back();
  const double h = forms.x[1] - forms.x[0];
  std::vector<double> f(n), y(n), fn(n), grad(n), tmp(n);
  for (std::size_t r = 0; r < opts.restarts; ++r) {
    if (r == 0) {
      std::fill(tmp.begin(), tmp.end(), 1.0);
    } else if (r == 1) {
      // Best interval indicator. At small s the maximizer is a narrow bump
      // where the mass is smallest, which random bumps rarely find.
      std::size_t a0 = 0, b0 = n;
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < n; ++a) {
        const double left = a > 0 ? forms.conductance[a - 1] : 0.0;
        double m = 0.0, vv = 0.0;
        for (std::size_t b = a; b < n; ++b) {
          m += forms.mass[b];
          vv += forms.v[b];
          const double right = b + 1 < n ? forms.conductance[b] : 0.0;
          const double val = (m - s * (left + right)) / (vv * vv);
          if (val > top) {
            top = val;
            a0 = a;
            b0 = b + 1;
          }
        }
      }
      std::fill(tmp.begin(), tmp.end(), 0.0);
      std::fill(tmp.begin() + a0, tmp.begin() + b0, 1.0);
    } else {
      std::mt19937_64 rng(mix(opts.seed + r));
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      // Half the bumps sit on an end of the box, where the mass is smallest.
      const double u = unif(rng);
      const double centre = r % 2 == 0 ? lo + (hi - lo) * u : (u < 0.5 ? lo : hi);
      const double width = std::exp(std::log(h) + (std::log(hi - lo) - std::log(h)) * unif(rng));
      for (std::size_t i = 0; i < n; ++i) {
        const double q = (forms.x[i] - centre) / width;
        tmp[i] = std::exp(-q * q);
      }
    }
    const double mass = std::inner_product(forms.v.begin(), forms.v.end(), tmp.begin(), 0.0);
    for (std::size_t i = 0; i < n; ++i) tmp[i] /= mass * d[i];
    project_weighted_simplex(tmp, wv, f);
    double val = objective_g(f);
    y = f;
    double tk = 1.0;
    bool converged = false;
    std::size_t it = 0;
    for (; it < opts.max_iter; ++it) {
      apply_g(y, grad);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + step * grad[i];
      project_weighted_simplex(tmp, wv, fn);
      const double nv = objective_g(fn);
      if (nv < val) {
        // Momentum overshot: restart from the last accepted iterate.
        y = f;
        tk = 1.0;
        continue;
      }
      const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
      for (std::size_t i = 0; i < n; ++i) y[i] = fn[i] + (tk - 1.0) / tn * (fn[i] - f[i]);
      tk = tn;
      converged = std::abs(nv - val) < opts.rel_tol * std::abs(nv);
      f.swap(fn);
      val = nv;
      if (converged) break;
    }
    if (val > best.value) {
      best.value = val;
      best.converged = converged;
      best.iterations = it;
      best.argmax.resize(n);
      for (std::size_t i = 0; i < n; ++i) best.argmax[i] = d[i] * f[i];
    }
  }
  return best;
}

BestBCurve empirical_best_b_curve(std::span<const double> s_grid, const SpiForms& forms, const BestBOptions& opts,
                                  Exec exec) {
  if (s_grid.empty()) throw InputError("empirical_best_b_curve: empty s grid");
  std::vector<BestBResult> results(s_grid.size());
  const auto task = [&](std::size_t k) { results[k] = empirical_best_b(s_grid[k], forms, opts); };
  if (exec == Exec::serial)
    kernels::serial::for_each_index(s_grid.size(), task);
  else
    kernels::omp::for_each_index(s_grid.size(), task);

  BestBCurve curve;
  curve.s.assign(s_grid.begin(), s_grid.end());
  for (std::size_t i = 0; i < s_grid.size(); ++i) {
    double b = results[i].value;
    for (std::size_t j = 0; j < s_grid.size(); ++j)
      if (s_grid[j] > s_grid[i]) b = std::max(b, forms.objective(results[j].argmax, s_grid[i]));
    curve.b.push_back(b);
    curve.converged.push_back(results[i].converged);
  }
  if (s_grid.size() >= 2) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < s_grid.size(); ++i) {
      lx.push_back(std::log(1.0 / s_grid[i]));
      ly.push_back(std::log(curve.b[i]));
    }
    curve.slope = fit_line(lx, ly).slope;
  }
  return curve;
}

DominationReport check_domination(const SPIProfile& profile, const BestBCurve& curve) {
  DominationReport rep;
  rep.worst_ratio = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < curve.s.size(); ++i) {
    if (curve.s[i] > profile.s0) continue;
    const double bt = profile.b(curve.s[i]);
    rep.s.push_back(curve.s[i]);
    rep.b_theory.push_back(bt);
    rep.b_empirical.push_back(curve.b[i]);
    rep.worst_ratio = std::min(rep.worst_ratio, bt / curve.b[i]);
  }
  rep.dominates = !rep.s.empty() && rep.worst_ratio >= 1.0;
  return rep;
}

// ---------------------------------------------------------------------------

double NashProfile::phi(double x) const { return custom ? custom(x) : c * std::pow(x, q); }

double NashProfile::n(double t) const {
  if (!(t > 0)) throw InputError("NashProfile::n: t must be > 0");
  if (!custom) {
    if (!(c > 0) || !(q > 1)) throw RateError("NashProfile: n(t) diverges unless c > 0 and the exponent exceeds 1");
    return std::pow(t, 1.0 - q) / (c * (q - 1.0));
  }
  boost::math::quadrature::exp_sinh<double> integrator;
  double err = 0.0, l1 = 0.0;
  double value = std::numeric_limits<double>::infinity();
  try {
    value = integrator.integrate([this](double x) { return 1.0 / custom(x); }, t,
                                 std::numeric_limits<double>::infinity(), 1e-12, &err, &l1);
  } catch (const std::exception&) {
    throw RateError("NashProfile: n(t) does not converge");
  }
  if (!std::isfinite(value) || err > 1e-6 * std::abs(value)) throw RateError("NashProfile: n(t) does not converge");
  return value;
}

double NashProfile::n_inverse(double tau) const {
  if (!(tau > 0)) throw InputError("NashProfile::n_inverse: argument must be > 0");
  if (!custom) {
    if (!(c > 0) || !(q > 1)) throw RateError("NashProfile: n(t) diverges unless c > 0 and the exponent exceeds 1");
    return std::pow(c * (q - 1.0) * tau, -1.0 / (q - 1.0));
  }
  // n is decreasing; solve in log t.
  const auto f = [&](double lt) { return std::log(n(std::exp(lt))) - std::log(tau); };
  double a = -5.0, b = 5.0;
  while (f(a) < 0 && a > -200) a *= 2;
  while (f(b) > 0 && b < 200) b *= 2;
  std::uintmax_t iters = 200;
  const auto root =
      boost::math::tools::toms748_solve(f, a, b, boost::math::tools::eps_tolerance<double>(45), iters);
  return std::exp(0.5 * (root.first + root.second));
}

double nash_rate(const NashProfile& profile, double t) { return profile.n_inverse(t); }

// ---------------------------------------------------------------------------

nlohmann::json to_json(const SPIProfile& p) {
  nlohmann::json j;
  j["s0"] = finite_or_null(p.s0);
  j["p"] = p.exponent_p;
  j["C_rate"] = p.c_rate;
  j["rate_exponent"] = p.rate_exponent;
  j["omega_gamma"] = p.omega_gamma;
  if (const auto* pw = std::get_if<PowerProfile>(&p.form)) {
    j["form"] = "power";
    j["C_spi"] = pw->c_spi;
  } else {
    const auto& ep = std::get<ExpPowerProfile>(p.form);
    j["form"] = "exp_power";
    j["c_exp"] = ep.c_exp;
    j["theta"] = ep.theta;
  }
  return j;
}

nlohmann::json to_json(const BestBCurve& c) {
  return {{"s", c.s}, {"b_empirical", c.b}, {"converged", c.converged}, {"slope", c.slope}};
}

nlohmann::json to_json(const DominationReport& d) {
  return {{"s", d.s},
          {"b_theory", d.b_theory},
          {"b_empirical", d.b_empirical},
          {"dominates", d.dominates},
          {"worst_ratio", finite_or_null(d.worst_ratio)}};
}

}  // namespace hkb
