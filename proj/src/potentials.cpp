#include "hkb/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "hkb/errors.hpp"

namespace hkb {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

bool finite(double v) { return std::isfinite(v); }

}  // namespace

Potential::Potential(PotentialFamily family, int dim, std::optional<double> hessian_lb)
    : family_(std::move(family)), dim_(dim), hessian_lb_(hessian_lb) {
  if (dim_ < 1) throw InputError("Potential: dimension must be >= 1");
  std::visit(Overloaded{
                 [](const PowerExponential& p) {
                   if (!(p.alpha > 0)) throw InputError("PowerExponential: alpha must be > 0");
                 },
                 [this](const GeneralizedCauchy& p) {
                   if (!(p.alpha > 0)) throw InputError("GeneralizedCauchy: alpha must be > 0");
                   if (p.dim != dim_) throw InputError("GeneralizedCauchy: family dim differs from potential dim");
                 },
                 [](const Quadratic& p) {
                   if (!(p.kappa > 0)) throw InputError("Quadratic: kappa must be > 0");
                 },
                 [this](const CustomPotential& p) {
                   if (!p.u || !p.du || !p.d2u) throw InputError("CustomPotential: U, U' and U'' are all required");
                   if (dim_ != 1) throw InputError("CustomPotential: only d = 1 is supported");
                 },
             },
             family_);
}

std::string Potential::family_name() const {
  return std::visit(Overloaded{
                        [](const PowerExponential&) { return std::string("power_exponential"); },
                        [](const GeneralizedCauchy&) { return std::string("generalized_cauchy"); },
                        [](const Quadratic&) { return std::string("quadratic"); },
                        [](const CustomPotential& c) { return c.name; },
                    },
                    family_);
}

PotentialValue Potential::raw(double x) const {
  PotentialValue v;
  std::visit(Overloaded{
                 [&](const PowerExponential& p) {
                   const double q = 1.0 + x * x;
                   v.u = std::pow(q, 0.5 * p.alpha);
                   v.du = p.alpha * std::pow(q, 0.5 * p.alpha - 1.0) * x;
                   v.lap = p.alpha * std::pow(q, 0.5 * p.alpha - 2.0) * (q + (p.alpha - 2.0) * x * x);
                 },
                 [&](const GeneralizedCauchy& p) {
                   const double k = 0.5 * (p.dim + p.alpha);
                   const double q = 1.0 + x * x;
                   v.u = k * std::log(q);
                   v.du = 2.0 * k * x / q;
                   v.lap = 2.0 * k * (1.0 - x * x) / (q * q);
                 },
                 [&](const Quadratic& p) {
                   v.u = 0.5 * p.kappa * x * x;
                   v.du = p.kappa * x;
                   v.lap = p.kappa;
                 },
                 [&](const CustomPotential& p) {
                   v.u = p.u(x);
                   v.du = p.du(x);
                   v.lap = p.d2u(x);
                   if (!finite(v.u) || !finite(v.du) || !finite(v.lap))
                     throw EvaluationError("custom potential '" + p.name + "' returned a non-finite value at x = " +
                                           std::to_string(x));
                 },
             },
             family_);
  return v;
}

PotentialValue Potential::eval(double x) const {
  if (!finite(x)) throw InputError("Potential::eval: non-finite point");
  auto v = raw(x);
  v.u += log_norm_;
  return v;
}

PotentialPoint Potential::eval(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim_) throw InputError("Potential::eval: point dimension mismatch");
  for (double xi : x)
    if (!finite(xi)) throw InputError("Potential::eval: non-finite point");
  if (dim_ == 1) {
    const auto v = eval(x[0]);
    return {v.u, {v.du}, v.lap};
  }
  double r2 = 0.0;
  for (double xi : x) r2 += xi * xi;
  const double d = dim_;
  PotentialPoint out;
  out.grad.resize(x.size());
  // Radial families: U = F(r^2), ∇U = 2F' x, ΔU = 2d F' + 4 r^2 F''.
  double f = 0, f1 = 0, f2 = 0;
  std::visit(Overloaded{
                 [&](const PowerExponential& p) {
                   const double q = 1.0 + r2, e = 0.5 * p.alpha;
                   f = std::pow(q, e);
                   f1 = e * std::pow(q, e - 1.0);
                   f2 = e * (e - 1.0) * std::pow(q, e - 2.0);
                 },
                 [&](const GeneralizedCauchy& p) {
                   const double k = 0.5 * (p.dim + p.alpha), q = 1.0 + r2;
                   f = k * std::log(q);
                   f1 = k / q;
                   f2 = -k / (q * q);
                 },
                 [&](const Quadratic& p) {
                   f = 0.5 * p.kappa * r2;
                   f1 = 0.5 * p.kappa;
                   f2 = 0.0;
                 },
                 [&](const CustomPotential&) {},
             },
             family_);
  out.u = f + log_norm_;
  for (std::size_t i = 0; i < x.size(); ++i) out.grad[i] = 2.0 * f1 * x[i];
  out.lap = 2.0 * d * f1 + 4.0 * r2 * f2;
  return out;
}

double Potential::box_raw_mass(double radius, std::size_t n) const {
  const auto g = Grid1D::symmetric(radius, n);
  double mass = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) mass += g.weight(i) * std::exp(-raw(g[i]).u);
  return mass;
}

Potential Potential::normalized(double radius, std::size_t n) const {
  if (dim_ != 1) throw InputError("Potential::normalized: numerics require d = 1");
  const double mass = box_raw_mass(radius, n);
  if (!(mass > 0) || !finite(mass)) throw EvaluationError("Potential::normalized: degenerate box mass");
  Potential p = *this;
  p.log_norm_ = std::log(mass);
  return p;
}

double Potential::total_raw_mass() const {
  // Midpoint rule in theta on (-pi/2, pi/2); the integrand vanishes or stays
  // bounded at the ends for every integrable potential used here.
  constexpr std::size_t kNodes = 200000;
  const double dtheta = std::numbers::pi / static_cast<double>(kNodes);
  double mass = 0.0;
  for (std::size_t i = 0; i < kNodes; ++i) {
    const double th = -0.5 * std::numbers::pi + (static_cast<double>(i) + 0.5) * dtheta;
    const double x = std::tan(th);
    const double c = std::cos(th);
    const double u = raw(x).u;
    mass += std::exp(-u) / (c * c);
  }
  mass *= dtheta;
  // A flat or slowly decaying density makes the sum scale with the node count.
  const double last = std::exp(-raw(std::tan(0.5 * std::numbers::pi - 0.5 * dtheta)).u) /
                      std::pow(std::cos(0.5 * std::numbers::pi - 0.5 * dtheta), 2);
  if (!finite(mass) || last * dtheta > 1e-3 * mass) return std::numeric_limits<double>::infinity();
  return mass;
}

namespace {

struct Margins {
  double growth = std::numeric_limits<double>::infinity();
  double growth_at = 0.0;
  double gradient = std::numeric_limits<double>::infinity();
  double gradient_at = 0.0;
};

Margins margins(const Potential& pot, const DriftHypothesis& hyp, const Grid1D& grid, double c) {
  Margins m;
  for (double x : grid.x) {
    const auto v = pot.eval(x);
    const double ax = std::abs(x);
    if (!hyp.cauchy_mode) {
      const double g = v.du * x - std::pow(ax, hyp.alpha) / c + c;
      if (g < m.growth) {
        m.growth = g;
        m.growth_at = x;
      }
    }
    const double b = c * std::max(1.0, std::pow(ax, hyp.delta)) - std::abs(v.du);
    if (b < m.gradient) {
      m.gradient = b;
      m.gradient_at = x;
    }
  }
  return m;
}

}  // namespace

double fit_gradient_exponent(const Potential& potential, const Grid1D& grid) {
  const double radius = std::max(std::abs(grid.lo()), std::abs(grid.hi()));
  std::vector<double> lx, ly;
  for (double x : grid.x) {
    const double ax = std::abs(x);
    if (ax < 0.5 * radius || ax <= 1.0) continue;
    const double g = std::abs(potential.eval(x).du);
    if (g <= 0) continue;
    lx.push_back(std::log(ax));
    ly.push_back(std::log(g));
  }
  if (lx.size() < 2) throw InputError("fit_gradient_exponent: grid has no usable tail points");
  return fit_line(lx, ly).slope;
}

HypothesisReport check_drift_hypothesis(const Potential& potential, const DriftHypothesis& hyp,
                                        const Grid1D& grid) {
  if (grid.empty()) throw InputError("check_drift_hypothesis: empty grid");
  const double radius = std::min(std::abs(grid.lo()), std::abs(grid.hi()));
  if (radius < 5.0) throw InputError("check_drift_hypothesis: grid must cover [-R, R] with R >= 5");
  if (!(hyp.c > 0) || !(hyp.alpha > 0) || !(hyp.delta > 0))
    throw ParameterError("check_drift_hypothesis: c, alpha and delta must be > 0");

  HypothesisReport rep;
  const auto m = margins(potential, hyp, grid, hyp.c);
  rep.gradient_worst_margin = m.gradient;
  rep.gradient_worst_point = m.gradient_at;
  rep.gradient_bound_pass = m.gradient >= 0.0;

  if (!hyp.cauchy_mode) {
    rep.worst_margin = m.growth;
    rep.worst_point = m.growth_at;
    rep.pass = m.growth >= 0.0 && rep.gradient_bound_pass;
  } else {
    const double threshold = hyp.liminf_target() * (1.0 - hyp.eps_tol);
    rep.worst_margin = std::numeric_limits<double>::infinity();
    double edge_abs = -1.0;
    for (double x : grid.x) {
      const double v = potential.eval(x).du * x;
      const double ax = std::abs(x);
      if (v < threshold) rep.cauchy_radius = std::max(rep.cauchy_radius, ax);
      if (ax >= 0.5 * radius && v - threshold < rep.worst_margin) {
        rep.worst_margin = v - threshold;
        rep.worst_point = x;
      }
      if (ax > edge_abs) {
        edge_abs = ax;
        rep.edge_value = v;
      }
    }
    rep.pass = rep.worst_margin >= 0.0 && rep.gradient_bound_pass;
  }

  // Both inequalities are monotone in c, so bisect on the pass flag.
  auto ok = [&](double c) {
    const auto mm = margins(potential, hyp, grid, c);
    return (hyp.cauchy_mode || mm.growth >= 0.0) && mm.gradient >= 0.0;
  };
  double hi = std::max(hyp.c, 1e-6);
  while (!ok(hi) && hi < 1e12) hi *= 2.0;
  if (!ok(hi)) {
    rep.smallest_c = std::numeric_limits<double>::infinity();
  } else {
    double lo = 0.0;
    for (int it = 0; it < 200 && hi - lo > 1e-10 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid > 0 && ok(mid))
        hi = mid;
      else
        lo = mid;
    }
    rep.smallest_c = hi;
  }
  rep.delta_fit = fit_gradient_exponent(potential, grid);
  return rep;
}

}  // namespace hkb
