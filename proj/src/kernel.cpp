#include "hkb/kernel.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss.hpp>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "hkb/errors.hpp"

namespace hkb {
namespace {

using Gauss = boost::math::quadrature::gauss<double, 7>;

void check_box(const Potential& potential, std::size_t n, double radius) {
  if (potential.dim() != 1) throw InputError("generator: numerics are one-dimensional");
  if (n < 3) throw InputError("generator: need at least 3 grid points");
  if (!(radius > 0) || !std::isfinite(radius)) throw InputError("generator: radius must be positive");
}

// y ↦ M y for the tridiagonal mass matrix given by row sums and off-diagonal.
std::vector<double> tridiag_mass_apply(const std::vector<double>& mass, const std::vector<double>& off,
                                       std::span<const double> f) {
  const std::size_t n = mass.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double lo = i > 0 ? off[i - 1] : 0.0, hi = i + 1 < n ? off[i] : 0.0;
    double acc = (mass[i] - lo - hi) * f[i];
    if (i > 0) acc += lo * f[i - 1];
    if (i + 1 < n) acc += hi * f[i + 1];
    out[i] = acc;
  }
  return out;
}

struct Pencil {
  Eigen::VectorXd lambda;
  Eigen::MatrixXd phi;  // nodal values, columns M-orthonormal
};

// A φ = λ M φ, solved in the variables y = m^{1/2} φ where the lumped part of M is the identity.
Pencil solve_pencil(const DiscretizedGenerator& gen, bool vectors, const char* who) {
  const std::size_t n = gen.size();
  const auto N = static_cast<Eigen::Index>(n);
  Eigen::VectorXd s(N);
  for (std::size_t i = 0; i < n; ++i) s(static_cast<Eigen::Index>(i)) = 1.0 / std::sqrt(gen.mass[i]);
  Eigen::VectorXd diag(N), off(N - 1);
  for (std::size_t i = 0; i < n; ++i) {
    double c = 0.0;
    if (i > 0) c += gen.conductance[i - 1];
    if (i + 1 < n) c += gen.conductance[i];
    diag(static_cast<Eigen::Index>(i)) = c / gen.mass[i];
  }
  bool lumped = true;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    off(k) = -gen.conductance[i] * s(k) * s(k + 1);
    lumped = lumped && gen.mass_off[i] == 0.0;
  }
  const auto opts = vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly;
  Pencil out;
  Eigen::MatrixXd y;
  if (lumped) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, off, opts);
    if (es.info() != Eigen::Success) throw EvaluationError(std::string(who) + ": eigensolver failed");
    out.lambda = es.eigenvalues();
    if (vectors) y = es.eigenvectors();
  } else {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(N, N), m = Eigen::MatrixXd::Zero(N, N);
    for (Eigen::Index i = 0; i < N; ++i) {
      a(i, i) = diag(i);
      m(i, i) = gen.mass_diag(static_cast<std::size_t>(i)) * s(i) * s(i);
    }
    for (Eigen::Index i = 0; i + 1 < N; ++i) {
      a(i, i + 1) = a(i + 1, i) = off(i);
      m(i, i + 1) = m(i + 1, i) = gen.mass_off[static_cast<std::size_t>(i)] * s(i) * s(i + 1);
    }
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(a, m, opts | Eigen::Ax_lBx);
    if (es.info() != Eigen::Success) throw EvaluationError(std::string(who) + ": eigensolver failed");
    out.lambda = es.eigenvalues();
    if (vectors) y = es.eigenvectors();
  }
  if (vectors) out.phi = s.asDiagonal() * y;
  return out;
}

}  // namespace

DiscretizedGenerator build_generator(const Potential& potential, std::size_t n, double radius,
                                     const GeneratorOptions& opts) {
  return build_weighted_generator(potential, [](double) { return 1.0; }, n, radius, opts);
}

DiscretizedGenerator build_weighted_generator(const Potential& potential, const std::function<double(double)>& omega,
                                              std::size_t n, double radius, const GeneratorOptions& opts) {
  check_box(potential, n, radius);
  if (!(opts.consistent_mass >= 0.0 && opts.consistent_mass <= 1.0))
    throw InputError("generator: consistent_mass must lie in [0, 1]");
  double fraction = 1.0;
  if (opts.truncation_tol < 1.0) {
    const double total = potential.total_raw_mass();
    fraction = std::isfinite(total) ? potential.box_raw_mass(radius, n) / total : 0.0;
    if (!(fraction >= 1.0 - opts.truncation_tol))
      throw TruncationError("generator: box [-" + std::to_string(radius) + ", " + std::to_string(radius) +
                            "] holds a fraction " + std::to_string(fraction) +
                            " of the mass (need >= 1 - " + std::to_string(opts.truncation_tol) + ")");
  }

  DiscretizedGenerator gen(Grid1D::symmetric(radius, n), potential.normalized(radius, n));
  const auto& g = gen.grid;
  gen.box_mass_fraction = fraction;

  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) peak = std::max(peak, std::exp(-gen.potential.u(g[i])));
  const double edge = std::max(std::exp(-gen.potential.u(g.lo())), std::exp(-gen.potential.u(g.hi())));
  gen.edge_density = edge / peak;
  gen.edge_density_resolved = gen.edge_density <= opts.edge_density_ratio;

  // Element integrals of the hat-function products against e^{-U} and ω e^{-U}.
  gen.mass.assign(n, 0.0);
  gen.mass_off.assign(n - 1, 0.0);
  gen.conductance.assign(n - 1, 0.0);
  const auto rho = [&](double x) { return std::exp(-gen.potential.u(x)); };
  for (std::size_t e = 0; e + 1 < n; ++e) {
    const double a = g[e], b = g[e + 1], h = g.h;
    const auto left = [&](double x) { return (b - x) / h; };
    const auto right = [&](double x) { return (x - a) / h; };
    const double m00 = Gauss::integrate([&](double x) { return left(x) * left(x) * rho(x); }, a, b);
    const double m11 = Gauss::integrate([&](double x) { return right(x) * right(x) * rho(x); }, a, b);
    const double m01 = Gauss::integrate([&](double x) { return left(x) * right(x) * rho(x); }, a, b);
    const double k = Gauss::integrate(
        [&](double x) {
          const double w = omega(x);
          if (!std::isfinite(w) || !(w > 0)) throw EvaluationError("generator: gradient weight must be finite and > 0");
          return w * rho(x);
        },
        a, b);
    gen.mass[e] += m00 + m01;
    gen.mass[e + 1] += m11 + m01;
    gen.mass_off[e] = opts.consistent_mass * m01;
    gen.conductance[e] = k / (h * h);
  }
  double total = 0.0;
  for (double m : gen.mass) total += m;
  for (auto& m : gen.mass) m /= total;
  for (auto& m : gen.mass_off) m /= total;
  for (auto& c : gen.conductance) c /= total;
  return gen;
}

double DiscretizedGenerator::mass_diag(std::size_t i) const {
  return mass[i] - (i > 0 ? mass_off[i - 1] : 0.0) - (i + 1 < size() ? mass_off[i] : 0.0);
}

std::vector<double> DiscretizedGenerator::mass_apply(std::span<const double> f) const {
  if (f.size() != size()) throw InputError("DiscretizedGenerator::mass_apply: size mismatch");
  return tridiag_mass_apply(mass, mass_off, f);
}

std::vector<double> DiscretizedGenerator::apply(std::span<const double> f) const {
  const std::size_t n = size();
  if (f.size() != n) throw InputError("DiscretizedGenerator::apply: size mismatch");
  std::vector<double> rhs(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double flux = 0.0;
    if (i + 1 < n) flux += conductance[i] * (f[i + 1] - f[i]);
    if (i > 0) flux += conductance[i - 1] * (f[i - 1] - f[i]);
    rhs[i] = flux;
  }
  // Thomas elimination; M is diagonally dominant for any consistent share in [0, 1].
  std::vector<double> d(n), u(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) d[i] = mass_diag(i);
  for (std::size_t i = 1; i < n; ++i) {
    const double w = mass_off[i - 1] / d[i - 1];
    d[i] -= w * mass_off[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  u[n - 1] = rhs[n - 1] / d[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) u[i] = (rhs[i] - mass_off[i] * u[i + 1]) / d[i];
  return u;
}

double DiscretizedGenerator::dirichlet(std::span<const double> f, std::span<const double> g) const {
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < size(); ++i) acc += conductance[i] * (f[i + 1] - f[i]) * (g[i + 1] - g[i]);
  return acc;
}

double DiscretizedGenerator::inner(std::span<const double> f, std::span<const double> g) const {
  const auto mg = mass_apply(g);
  double acc = 0.0;
  for (std::size_t i = 0; i < size(); ++i) acc += f[i] * mg[i];
  return acc;
}

KernelSpectrum::KernelSpectrum(const DiscretizedGenerator& gen)
    : n_(gen.size()), grid_(gen.grid), mass_(gen.mass), mass_off_(gen.mass_off), unit_(gen.size(), 1.0) {
  const auto pencil = solve_pencil(gen, true, "KernelSpectrum");
  lambda_.resize(n_);
  phi_.resize(n_ * n_);
  mode_mass_.assign(n_, 0.0);
  const auto& vec = pencil.phi;
  for (std::size_t k = 0; k < n_; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    lambda_[k] = pencil.lambda(kk);
    // Fix the sign so that the largest-magnitude component is positive.
    Eigen::Index arg = 0;
    vec.col(kk).cwiseAbs().maxCoeff(&arg);
    const double sign = vec(arg, kk) < 0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n_; ++i) phi_[i * n_ + k] = sign * vec(static_cast<Eigen::Index>(i), kk);
  }
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t k = 0; k < n_; ++k) mode_mass_[k] += phi_[i * n_ + k] * mass_[i];
}

std::vector<double> KernelSpectrum::mass_apply(std::span<const double> f) const {
  if (f.size() != n_) throw InputError("KernelSpectrum::mass_apply: size mismatch");
  return tridiag_mass_apply(mass_, mass_off_, f);
}

kernels::SpectralView KernelSpectrum::view() const {
  return {n_, n_, lambda_, phi_, unit_};
}

double KernelSpectrum::phi_at(std::size_t k, double x) const {
  if (x <= grid_.lo()) return phi(k, 0);
  if (x >= grid_.hi()) return phi(k, n_ - 1);
  const double pos = (x - grid_.lo()) / grid_.h;
  const std::size_t i = std::min(n_ - 2, static_cast<std::size_t>(pos));
  const double frac = pos - static_cast<double>(i);
  return (1.0 - frac) * phi(k, i) + frac * phi(k, i + 1);
}

kernels::SymmetricTable KernelSpectrum::heat_kernel(double t, Exec exec) const {
  if (!(t > 0)) throw InputError("heat_kernel: t must be > 0");
  kernels::SymmetricTable table;
  if (exec == Exec::serial)
    kernels::serial::heat_kernel_table(view(), t, 0, table);
  else
    kernels::omp::heat_kernel_table(view(), t, 0, table);
  return table;
}

kernels::SymmetricTable KernelSpectrum::deviation_kernel(double t, Exec exec) const {
  if (!(t > 0)) throw InputError("deviation_kernel: t must be > 0");
  kernels::SymmetricTable table;
  if (exec == Exec::serial)
    kernels::serial::heat_kernel_table(view(), t, 1, table);
  else
    kernels::omp::heat_kernel_table(view(), t, 1, table);
  return table;
}

std::vector<double> KernelSpectrum::heat_kernel_diagonal(double t, Exec exec) const {
  if (!(t > 0)) throw InputError("heat_kernel_diagonal: t must be > 0");
  std::vector<double> out(n_);
  if (exec == Exec::serial)
    kernels::serial::heat_kernel_diagonal(view(), t, 0, out);
  else
    kernels::omp::heat_kernel_diagonal(view(), t, 0, out);
  return out;
}

std::vector<double> KernelSpectrum::heat_kernel_row(double x, double t) const {
  std::vector<double> coef(n_);
  for (std::size_t k = 0; k < n_; ++k) coef[k] = std::exp(-lambda_[k] * t) * phi_at(k, x);
  std::vector<double> row(n_);
  for (std::size_t j = 0; j < n_; ++j) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n_; ++k) acc += coef[k] * phi_[j * n_ + k];
    row[j] = acc;
  }
  return row;
}

std::vector<double> KernelSpectrum::apply_semigroup(std::span<const double> g, double t) const {
  if (g.size() != n_) throw InputError("apply_semigroup: size mismatch");
  const auto mg = mass_apply(g);
  std::vector<double> coef(n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t k = 0; k < n_; ++k) coef[k] += phi_[i * n_ + k] * mg[i];
  for (std::size_t k = 0; k < n_; ++k) coef[k] *= std::exp(-lambda_[k] * t);
  std::vector<double> out(n_);
  for (std::size_t j = 0; j < n_; ++j) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n_; ++k) acc += coef[k] * phi_[j * n_ + k];
    out[j] = acc;
  }
  return out;
}

double KernelSpectrum::row_stochasticity_residual(double t) const {
  std::vector<double> w(n_);
  for (std::size_t k = 0; k < n_; ++k) w[k] = std::exp(-lambda_[k] * t) * mode_mass_[k];
  double worst = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n_; ++k) acc += w[k] * phi_[i * n_ + k];
    worst = std::max(worst, std::abs(acc - 1.0));
  }
  return worst;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> weight_on_grid(const Weight& weight, const Grid1D& grid) {
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) v[i] = weight(grid[i]);
  return v;
}

void check_t_grid(std::span<const double> t_grid, const char* who) {
  if (t_grid.size() < 2) throw InputError(std::string(who) + ": t grid needs at least 2 points");
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (!(t_grid[i] > 0) || !std::isfinite(t_grid[i])) throw InputError(std::string(who) + ": t must be > 0");
    if (i > 0 && !(t_grid[i] > t_grid[i - 1])) throw InputError(std::string(who) + ": t grid must increase");
  }
}

}  // namespace

InvariantReport check_invariants(const DiscretizedGenerator& gen, const KernelSpectrum& spec,
                                 const InvariantOptions& opts) {
  const std::size_t n = spec.size();
  InvariantReport r;

  const std::vector<double> ones(n, 1.0);
  for (double v : gen.apply(ones)) r.constant_residual = std::max(r.constant_residual, std::abs(v));

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> f(n), g(n);
  for (std::size_t i = 0; i < n; ++i) {
    f[i] = normal(rng);
    g[i] = normal(rng);
  }
  const double a = gen.inner(gen.apply(f), g), b = gen.inner(f, gen.apply(g));
  r.mu_symmetry = std::abs(a - b) / (std::abs(a) + std::abs(b));

  r.kernel_symmetric = true;
  r.min_diagonal = std::numeric_limits<double>::infinity();
  const auto& m = spec.mass();
  for (double t : {0.1, 0.5, 1.0}) {
    const auto table = spec.heat_kernel(t);
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        row += table(i, j) * m[j];
        if (table(i, j) != table(j, i)) r.kernel_symmetric = false;
      }
      r.row_stochasticity = std::max(r.row_stochasticity, std::abs(row - 1.0));
      r.min_diagonal = std::min(r.min_diagonal, table(i, i));
    }
  }

  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const auto as_matrix = [n](const kernels::SymmetricTable& t) {
    return Eigen::Map<const RowMatrix>(t.data.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  };
  const auto p3 = spec.heat_kernel(0.3), p7 = spec.heat_kernel(0.7), p1 = spec.heat_kernel(1.0);
  RowMatrix mm = RowMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    mm(k, k) = gen.mass_diag(i);
    if (i + 1 < n) mm(k, k + 1) = mm(k + 1, k) = gen.mass_off[i];
  }
  const RowMatrix composed = as_matrix(p3) * mm * as_matrix(p7);
  r.chapman_kolmogorov = (composed - as_matrix(p1)).cwiseAbs().maxCoeff();

  r.lambda0 = spec.lambda(0);
  r.min_eigenvalue = *std::min_element(spec.eigenvalues().begin(), spec.eigenvalues().end());
  RowMatrix phi(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) phi(i, k) = spec.phi(k, i);
  const RowMatrix gram = phi.transpose() * mm * phi;
  r.orthonormality = (gram - RowMatrix::Identity(n, n)).cwiseAbs().maxCoeff();

  r.pass = r.kernel_symmetric && r.constant_residual == 0.0 && r.mu_symmetry <= opts.form_tol &&
           r.row_stochasticity <= opts.tol && r.chapman_kolmogorov <= opts.tol &&
           std::abs(r.lambda0) <= opts.ground_tol && r.min_eigenvalue >= -opts.ground_tol &&
           r.orthonormality <= opts.ground_tol && r.min_diagonal > 0;
  return r;
}

OndiagReport verify_ondiag(const KernelSpectrum& spec, const Weight& weight, double p, std::span<const double> t_grid,
                           const SlopeFitOptions& opts) {
  check_t_grid(t_grid, "verify_ondiag");
  const auto v = weight_on_grid(weight, spec.grid());
  OndiagReport r;
  r.p = p;
  r.t.assign(t_grid.begin(), t_grid.end());
  r.used.assign(t_grid.size(), true);
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    const auto diag = spec.heat_kernel_diagonal(t_grid[k]);
    double m = 0.0;
    for (std::size_t i = 0; i < diag.size(); ++i) m = std::max(m, diag[i] / (v[i] * v[i]));
    r.sup_ratio.push_back(m);
  }
  for (std::size_t k = 0; k < std::min<std::size_t>(2, t_grid.size()); ++k)
    if (spec.row_stochasticity_residual(t_grid[k]) > opts.stochasticity_tol) r.used[k] = false;

  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    if (!r.used[k]) continue;
    lx.push_back(std::log(1.0 / t_grid[k]));
    ly.push_back(std::log(r.sup_ratio[k]));
    r.constant = std::max(r.constant, r.sup_ratio[k] * std::pow(t_grid[k], p));
  }
  if (lx.size() < 2) return r;
  r.slope = fit_line(lx, ly).slope;
  r.pass = std::isfinite(r.slope) && r.slope <= p + opts.slope_slack;
  return r;
}

std::vector<kernels::NodePair> pair_grid(const Grid1D& grid, double radius, std::size_t stride) {
  if (stride == 0) throw InputError("pair_grid: stride must be >= 1");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < grid.size(); i += stride)
    if (std::abs(grid[i]) <= radius) idx.push_back(i);
  std::vector<kernels::NodePair> pairs;
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = a; b < idx.size(); ++b) pairs.push_back({idx[a], idx[b]});
  return pairs;
}

BoundReport verify_offdiag(const KernelSpectrum& spec, const Weight& weight, double p, double epsilon,
                           std::span<const double> t_grid, std::span<const kernels::NodePair> pairs,
                           const OffdiagOptions& opts) {
  if (!(epsilon >= 0) || !std::isfinite(epsilon)) throw ParameterError("verify_offdiag: epsilon must be >= 0");
  if (epsilon == 0 && !opts.allow_zero_epsilon)
    throw ParameterError("verify_offdiag: epsilon = 0 is only admissible for the heat-semigroup baseline");
  if (pairs.empty()) throw InputError("verify_offdiag: empty pair grid");
  check_t_grid(t_grid, "verify_offdiag");

  const auto& grid = spec.grid();
  const auto v = weight_on_grid(weight, grid);
  BoundReport r;
  r.epsilon = epsilon;
  r.p = p;
  r.t.assign(t_grid.begin(), t_grid.end());
  const double small_limit = 10.0 * t_grid.front();
  bool have_rest = false;
  std::vector<double> values(pairs.size());
  std::size_t row_counter = 0;
  for (double t : t_grid) {
    kernels::omp::heat_kernel_pairs(spec.view(), t, 0, pairs, values);
    double sup = 0.0;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const double x = grid[pairs[k].i], y = grid[pairs[k].j];
      const double gauss = std::exp(-(x - y) * (x - y) / (4.0 * (1.0 + epsilon) * t));
      if (gauss < opts.gauss_floor) {
        ++r.excluded_cells;
        continue;
      }
      ++r.evaluated_cells;
      const double env = std::pow(t, -p) * v[pairs[k].i] * v[pairs[k].j] * gauss;
      const double ratio = values[k] / env;
      sup = std::max(sup, ratio);
      if (opts.csv_stride > 0 && row_counter++ % opts.csv_stride == 0)
        r.rows.push_back({x, y, t, values[k], env, ratio});
    }
    r.sup_ratio.push_back(sup);
    r.sup_overall = std::max(r.sup_overall, sup);
    if (t <= small_limit) {
      r.sup_small_decade = std::max(r.sup_small_decade, sup);
    } else {
      r.sup_rest = std::max(r.sup_rest, sup);
      have_rest = true;
    }
  }
  const bool finite = std::isfinite(r.sup_overall) && r.sup_overall > 0;
  r.pass = finite && (!have_rest || r.sup_small_decade <= opts.blowup_factor * r.sup_rest);
  return r;
}

LongtimeReport verify_longtime(const KernelSpectrum& spec, const Weight& weight, std::span<const double> t_grid,
                               const LongtimeOptions& opts) {
  check_t_grid(t_grid, "verify_longtime");
  const auto v = weight_on_grid(weight, spec.grid());
  const std::size_t n = spec.size();
  LongtimeReport r;
  r.lambda1 = spec.spectral_gap();
  r.t.assign(t_grid.begin(), t_grid.end());
  bool below = false;
  std::vector<double> xs, ys;
  for (double t : t_grid) {
    const auto dev = spec.deviation_kernel(t);
    double sup = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) sup = std::max(sup, std::abs(dev(i, j)) / (v[i] * v[j]));
    r.sup_deviation.push_back(sup);
    below = below || !(sup >= opts.floor);
    r.used.push_back(!below);
    if (!below) {
      xs.push_back(t);
      ys.push_back(std::log(sup));
    }
  }
  if (xs.size() < 2) return r;
  r.decay_rate = -fit_line(xs, ys).slope;
  r.pass = r.lambda1 > 0 && r.decay_rate >= opts.rate_fraction * r.lambda1;
  return r;
}

PoincareReport poincare_gap(const Potential& potential, const std::function<double(double)>& omega, std::size_t n,
                            double radius, const GeneratorOptions& opts) {
  const auto gen = build_weighted_generator(potential, omega, n, radius, opts);
  const auto pencil = solve_pencil(gen, false, "poincare_gap");
  return {pencil.lambda(0), pencil.lambda(1), n, radius};
}

// ---------------------------------------------------------------------------

double TwistFunction::value(double x) const {
  const double ax = std::abs(x), s = x < 0 ? -1.0 : 1.0;
  if (ax <= r) return x;
  const double tau = (ax - r) / w;
  if (tau >= 1.0) return s * sup_abs();
  return s * (r + w * (tau - 2.0 * tau * tau * tau / 3.0 + std::pow(tau, 5) / 5.0));
}

double TwistFunction::d1(double x) const {
  const double ax = std::abs(x);
  if (ax <= r) return 1.0;
  const double tau = (ax - r) / w;
  if (tau >= 1.0) return 0.0;
  return (1.0 - tau * tau) * (1.0 - tau * tau);
}

double TwistFunction::d2(double x) const {
  const double ax = std::abs(x), s = x < 0 ? -1.0 : 1.0;
  if (ax <= r) return 0.0;
  const double tau = (ax - r) / w;
  if (tau >= 1.0) return 0.0;
  return -s * 4.0 * tau * (1.0 - tau * tau) / w;
}

double TwistFunction::rho() const {
  // max of 4 τ (1 − τ²) on [0, 1] is attained at τ = 1/√3.
  return 8.0 / (3.0 * std::sqrt(3.0) * w);
}

TwistReport davies_twist_check(const KernelSpectrum& spec, const DiscretizedGenerator& gen, const Weight& weight,
                               std::span<const double> a_values, const TwistFunction& psi,
                               std::span<const double> t_grid, double p, const TwistOptions& opts) {
  if (a_values.size() < 3) throw InputError("davies_twist_check: need at least 3 twist parameters");
  if (!(psi.r >= 0) || !(psi.w > 0)) throw InputError("davies_twist_check: bad twist function");
  if (gen.size() != spec.size()) throw InputError("davies_twist_check: generator and spectrum differ");
  check_t_grid(t_grid, "davies_twist_check");
  constexpr double kMaxExponent = 700.0;
  const double psi_sup = psi.sup_abs();
  double a_max = 0.0;
  for (double a : a_values) a_max = std::max(a_max, std::abs(a));
  if (a_max * psi_sup > kMaxExponent)
    throw TwistError("davies_twist_check: e^{a psi} overflows; max admissible |a| = " +
                     std::to_string(kMaxExponent / psi_sup));

  const auto& grid = spec.grid();
  const std::size_t n = spec.size();
  const auto v = weight_on_grid(weight, grid);
  std::vector<double> ps(n);
  for (std::size_t i = 0; i < n; ++i) ps[i] = psi.value(grid[i]);
  std::vector<std::size_t> centre;
  for (std::size_t i = 0; i < n; ++i)
    if (opts.center_radius <= 0 || std::abs(grid[i]) <= opts.center_radius) centre.push_back(i);
  if (centre.empty()) throw InputError("davies_twist_check: no nodes in the central region");

  TwistReport r;
  r.a.assign(a_values.begin(), a_values.end());
  r.t.assign(t_grid.begin(), t_grid.end());
  r.p = p;
  r.rho = psi.rho();
  const std::size_t na = a_values.size();
  r.growth.assign(na, {});
  r.y.assign(na, {});

  for (double t : t_grid) {
    const auto table = spec.heat_kernel(t);
    for (std::size_t ia = 0; ia < na; ++ia) {
      const double a = a_values[ia];
      // Unit-V-mass point masses f = δ_j / (m_j V_j) are the extreme points of the
      // admissible set, so both suprema reduce to a sup over j.
      std::vector<double> g(n);
      for (std::size_t i = 0; i < n; ++i) g[i] = v[i] * std::exp(-a * ps[i]);
      const auto pg = spec.apply_semigroup(g, t);
      double growth = 0.0, y = 0.0;
      for (std::size_t j : centre) {
        growth = std::max(growth, pg[j] / g[j]);
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double e = std::exp(-a * ps[i]) * table(i, j);
          acc += spec.mass()[i] * e * e;
        }
        const double lift = std::exp(a * ps[j]) / v[j];
        y = std::max(y, acc * lift * lift);
      }
      r.growth[ia].push_back(growth);
      r.y[ia].push_back(y);
    }
  }

  std::vector<double> lx, ly;
  for (double t : t_grid)
    if (t <= 1.0) lx.push_back(std::log(1.0 / t));
  for (std::size_t ia = 0; ia < na; ++ia) {
    double k = -std::numeric_limits<double>::infinity();
    for (std::size_t it = 0; it < t_grid.size(); ++it) k = std::max(k, std::log(r.growth[ia][it]) / t_grid[it]);
    r.k_hat.push_back(k);

    ly.clear();
    for (std::size_t it = 0; it < t_grid.size(); ++it)
      if (t_grid[it] <= 1.0) ly.push_back(std::log(r.y[ia][it]));
    r.y_slope.push_back(lx.size() >= 2 ? fit_line(lx, ly).slope : std::numeric_limits<double>::quiet_NaN());

    const double tl = t_grid.back();
    const double c_hat = r.y[ia].back() * std::pow(tl, p) * std::exp(-2.0 * k * tl);
    r.c_hat.push_back(c_hat);
    bool holds = true;
    for (std::size_t it = 0; it < t_grid.size(); ++it) {
      const double t = t_grid[it];
      holds = holds && r.y[ia][it] <= c_hat * std::pow(t, -p) * std::exp(2.0 * k * t) * (1.0 + 1e-9);
    }
    r.y_bound_holds.push_back(holds);
  }
  r.k_fit = fit_quadratic(r.a, r.k_hat);
  const bool y_ok = std::isfinite(r.y_slope.front()) && r.y_slope.front() <= p + opts.slope_slack;
  r.pass = r.k_fit.c2 >= opts.quad_lo && r.k_fit.c2 <= opts.quad_hi && y_ok;
  return r;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const InvariantReport& r) {
  return {{"kernel_symmetric", r.kernel_symmetric},
          {"constant_residual", r.constant_residual},
          {"mu_symmetry", r.mu_symmetry},
          {"row_stochasticity", r.row_stochasticity},
          {"chapman_kolmogorov", r.chapman_kolmogorov},
          {"lambda0", r.lambda0},
          {"min_eigenvalue", r.min_eigenvalue},
          {"orthonormality", r.orthonormality},
          {"min_diagonal", r.min_diagonal},
          {"pass", r.pass}};
}

nlohmann::json to_json(const OndiagReport& r) {
  return {{"t", r.t},         {"sup_ratio", r.sup_ratio}, {"used", r.used},
          {"slope", r.slope}, {"C", r.constant},          {"p", r.p},
          {"pass", r.pass}};
}

nlohmann::json to_json(const BoundReport& r) {
  return {{"t", r.t},
          {"sup_ratio", r.sup_ratio},
          {"sup_overall", r.sup_overall},
          {"sup_small_decade", r.sup_small_decade},
          {"sup_rest", r.sup_rest},
          {"excluded_cells", r.excluded_cells},
          {"evaluated_cells", r.evaluated_cells},
          {"epsilon", r.epsilon},
          {"p", r.p},
          {"pass", r.pass}};
}

nlohmann::json to_json(const LongtimeReport& r) {
  return {{"t", r.t},
          {"sup_deviation", r.sup_deviation},
          {"used", r.used},
          {"K_hat", r.decay_rate},
          {"lambda1", r.lambda1},
          {"pass", r.pass}};
}

nlohmann::json to_json(const PoincareReport& r) {
  return {{"lambda0", r.lambda0}, {"lambda1", r.lambda1}, {"N", r.n}, {"R", r.radius}};
}

nlohmann::json to_json(const TwistReport& r) {
  return {{"a", r.a},
          {"t", r.t},
          {"K_hat", r.k_hat},
          {"growth", r.growth},
          {"y", r.y},
          {"y_slope", r.y_slope},
          {"C_hat", r.c_hat},
          {"y_bound_holds", r.y_bound_holds},
          {"K_fit", {{"c0", r.k_fit.c0}, {"c1", r.k_fit.c1}, {"c2", r.k_fit.c2}}},
          {"p", r.p},
          {"rho", r.rho},
          {"pass", r.pass}};
}

}  // namespace hkb
