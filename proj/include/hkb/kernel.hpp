#pragma once

// Self-adjoint discretization of L = Δ − U'·∇ on [-R, R] with zero-flux ends,
// its spectral decomposition in L^2(μ), the heat kernel density w.r.t. μ, and
// numerical checks of the on-diagonal, Gaussian off-diagonal, long-time,
// weighted Poincaré and exponential-twist bounds.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "hkb/grid.hpp"
#include "hkb/kernels.hpp"
#include "hkb/potentials.hpp"
#include "hkb/weight.hpp"

namespace hkb {

enum class Exec { serial, parallel };

struct GeneratorOptions {
  // Box mass must be at least (1 − truncation_tol) of the mass on the whole line.
  // A value >= 1 disables the check (compact state space, e.g. a flat potential).
  double truncation_tol = 1e-6;
  // Edge density over peak density considered a well-resolved tail (reported only).
  double edge_density_ratio = 1e-12;
  // Share of the consistent P1 mass matrix in the mass form; the rest is lumped.
  // One half cancels the leading h^2 error of the kernel, 0 gives a diagonal mass.
  double consistent_mass = 0.5;
};

/// P1 finite elements for L = Δ − U'·∇ on a uniform grid: stiffness
/// (Af)_i = −[c_i (f_{i+1} − f_i) + c_{i−1} (f_{i−1} − f_i)] with c_i = ∫ ω e^{−U} / h² over
/// edge i, and a tridiagonal mass matrix M whose rows sum to the lumped masses m_i. L = −M^{-1} A.
class DiscretizedGenerator {
 public:
  Grid1D grid;
  Potential potential;              // normalized so that the trapezoid mass on the box is one
  std::vector<double> mass;         // m_i = ∫ φ_i dμ, Σ m_i = 1; quadrature weights for μ
  std::vector<double> mass_off;     // M_{i,i+1}; M_ii = m_i − M_{i,i−1} − M_{i,i+1}
  std::vector<double> conductance;  // c_i on edge (i, i+1), from ∫ f' g' ω dμ
  double box_mass_fraction = 1.0;
  double edge_density = 0.0;  // max(e^{-U(±R)}) / max e^{-U}
  bool edge_density_resolved = true;

  std::size_t size() const { return grid.size(); }
  /// L f = −M^{-1} A f.
  std::vector<double> apply(std::span<const double> f) const;
  /// Σ_i c_i (f_{i+1} − f_i)(g_{i+1} − g_i).
  double dirichlet(std::span<const double> f, std::span<const double> g) const;
  /// f' M g.
  double inner(std::span<const double> f, std::span<const double> g) const;
  std::vector<double> mass_apply(std::span<const double> f) const;
  double mass_diag(std::size_t i) const;

 private:
  friend DiscretizedGenerator build_weighted_generator(const Potential&, const std::function<double(double)>&,
                                                       std::size_t, double, const GeneratorOptions&);
  DiscretizedGenerator(Grid1D g, Potential p) : grid(std::move(g)), potential(std::move(p)) {}
};

DiscretizedGenerator build_generator(const Potential& potential, std::size_t n, double radius,
                                     const GeneratorOptions& opts = {});

/// Same with the Dirichlet form ∫ |f'|^2 ω dμ (ω evaluated at edge midpoints).
DiscretizedGenerator build_weighted_generator(const Potential& potential, const std::function<double(double)>& omega,
                                              std::size_t n, double radius, const GeneratorOptions& opts = {});

/// Eigenpairs of A φ = λ M φ, orthonormal in the mass form; φ_k are nodal values of
/// the P1 eigenfunctions, so the kernel below is exact between nodes by linear interpolation.
class KernelSpectrum {
 public:
  explicit KernelSpectrum(const DiscretizedGenerator& gen);

  std::size_t size() const { return n_; }
  const Grid1D& grid() const { return grid_; }
  const std::vector<double>& eigenvalues() const { return lambda_; }
  const std::vector<double>& mass() const { return mass_; }
  double lambda(std::size_t k) const { return lambda_[k]; }
  double spectral_gap() const { return lambda_.at(1); }
  /// φ_k(x_i), normalized so that φ_k' M φ_l = δ_kl.
  double phi(std::size_t k, std::size_t i) const { return phi_[i * n_ + k]; }
  const std::vector<double>& mass_off() const { return mass_off_; }
  /// M f.
  std::vector<double> mass_apply(std::span<const double> f) const;
  /// φ_k at an arbitrary x in the box, by linear interpolation.
  double phi_at(std::size_t k, double x) const;
  kernels::SpectralView view() const;

  /// p_t(x_i, x_j) as a symmetric table.
  kernels::SymmetricTable heat_kernel(double t, Exec exec = Exec::parallel) const;
  /// p_t(x_i, x_j) − 1, summed without the constant mode.
  kernels::SymmetricTable deviation_kernel(double t, Exec exec = Exec::parallel) const;
  std::vector<double> heat_kernel_diagonal(double t, Exec exec = Exec::parallel) const;
  /// p_t(x, x_j) for every node j, x anywhere in the box.
  std::vector<double> heat_kernel_row(double x, double t) const;
  /// (P_t g)(x_i) = Σ_j p_t(x_i, x_j) (M g)_j.
  std::vector<double> apply_semigroup(std::span<const double> g, double t) const;
  /// max_i |Σ_j p_t(x_i, x_j) m_j − 1| from the spectral sum.
  double row_stochasticity_residual(double t) const;

 private:
  std::size_t n_ = 0;
  Grid1D grid_;
  std::vector<double> lambda_;
  std::vector<double> phi_;  // row-major, phi_[i * n + k] = φ_k(x_i)
  std::vector<double> mass_;
  std::vector<double> mass_off_;
  std::vector<double> unit_;       // all ones; the view's mass scaling is folded into phi_
  std::vector<double> mode_mass_;  // Σ_i φ_k(x_i) m_i
};

inline KernelSpectrum compute_spectrum(const DiscretizedGenerator& gen) { return KernelSpectrum(gen); }

struct InvariantOptions {
  double tol = 1e-8;          // row sums and Chapman–Kolmogorov
  double ground_tol = 1e-10;  // λ₀ and orthonormality
  double form_tol = 1e-12;    // μ-symmetry of the generator, relative
  std::uint64_t seed = 0;
};

struct InvariantReport {
  bool kernel_symmetric = false;  // bitwise, at every t checked
  double constant_residual = 0.0;  // max |L 1|
  double mu_symmetry = 0.0;        // |<Lf,g> − <f,Lg>| / (|<Lf,g>| + |<f,Lg>|), random f, g
  double row_stochasticity = 0.0;  // max over t ∈ {0.1, 0.5, 1} and rows
  double chapman_kolmogorov = 0.0;  // max |p_1 − p_0.3 M p_0.7|
  double lambda0 = 0.0;
  double min_eigenvalue = 0.0;
  double orthonormality = 0.0;  // max |φ_k' M φ_l − δ_kl|
  double min_diagonal = 0.0;    // min p_t(x, x) over the same t
  bool pass = false;
};

InvariantReport check_invariants(const DiscretizedGenerator& gen, const KernelSpectrum& spec,
                                 const InvariantOptions& opts = {});

struct SlopeFitOptions {
  double slope_slack = 0.3;
  double stochasticity_tol = 1e-6;
};

struct OndiagReport {
  std::vector<double> t;
  std::vector<double> sup_ratio;  // m(t) = sup_x p_t(x,x) / V(x)^2
  std::vector<bool> used;
  double slope = 0.0;
  double constant = 0.0;  // sup_t m(t) t^p
  double p = 0.0;
  bool pass = false;
};

/// Fits the slope of log m(t) against log(1/t).
OndiagReport verify_ondiag(const KernelSpectrum& spec, const Weight& weight, double p, std::span<const double> t_grid,
                           const SlopeFitOptions& opts = {});

struct OffdiagOptions {
  double gauss_floor = 1e-8;   // cells whose Gaussian factor is below this are excluded
  double blowup_factor = 3.0;  // sup over the smallest-t decade vs sup over larger t
  bool allow_zero_epsilon = false;
  std::size_t csv_stride = 1;
};

struct OffdiagRow {
  double x, y, t, p, envelope, ratio;
};

struct BoundReport {
  std::vector<double> t;
  std::vector<double> sup_ratio;  // per t
  double sup_overall = 0.0;
  double sup_small_decade = 0.0;
  double sup_rest = 0.0;
  std::size_t excluded_cells = 0;
  std::size_t evaluated_cells = 0;
  double epsilon = 0.0;
  double p = 0.0;
  bool pass = false;
  std::vector<OffdiagRow> rows;  // subsampled table for CSV export
};

/// Pairs of grid nodes with |x|, |y| <= radius, every `stride`-th node.
std::vector<kernels::NodePair> pair_grid(const Grid1D& grid, double radius, std::size_t stride);

BoundReport verify_offdiag(const KernelSpectrum& spec, const Weight& weight, double p, double epsilon,
                           std::span<const double> t_grid, std::span<const kernels::NodePair> pairs,
                           const OffdiagOptions& opts = {});

struct LongtimeReport {
  std::vector<double> t;
  std::vector<double> sup_deviation;  // sup |p_t − 1| / (V(x) V(y))
  std::vector<bool> used;
  double decay_rate = 0.0;
  double lambda1 = 0.0;
  bool pass = false;
};

struct LongtimeOptions {
  double floor = 1e-12;
  double rate_fraction = 0.9;
};

LongtimeReport verify_longtime(const KernelSpectrum& spec, const Weight& weight, std::span<const double> t_grid,
                               const LongtimeOptions& opts = {});

struct PoincareReport {
  double lambda0 = 0.0;
  double lambda1 = 0.0;
  std::size_t n = 0;
  double radius = 0.0;
};

/// Smallest nonzero eigenvalue of ∫ |f'|^2 ω dμ against ∫ f^2 dμ on the box.
PoincareReport poincare_gap(const Potential& potential, const std::function<double(double)>& omega, std::size_t n,
                            double radius, const GeneratorOptions& opts = {});

/// ψ(x) = x on [-r, r], flattened to a constant on |x| >= r + w by the
/// quintic ψ = r + w (τ − 2τ^3/3 + τ^5/5), τ = (|x| − r)/w; odd in x.
struct TwistFunction {
  double r = 2.0;
  double w = 2.0;

  double value(double x) const;
  double d1(double x) const;
  double d2(double x) const;
  double sup_abs() const { return r + w * (1.0 - 2.0 / 3.0 + 1.0 / 5.0); }
  /// Bound on |ψ''|.
  double rho() const;
};

struct TwistOptions {
  double slope_slack = 0.3;
  double quad_lo = 0.5;
  double quad_hi = 1.2;
  double center_radius = 0.0;  // sup over nodes with |x| <= this; 0 uses every node
};

struct TwistReport {
  std::vector<double> a;
  std::vector<double> t;
  std::vector<double> k_hat;                // per a
  std::vector<std::vector<double>> growth;  // per a, per t: sup_f ∫ F(t) V dμ
  std::vector<std::vector<double>> y;       // per a, per t: sup over unit-V-mass deltas of ∫ F(t)^2 dμ
  std::vector<double> y_slope;              // per a, slope of log y vs log(1/t)
  std::vector<double> c_hat;                // per a, calibrated at the largest t
  std::vector<bool> y_bound_holds;          // per a
  QuadraticFit k_fit;
  double p = 0.0;
  double rho = 0.0;
  bool pass = false;
};

TwistReport davies_twist_check(const KernelSpectrum& spec, const DiscretizedGenerator& gen, const Weight& weight,
                               std::span<const double> a_values, const TwistFunction& psi,
                               std::span<const double> t_grid, double p, const TwistOptions& opts = {});

nlohmann::json to_json(const InvariantReport& r);
nlohmann::json to_json(const OndiagReport& r);
nlohmann::json to_json(const BoundReport& r);
nlohmann::json to_json(const LongtimeReport& r);
nlohmann::json to_json(const PoincareReport& r);
nlohmann::json to_json(const TwistReport& r);

}  // namespace hkb
