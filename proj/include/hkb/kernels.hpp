#pragma once

// Data-parallel inner loops. Every kernel has a serial reference in
// hkb::kernels::serial and an OpenMP version in hkb::kernels::omp with the
// same per-element arithmetic, so both produce bit-identical results.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace hkb::kernels {

/// Dense symmetric n×n table, row-major. Entries (i, j) and (j, i) are the same double.
struct SymmetricTable {
  std::size_t n = 0;
  std::vector<double> data;

  void resize(std::size_t size) {
    n = size;
    data.assign(size * size, 0.0);
  }
  double operator()(std::size_t i, std::size_t j) const { return data[i * n + j]; }
  double& at(std::size_t i, std::size_t j) { return data[i * n + j]; }
};

/// Spectral data: modes stored row-major as q[i * modes + k], eigenvalues lambda[k],
/// and a per-node factor s_i applied as p(i, j) = s_i s_j Σ_k e^{−lambda_k t} q_ik q_jk
/// (all ones when the modes are already orthonormal in the mass form).
struct SpectralView {
  std::size_t n = 0;
  std::size_t modes = 0;
  std::span<const double> lambda;
  std::span<const double> q;
  std::span<const double> inv_sqrt_mass;
};

/// Index pair for sparse kernel evaluation.
struct NodePair {
  std::size_t i = 0;
  std::size_t j = 0;
};

/// Per-chunk state of the Euler–Maruyama integrator.
struct EulerMaruyamaSetup {
  std::function<double(double)> drift;  // −U'(x)
  double x0 = 0.0;
  std::span<const double> starts;  // per-path initial points; overrides x0 when non-empty
  double dt = 1e-3;
  std::size_t steps = 0;
  double reflect_at = 0.0;  // reflecting barrier at ±reflect_at (0 disables)
  std::uint64_t seed = 0;
  std::size_t chunk = 4096;
};

struct EulerMaruyamaResult {
  std::vector<double> samples;
  std::size_t reflected_paths = 0;
};

namespace serial {

/// The table of p(i, j), summing modes k >= first_mode.
void heat_kernel_table(const SpectralView& s, double t, std::size_t first_mode, SymmetricTable& out);
void heat_kernel_diagonal(const SpectralView& s, double t, std::size_t first_mode, std::span<double> out);
void heat_kernel_pairs(const SpectralView& s, double t, std::size_t first_mode, std::span<const NodePair> pairs,
                       std::span<double> out);

/// Gaussian kernel density at each evaluation point; samples must be sorted.
void kde(std::span<const double> sorted_samples, double bandwidth, std::span<const double> at,
         std::span<double> out);

EulerMaruyamaResult euler_maruyama(const EulerMaruyamaSetup& setup, std::size_t n_paths);

/// out[k] = task(k) for k in [0, count).
void for_each_index(std::size_t count, const std::function<void(std::size_t)>& task);

}  // namespace serial

namespace omp {

void heat_kernel_table(const SpectralView& s, double t, std::size_t first_mode, SymmetricTable& out);
void heat_kernel_diagonal(const SpectralView& s, double t, std::size_t first_mode, std::span<double> out);
void heat_kernel_pairs(const SpectralView& s, double t, std::size_t first_mode, std::span<const NodePair> pairs,
                       std::span<double> out);
void kde(std::span<const double> sorted_samples, double bandwidth, std::span<const double> at,
         std::span<double> out);
EulerMaruyamaResult euler_maruyama(const EulerMaruyamaSetup& setup, std::size_t n_paths);
void for_each_index(std::size_t count, const std::function<void(std::size_t)>& task);

}  // namespace omp

/// Number of OpenMP threads available (1 when built without OpenMP).
int max_threads();

}  // namespace hkb::kernels
