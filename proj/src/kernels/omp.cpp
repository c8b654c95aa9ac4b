#include <omp.h>

#include "detail.hpp"

namespace hkb::kernels {

int max_threads() { return omp_get_max_threads(); }

namespace omp {

void heat_kernel_table(const SpectralView& s, double t, std::size_t first_mode, SymmetricTable& out) {
  const auto w = detail::decay_weights(s, t, first_mode);
  out.resize(s.n);
  const auto n = static_cast<std::ptrdiff_t>(s.n);
#pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t ii = 0; ii < n; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    for (std::size_t j = i; j < s.n; ++j) {
      const double v = detail::kernel_entry(s, w, first_mode, i, j);
      out.at(i, j) = v;
      out.at(j, i) = v;
    }
  }
}

void heat_kernel_diagonal(const SpectralView& s, double t, std::size_t first_mode, std::span<double> out) {
  const auto w = detail::decay_weights(s, t, first_mode);
  const auto n = static_cast<std::ptrdiff_t>(s.n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    out[i] = detail::kernel_entry(s, w, first_mode, static_cast<std::size_t>(i), static_cast<std::size_t>(i));
}

void heat_kernel_pairs(const SpectralView& s, double t, std::size_t first_mode, std::span<const NodePair> pairs,
                       std::span<double> out) {
  const auto w = detail::decay_weights(s, t, first_mode);
  const auto n = static_cast<std::ptrdiff_t>(pairs.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < n; ++k) out[k] = detail::kernel_entry(s, w, first_mode, pairs[k].i, pairs[k].j);
}

void kde(std::span<const double> sorted_samples, double bandwidth, std::span<const double> at,
         std::span<double> out) {
  const auto n = static_cast<std::ptrdiff_t>(at.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = detail::kde_point(sorted_samples, bandwidth, at[i]);
}

EulerMaruyamaResult euler_maruyama(const EulerMaruyamaSetup& setup, std::size_t n_paths) {
  EulerMaruyamaResult r;
  r.samples.assign(n_paths, 0.0);
  const auto chunks = static_cast<std::ptrdiff_t>((n_paths + setup.chunk - 1) / setup.chunk);
  std::size_t reflected = 0;
#pragma omp parallel for schedule(dynamic, 1) reduction(+ : reflected)
  for (std::ptrdiff_t c = 0; c < chunks; ++c) {
    const std::size_t b = static_cast<std::size_t>(c) * setup.chunk, e = std::min(n_paths, b + setup.chunk);
    reflected += detail::euler_chunk(setup, static_cast<std::size_t>(c), b, e, r.samples.data());
  }
  r.reflected_paths = reflected;
  return r;
}

void for_each_index(std::size_t count, const std::function<void(std::size_t)>& task) {
  const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t k = 0; k < n; ++k) task(static_cast<std::size_t>(k));
}

}  // namespace omp
}  // namespace hkb::kernels
