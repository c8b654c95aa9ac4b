#include "detail.hpp"

namespace hkb::kernels::serial {

void heat_kernel_table(const SpectralView& s, double t, std::size_t first_mode, SymmetricTable& out) {
  const auto w = detail::decay_weights(s, t, first_mode);
  out.resize(s.n);
  for (std::size_t i = 0; i < s.n; ++i)
    for (std::size_t j = i; j < s.n; ++j) {
      const double v = detail::kernel_entry(s, w, first_mode, i, j);
      out.at(i, j) = v;
      out.at(j, i) = v;
    }
}

void heat_kernel_diagonal(const SpectralView& s, double t, std::size_t first_mode, std::span<double> out) {
  const auto w = detail::decay_weights(s, t, first_mode);
  for (std::size_t i = 0; i < s.n; ++i) out[i] = detail::kernel_entry(s, w, first_mode, i, i);
}

void heat_kernel_pairs(const SpectralView& s, double t, std::size_t first_mode, std::span<const NodePair> pairs,
                       std::span<double> out) {
  const auto w = detail::decay_weights(s, t, first_mode);
  for (std::size_t k = 0; k < pairs.size(); ++k)
    out[k] = detail::kernel_entry(s, w, first_mode, pairs[k].i, pairs[k].j);
}

void kde(std::span<const double> sorted_samples, double bandwidth, std::span<const double> at,
         std::span<double> out) {
  for (std::size_t i = 0; i < at.size(); ++i) out[i] = detail::kde_point(sorted_samples, bandwidth, at[i]);
}

EulerMaruyamaResult euler_maruyama(const EulerMaruyamaSetup& setup, std::size_t n_paths) {
  EulerMaruyamaResult r;
  r.samples.assign(n_paths, 0.0);
  const std::size_t chunks = (n_paths + setup.chunk - 1) / setup.chunk;
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t b = c * setup.chunk, e = std::min(n_paths, b + setup.chunk);
    r.reflected_paths += detail::euler_chunk(setup, c, b, e, r.samples.data());
  }
  return r;
}

void for_each_index(std::size_t count, const std::function<void(std::size_t)>& task) {
  for (std::size_t k = 0; k < count; ++k) task(k);
}

}  // namespace hkb::kernels::serial
