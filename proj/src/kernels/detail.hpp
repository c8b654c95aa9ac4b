#pragma once

// Per-element arithmetic shared by the serial and OpenMP kernels.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "hkb/kernels.hpp"

namespace hkb::kernels::detail {

inline std::vector<double> decay_weights(const SpectralView& s, double t, std::size_t first_mode) {
  std::vector<double> w(s.modes, 0.0);
  for (std::size_t k = first_mode; k < s.modes; ++k) w[k] = std::exp(-s.lambda[k] * t);
  return w;
}

inline double kernel_entry(const SpectralView& s, const std::vector<double>& w, std::size_t first_mode,
                           std::size_t i, std::size_t j) {
  const double* qi = s.q.data() + i * s.modes;
  const double* qj = s.q.data() + j * s.modes;
  double acc = 0.0;
  for (std::size_t k = first_mode; k < s.modes; ++k) acc += w[k] * qi[k] * qj[k];
  return acc * s.inv_sqrt_mass[i] * s.inv_sqrt_mass[j];
}

inline double kde_point(std::span<const double> sorted, double bw, double x) {
  constexpr double kCut = 8.0;
  const auto lo = std::lower_bound(sorted.begin(), sorted.end(), x - kCut * bw);
  const auto hi = std::upper_bound(lo, sorted.end(), x + kCut * bw);
  double acc = 0.0;
  for (auto it = lo; it != hi; ++it) {
    const double z = (x - *it) / bw;
    acc += std::exp(-0.5 * z * z);
  }
  return acc / (static_cast<double>(sorted.size()) * bw * std::sqrt(2.0 * std::numbers::pi));
}

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Simulates paths [begin, end) of chunk `chunk`; returns the number of reflected paths.
inline std::size_t euler_chunk(const EulerMaruyamaSetup& st, std::size_t chunk, std::size_t begin,
                               std::size_t end, double* out) {
  std::mt19937_64 rng(splitmix64(st.seed ^ splitmix64(static_cast<std::uint64_t>(chunk) + 1)));
  std::normal_distribution<double> normal(0.0, 1.0);
  const double noise = std::sqrt(2.0 * st.dt);
  const double b = st.reflect_at;
  std::size_t reflected = 0;
  for (std::size_t p = begin; p < end; ++p) {
    double x = st.starts.empty() ? st.x0 : st.starts[p];
    bool hit = false;
    for (std::size_t n = 0; n < st.steps; ++n) {
      x += st.drift(x) * st.dt + noise * normal(rng);
      if (b > 0) {
        while (x > b || x < -b) {
          x = (x > b) ? 2.0 * b - x : -2.0 * b - x;
          hit = true;
        }
      }
    }
    out[p] = x;
    reflected += hit ? 1 : 0;
  }
  return reflected;
}

}  // namespace hkb::kernels::detail
