#pragma once

// Euler–Maruyama simulation of dX = −U'(X) dt + √2 dB with reflection far out
// at ±10R, and comparison of the terminal law with the spectral kernel.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"

#include "hkb/kernel.hpp"
#include "hkb/potentials.hpp"

namespace hkb {

struct SimConfig {
  std::size_t n_paths = 100000;
  double dt = 1e-3;
  double t_final = 0.5;
  double x0 = 0.0;
  std::uint64_t seed = 0;
};

struct SimResult {
  std::vector<double> samples;
  std::size_t steps = 0;
  double dt = 0.0;  // effective step, t_final / steps
  std::size_t escaped = 0;
  double reflect_at = 0.0;
  // dt <= 0.01 min(1, 1/sup|U''|) on the box; reported, not enforced.
  double dt_heuristic = 0.0;
  bool dt_heuristic_ok = true;
};

/// Terminal samples X_{t_final}. box_radius is the kernel box R; paths reflect at ±10R
/// and more than 0.1% reflected paths raise SimError.
SimResult simulate(const Potential& potential, const SimConfig& cfg, double box_radius, Exec exec = Exec::parallel);

/// Same with one initial point per path (n_paths = starts.size()).
SimResult simulate_from(const Potential& potential, std::span<const double> starts, const SimConfig& cfg,
                        double box_radius, Exec exec = Exec::parallel);

/// 0.9 min(σ, IQR/1.34) n^{-1/5}.
double silverman_bandwidth(std::span<const double> samples);

struct DensityComparison {
  double l1 = 0.0;
  double bandwidth = 0.0;
  double outside_mass = 0.0;  // fraction of samples outside the box
  std::vector<double> x;
  std::vector<double> kde;       // Lebesgue density
  std::vector<double> spectral;  // p_t(x0, x) e^{-U(x)}, Lebesgue density
};

/// L¹ distance between the KDE of the samples and the spectral row p_t(x0, ·),
/// both as densities w.r.t. Lebesgue measure on the box.
DensityComparison compare_density(std::span<const double> samples, const KernelSpectrum& spectrum, double t,
                                  double x0, Exec exec = Exec::parallel);

void write_samples_csv(const std::filesystem::path& path, std::span<const double> samples);
void write_samples_binary(const std::filesystem::path& path, std::span<const double> samples);
std::vector<double> read_samples_binary(const std::filesystem::path& path);

nlohmann::json to_json(const SimResult& r, const DensityComparison& c);

}  // namespace hkb
