#include "hkb/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "hkb/errors.hpp"
#include "hkb/kernels.hpp"

namespace hkb {
namespace {

SimResult run(const Potential& potential, std::span<const double> starts, const SimConfig& cfg, double box_radius,
              Exec exec) {
  if (!(cfg.dt > 0) || !std::isfinite(cfg.dt)) throw InputError("simulate: dt must be > 0");
  if (!(cfg.t_final >= 0) || !std::isfinite(cfg.t_final)) throw InputError("simulate: t_final must be >= 0");
  if (cfg.n_paths == 0) throw InputError("simulate: need at least one path");
  if (!(box_radius > 0)) throw InputError("simulate: box radius must be > 0");

  SimResult r;
  r.steps = static_cast<std::size_t>(std::llround(cfg.t_final / cfg.dt));
  if (cfg.t_final > 0 && r.steps == 0) r.steps = 1;
  r.dt = r.steps > 0 ? cfg.t_final / static_cast<double>(r.steps) : 0.0;
  r.reflect_at = 10.0 * box_radius;

  double curvature = 0.0;
  const auto grid = Grid1D::symmetric(box_radius, 401);
  for (double x : grid.x) curvature = std::max(curvature, std::abs(potential.eval(x).lap));
  r.dt_heuristic = 0.01 * std::min(1.0, curvature > 0 ? 1.0 / curvature : 1.0);
  r.dt_heuristic_ok = cfg.dt <= r.dt_heuristic;

  kernels::EulerMaruyamaSetup setup;
  setup.drift = [&potential](double x) { return -potential.du(x); };
  setup.x0 = cfg.x0;
  setup.starts = starts;
  setup.dt = r.dt;
  setup.steps = r.steps;
  setup.reflect_at = r.reflect_at;
  setup.seed = cfg.seed;
  const std::size_t n = starts.empty() ? cfg.n_paths : starts.size();
  auto em = exec == Exec::serial ? kernels::serial::euler_maruyama(setup, n) : kernels::omp::euler_maruyama(setup, n);
  r.samples = std::move(em.samples);
  r.escaped = em.reflected_paths;
  if (static_cast<double>(r.escaped) > 1e-3 * static_cast<double>(n))
    throw SimError("simulate: " + std::to_string(r.escaped) + " of " + std::to_string(n) +
                   " paths left [-10R, 10R] (cap 0.1%)");
  return r;
}

double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto i = static_cast<std::size_t>(pos);
  if (i + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(i);
  return (1.0 - frac) * sorted[i] + frac * sorted[i + 1];
}

}  // namespace

SimResult simulate(const Potential& potential, const SimConfig& cfg, double box_radius, Exec exec) {
  return run(potential, {}, cfg, box_radius, exec);
}

SimResult simulate_from(const Potential& potential, std::span<const double> starts, const SimConfig& cfg,
                        double box_radius, Exec exec) {
  if (starts.empty()) throw InputError("simulate_from: no initial points");
  return run(potential, starts, cfg, box_radius, exec);
}

double silverman_bandwidth(std::span<const double> samples) {
  if (samples.size() < 2) throw BandwidthError("bandwidth: need at least two samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double mean = 0.0;
  for (double x : sorted) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : sorted) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / (n - 1.0));
  const double iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0)) spread = sd;  // heavy atoms at the quartiles
  const double bw = 0.9 * spread * std::pow(n, -0.2);
  if (!(bw > 0) || !std::isfinite(bw)) throw BandwidthError("bandwidth: degenerate sample spread");
  return bw;
}

DensityComparison compare_density(std::span<const double> samples, const KernelSpectrum& spectrum, double t,
                                  double x0, Exec exec) {
  if (!(t > 0)) throw InputError("compare_density: t must be > 0");
  const auto& grid = spectrum.grid();
  if (x0 < grid.lo() || x0 > grid.hi()) throw InputError("compare_density: x0 outside the box");
  DensityComparison c;
  c.bandwidth = silverman_bandwidth(samples);
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  std::size_t outside = 0;
  for (double s : sorted) outside += (s < grid.lo() || s > grid.hi()) ? 1 : 0;
  c.outside_mass = static_cast<double>(outside) / static_cast<double>(sorted.size());

  c.x = grid.x;
  c.kde.assign(grid.size(), 0.0);
  if (exec == Exec::serial)
    kernels::serial::kde(sorted, c.bandwidth, grid.x, c.kde);
  else
    kernels::omp::kde(sorted, c.bandwidth, grid.x, c.kde);

  const auto row = spectrum.heat_kernel_row(x0, t);
  c.spectral.resize(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    c.spectral[j] = row[j] * spectrum.mass()[j] / grid.weight(j);
    c.l1 += grid.weight(j) * std::abs(c.kde[j] - c.spectral[j]);
  }
  return c;
}

void write_samples_csv(const std::filesystem::path& path, std::span<const double> samples) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out.precision(17);
  out << "x\n";
  for (double s : samples) out << s << '\n';
}

void write_samples_binary(const std::filesystem::path& path, std::span<const double> samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(samples.data()), static_cast<std::streamsize>(samples.size_bytes()));
}

std::vector<double> read_samples_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw InputError("cannot read " + path.string());
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes % sizeof(double) != 0) throw InputError(path.string() + ": not a flat array of doubles");
  std::vector<double> v(bytes / sizeof(double));
  in.seekg(0);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(bytes));
  return v;
}

nlohmann::json to_json(const SimResult& r, const DensityComparison& c) {
  return {{"n_paths", r.samples.size()},
          {"steps", r.steps},
          {"dt", r.dt},
          {"escaped", r.escaped},
          {"reflect_at", r.reflect_at},
          {"dt_heuristic", r.dt_heuristic},
          {"dt_heuristic_ok", r.dt_heuristic_ok},
          {"bandwidth", c.bandwidth},
          {"outside_mass", c.outside_mass},
          {"l1", c.l1}};
}

}  // namespace hkb
