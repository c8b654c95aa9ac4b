#pragma once

// Experiment configuration: INI-style `key = value` sections, validated field by
// field before any computation.

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "hkb/grid.hpp"

namespace hkb {

/// Raised for invalid configurations; carries one message per offending field.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> fields);
  const std::vector<std::string>& fields() const { return fields_; }

 private:
  std::vector<std::string> fields_;
};

/// `lo:hi:n` sampled geometrically (log) or linearly, or an explicit comma list.
struct SampleGrid {
  std::vector<double> values;
};

struct PotentialSection {
  std::string family = "quadratic";  // quadratic | power_exponential | generalized_cauchy | flat
  double kappa = 1.0;
  double alpha = 2.0;
  int dim = 1;
};

struct HypothesisSection {
  bool enabled = true;
  std::optional<double> c;  // empty: smallest admissible c found on the grid
  double alpha = 2.0;
  double delta = 1.0;
  bool cauchy = false;
  double eps_tol = 0.05;
  double radius = 10.0;
  std::size_t points = 2001;
};

struct LyapunovSection {
  bool enabled = true;
  std::string form = "auto";  // auto | exp_power | pure_power
  double a = 0.125;
  double a_pow = 2.5;
  std::string xi = "identity";  // identity | log_power | power_tail
  double gamma = 0.0;
  double b_exp = 0.9;
  double c_rate = 0.0;  // <= 0: fitted
  double rate_exponent = 2.0;
  double smoothing_radius = 1.0;
  double radius = 10.0;
  std::size_t points = 2001;
  double tail_fraction = 0.5;
};

struct GridSection {
  std::size_t n = 400;
  double radius = 6.0;
  double truncation_tol = 1e-6;
};

struct SpiSection {
  bool enabled = true;
  SampleGrid s_grid{logspace(1e-3, 1e-1, 7)};
  std::size_t restarts = 20;
  std::size_t max_iter = 10000;
  std::optional<double> p;  // empty: closed-form exponent
  bool exp_power = false;
  double theta = 1.0;
};

struct KernelSection {
  bool enabled = true;
  double epsilon = 0.5;
  bool allow_zero_epsilon = false;
  std::optional<double> p;
  SampleGrid t_ondiag{logspace(0.05, 0.5, 10)};
  SampleGrid t_offdiag{logspace(0.02, 1.0, 12)};
  SampleGrid t_longtime{linspace(1.0, 10.0, 10)};
  SampleGrid t_twist{logspace(0.005, 0.5, 12)};
  double pair_radius = 3.0;
  std::size_t pair_stride = 4;
  std::string poincare_omega = "one";  // one | one_plus_x2
  bool poincare = true;
  bool twist = false;
  bool longtime = true;
  std::vector<double> twist_a{0.0, 0.5, 1.0, 2.0};
  double twist_r = 2.0;
  double twist_w = 2.0;
  std::size_t csv_stride = 7;
};

struct McSection {
  bool enabled = true;
  std::size_t n_paths = 100000;
  double dt = 1e-3;
  double t = 0.5;
  double x0 = 0.0;
  bool export_samples = false;
};

struct Tolerances {
  double slope_slack = 0.3;
  double blowup_factor = 3.0;
  double rate_fraction = 0.9;
  double quad_lo = 0.5;
  double quad_hi = 1.2;
  double l1_max = 0.05;
  double invariant_tol = 1e-8;
  double ground_tol = 1e-10;
  double refinement_rel = 0.10;
  double gauss_floor = 1e-8;

  /// Scales every slack and threshold (not the structural constants of the checks).
  Tolerances scaled(double factor) const;
  nlohmann::json to_json() const;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 0;
  PotentialSection potential;
  double beta = 0.0;
  HypothesisSection hypothesis;
  LyapunovSection lyapunov;
  GridSection grid;
  SpiSection spi;
  KernelSection kernel;
  McSection mc;
  Tolerances tol;

  /// Canonical form, independent of the file's layout and comments.
  nlohmann::json to_json() const;
  /// FNV-1a of the canonical form, as 16 hex digits.
  std::string hash() const;
};

ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

/// A path to an existing file, or the name of a bundled preset.
std::filesystem::path resolve_config(const std::string& name_or_path);

std::string fnv1a_hex(const std::string& bytes);

}  // namespace hkb
