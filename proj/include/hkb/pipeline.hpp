#pragma once

// Named pipelines over an ExperimentConfig: each stage writes a JSON report
// (with the config hash and tolerances) and CSV tables into the output directory.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hkb/config.hpp"
#include "hkb/potentials.hpp"

namespace hkb {

struct RunOptions {
  std::filesystem::path out = "out";
  std::optional<std::uint64_t> seed;
  double tol_scale = 1.0;
};

struct StageOutcome {
  std::string name;
  bool pass = false;
  bool skipped = false;
};

struct RunOutcome {
  int exit_code = 0;
  std::vector<StageOutcome> stages;
  std::vector<std::filesystem::path> written;
};

/// Subcommands: hypothesis, lyapunov, spi, kernel, mc, all.
const std::vector<std::string>& subcommands();

Potential make_potential(const PotentialSection& section);

/// Applies the seed and tolerance overrides; throws ConfigError for bad overrides.
ExperimentConfig apply_overrides(ExperimentConfig cfg, const RunOptions& opts);

/// Runs a subcommand. Returns exit code 0 iff every pass flag is true, 1 otherwise.
/// Library errors propagate as hkb::Error, configuration problems as ConfigError.
RunOutcome run_pipeline(const std::string& subcommand, const ExperimentConfig& cfg, const RunOptions& opts,
                        std::ostream& log);

}  // namespace hkb
