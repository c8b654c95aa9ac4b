// hkb: runs the named pipelines over an experiment config.

#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"

#include "hkb/config.hpp"
#include "hkb/errors.hpp"
#include "hkb/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Heat kernel bounds for Lf = f'' - U'f': certificates, super-Poincare profiles, kernel checks"};
  std::string config = "ou";
  hkb::RunOptions opts;
  std::string out = "out";
  std::uint64_t seed = 0;
  app.add_option("--config", config, "INI file, or the name of a bundled preset")->capture_default_str();
  app.add_option("--out", out, "output directory")->capture_default_str();
  auto* seed_opt = app.add_option("--seed", seed, "overrides experiment.seed");
  app.add_option("--tol-scale", opts.tol_scale, "scales every tolerance")->capture_default_str();
  app.require_subcommand(1, 1);
  const std::map<std::string, std::string> about{
      {"hypothesis", "drift hypothesis on a grid"},
      {"lyapunov", "Lyapunov certificate"},
      {"spi", "super-Poincare profile against the empirical best constant"},
      {"kernel", "spectral heat kernel checks"},
      {"mc", "Euler-Maruyama paths against the spectral row"},
      {"all", "every stage plus summary.json"}};
  for (const auto& name : hkb::subcommands()) {
    const auto it = about.find(name);
    app.add_subcommand(name, it == about.end() ? "" : it->second)->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  const std::string sub = app.get_subcommands().front()->get_name();
  opts.out = out;
  if (seed_opt->count() > 0) opts.seed = seed;

  try {
    const auto cfg = hkb::apply_overrides(hkb::load_config(hkb::resolve_config(config)), opts);
    const auto outcome = hkb::run_pipeline(sub, cfg, opts, std::cout);
    return outcome.exit_code;
  } catch (const hkb::ConfigError& e) {
    std::cerr << "configuration error:\n";
    for (const auto& f : e.fields()) std::cerr << "  " << f << '\n';
    return 2;
  } catch (const hkb::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
