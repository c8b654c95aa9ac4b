#include "hkb/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "hkb/errors.hpp"
#include "hkb/kernel.hpp"
#include "hkb/lyapunov.hpp"
#include "hkb/montecarlo.hpp"
#include "hkb/spi.hpp"

namespace hkb {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Context {
  const ExperimentConfig& cfg;
  fs::path out;
  std::ostream& log;
  RunOutcome& outcome;
  std::string hash;
  Potential potential;
  std::optional<DriftHypothesis> hyp;
  std::optional<HypothesisReport> hyp_report;
  std::optional<LyapunovSpec> lspec;
  std::optional<LyapunovCertificate> cert;
  std::optional<DiscretizedGenerator> gen;
  std::optional<KernelSpectrum> spectrum;
  std::vector<std::string> warnings;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_json(Context& ctx, const std::string& stage, json body) {
  body["stage"] = stage;
  body["config_name"] = ctx.cfg.name;
  body["config_hash"] = ctx.hash;
  body["seed"] = ctx.cfg.seed;
  body["tolerances"] = ctx.cfg.tol.to_json();
  const auto path = ctx.out / (stage + ".json");
  std::ofstream f(path);
  if (!f) throw InputError("cannot write " + path.string());
  f << body.dump(2) << '\n';
  ctx.outcome.written.push_back(path);
}

void write_csv(Context& ctx, const std::string& name, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  const auto path = ctx.out / name;
  std::ofstream f(path);
  if (!f) throw InputError("cannot write " + path.string());
  for (std::size_t i = 0; i < header.size(); ++i) f << (i ? "," : "") << header[i];
  f << '\n';
  char buf[32];
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.12g", row[i]);
      f << (i ? "," : "") << buf;
    }
    f << '\n';
  }
  ctx.outcome.written.push_back(path);
}

void record(Context& ctx, const std::string& stage, bool pass) {
  ctx.outcome.stages.push_back({stage, pass, false});
  ctx.log << stage << ": " << (pass ? "pass" : "FAIL") << '\n';
}

// ---------------------------------------------------------------------------

void ensure_hypothesis(Context& ctx) {
  if (ctx.hyp) return;
  const auto& h = ctx.cfg.hypothesis;
  DriftHypothesis hyp{h.c.value_or(1.0), h.alpha, h.delta, h.cauchy, h.eps_tol, ctx.cfg.potential.dim};
  const auto grid = Grid1D::symmetric(h.radius, h.points);
  auto report = check_drift_hypothesis(ctx.potential, hyp, grid);
  if (!h.c) {
    hyp.c = report.smallest_c * (1.0 + 1e-9);
    report = check_drift_hypothesis(ctx.potential, hyp, grid);
  }
  ctx.hyp = hyp;
  ctx.hyp_report = report;
}

void stage_hypothesis(Context& ctx) {
  ensure_hypothesis(ctx);
  const auto& hyp = *ctx.hyp;
  const auto& r = *ctx.hyp_report;
  json j{{"c", hyp.c},
         {"c_auto", !ctx.cfg.hypothesis.c},
         {"alpha", hyp.alpha},
         {"delta", hyp.delta},
         {"cauchy_mode", hyp.cauchy_mode},
         {"worst_margin", num(r.worst_margin)},
         {"worst_point", r.worst_point},
         {"gradient_bound_pass", r.gradient_bound_pass},
         {"gradient_worst_margin", num(r.gradient_worst_margin)},
         {"gradient_worst_point", r.gradient_worst_point},
         {"smallest_c", num(r.smallest_c)},
         {"delta_fit", num(r.delta_fit)},
         {"pass", r.pass}};
  if (hyp.cauchy_mode) {
    j["cauchy_radius"] = num(r.cauchy_radius);
    j["edge_value"] = num(r.edge_value);
    j["liminf_target"] = hyp.liminf_target();
  }
  std::vector<std::vector<double>> rows;
  const auto grid = Grid1D::symmetric(ctx.cfg.hypothesis.radius, ctx.cfg.hypothesis.points);
  for (double x : grid.x) {
    const double du = ctx.potential.du(x), ax = std::abs(x);
    const double lower = hyp.cauchy_mode ? hyp.liminf_target() : std::pow(ax, hyp.alpha) / hyp.c - hyp.c;
    rows.push_back({x, du * x, lower, std::abs(du), hyp.c * std::max(1.0, std::pow(ax, hyp.delta))});
  }
  write_csv(ctx, "hypothesis.csv", {"x", "drift_dot_x", "drift_lower", "grad_abs", "grad_bound"}, rows);
  write_json(ctx, "hypothesis", j);
  record(ctx, "hypothesis", r.pass);
}

// ---------------------------------------------------------------------------

XiFunction make_xi(const LyapunovSection& l, double alpha) {
  if (l.xi == "log_power") return LogPowerXi{l.gamma, alpha};
  if (l.xi == "power_tail") return PowerTailXi{l.b_exp};
  return IdentityXi{};
}

void ensure_lyapunov(Context& ctx) {
  if (ctx.cert) return;
  ensure_hypothesis(ctx);
  const auto& l = ctx.cfg.lyapunov;
  const auto& hyp = *ctx.hyp;
  std::optional<LyapunovSpec> spec;
  if (l.form == "auto") {
    spec = hyp.cauchy_mode ? suggest_power_lyapunov(hyp, l.a_pow, l.b_exp) : suggest_exp_lyapunov(hyp, l.gamma);
    if (l.c_rate > 0) spec = spec->with_rate(PowerRate{l.c_rate, spec->rate().exponent});
  } else if (l.form == "exp_power") {
    spec.emplace(ExpPowerForm{l.a, hyp.alpha}, make_xi(l, hyp.alpha), PowerRate{l.c_rate, l.rate_exponent},
                 l.smoothing_radius);
  } else {
    spec.emplace(PurePowerForm{l.a_pow}, make_xi(l, hyp.alpha), PowerRate{l.c_rate, l.rate_exponent},
                 l.smoothing_radius);
  }
  CertifyOptions opts;
  opts.tail_fraction = l.tail_fraction;
  ctx.cert = certify(ctx.potential, *spec, Grid1D::symmetric(l.radius, l.points), opts);
  ctx.lspec = spec;
  if (ctx.cert->xi_extended) ctx.warnings.push_back("lyapunov: " + ctx.cert->diagnostics);
}

void stage_lyapunov(Context& ctx) {
  ensure_lyapunov(ctx);
  const auto& cert = *ctx.cert;
  const auto& spec = *ctx.lspec;
  auto j = to_json(spec, cert);
  const auto grid = Grid1D::symmetric(ctx.cfg.lyapunov.radius, ctx.cfg.lyapunov.points);
  j["gradient_weight_constant"] = num(gradient_weight_constant(spec, grid, ctx.cfg.lyapunov.gamma));
  j["gamma"] = ctx.cfg.lyapunov.gamma;
  j["pass"] = cert.admissible;
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < cert.grid.size(); ++i) {
    const double x = cert.grid[i];
    rows.push_back({x, spec.eval(x).w, generator_on_w(ctx.potential, spec, x), cert.margin_profile[i]});
  }
  write_csv(ctx, "lyapunov.csv", {"x", "W", "LW", "margin"}, rows);
  write_json(ctx, "lyapunov", j);
  record(ctx, "lyapunov", cert.admissible);
}

// ---------------------------------------------------------------------------

double bound_exponent(const Context& ctx, const std::optional<double>& override_p) {
  if (override_p) return *override_p;
  const auto& h = ctx.cfg.hypothesis;
  return exponent_p(h.alpha, ctx.cfg.lyapunov.gamma, h.delta, ctx.cfg.beta, ctx.cfg.potential.dim, h.cauchy);
}

GeneratorOptions generator_options(const ExperimentConfig& cfg) {
  GeneratorOptions o;
  o.truncation_tol = cfg.grid.truncation_tol;
  return o;
}

void stage_spi(Context& ctx) {
  if (!ctx.cfg.lyapunov.enabled)
    throw ConfigError({"spi: the profile needs a Lyapunov certificate, but lyapunov.enabled = false"});
  ensure_lyapunov(ctx);
  const auto& cfg = ctx.cfg;
  const double p = bound_exponent(ctx, cfg.spi.p);
  const double gamma = cfg.lyapunov.gamma;
  const auto omega = [gamma](double x) { return std::max(1.0, std::pow(std::abs(x), 2.0 * gamma)); };
  const auto gen = build_weighted_generator(ctx.potential, omega, cfg.grid.n, cfg.grid.radius, generator_options(cfg));
  const Weight weight(gen.potential, cfg.beta);
  const auto forms = make_spi_forms(gen, weight);
  auto profile = profile_from_certificate(ctx.potential, *ctx.cert, *ctx.lspec, weight, p, gamma, cfg.spi.exp_power,
                                          cfg.spi.theta);

  // b* on the s-grid and at the calibration point.
  const auto& sg = cfg.spi.s_grid.values;
  const double s_ref = std::isfinite(profile.s0) ? profile.s0 : sg.back();
  std::vector<double> s_all = sg;
  if (std::find(s_all.begin(), s_all.end(), s_ref) == s_all.end()) s_all.push_back(s_ref);
  std::sort(s_all.begin(), s_all.end());
  BestBOptions bo;
  bo.restarts = cfg.spi.restarts;
  bo.max_iter = cfg.spi.max_iter;
  bo.seed = cfg.seed;
  const auto curve = empirical_best_b_curve(s_all, forms, bo);
  const auto at = [&](double s) {
    return curve.b[static_cast<std::size_t>(std::find(curve.s.begin(), curve.s.end(), s) - curve.s.begin())];
  };
  calibrate(profile, s_ref, at(s_ref));
  const auto dom = check_domination(profile, curve);

  std::vector<double> lx, ly;
  for (double s : sg) {
    lx.push_back(std::log(1.0 / s));
    ly.push_back(std::log(at(s)));
  }
  const double slope = sg.size() >= 2 ? fit_line(lx, ly).slope : 0.0;
  double vmass = 0.0;
  for (double v : forms.v) vmass += v;
  const double floor = 1.0 / (vmass * vmass);
  bool floor_ok = true, monotone = true, converged = true;
  for (std::size_t i = 0; i < curve.s.size(); ++i) {
    floor_ok = floor_ok && curve.b[i] >= floor * (1.0 - 1e-12);
    if (i > 0) monotone = monotone && curve.b[i] <= curve.b[i - 1];
    converged = converged && curve.converged[i];
  }
  if (!converged) ctx.warnings.push_back("spi: b*(s) hit the iteration cap for some s; best value reported");

  // Lebesgue-ball inequality and Nash rate on fixed test data.
  const double pi = std::numbers::pi;
  const std::vector<TestFunction> tests{
      {[](double) { return 1.0; }, [](double) { return 0.0; }},
      {[](double x) { return x; }, [](double) { return 1.0; }},
      {[pi](double x) { return std::cos(0.5 * pi * x); }, [pi](double x) { return -0.5 * pi * std::sin(0.5 * pi * x); }},
      {[](double x) { return std::exp(-4.0 * x * x); }, [](double x) { return -8.0 * x * std::exp(-4.0 * x * x); }}};
  const auto ball = local_ball_spi_check(1.0, 1.0, 401, tests);
  const auto nash = NashProfile::classical(1.0, cfg.potential.dim);
  json nash_rows = json::array();
  double roundtrip = 0.0;
  for (double t : {0.1, 0.5, 1.0}) {
    const double inv = nash_rate(nash, t);
    roundtrip = std::max(roundtrip, std::abs(nash.n(inv) - t) / t);
    nash_rows.push_back({{"t", t}, {"n_inverse", inv}});
  }

  const bool slope_ok = slope <= p + cfg.tol.slope_slack;
  const bool pass = slope_ok && dom.dominates && floor_ok && monotone;
  json j{{"p", p},
         {"slope", slope},
         {"slope_pass", slope_ok},
         {"s0", num(profile.s0)},
         {"s_calibration", s_ref},
         {"profile", to_json(profile)},
         {"curve", to_json(curve)},
         {"domination", to_json(dom)},
         {"constant_floor", floor},
         {"floor_pass", floor_ok},
         {"monotone", monotone},
         {"converged", converged},
         {"ball_check", {{"r", 1.0}, {"u", 1.0}, {"worst_ratio", num(ball.worst_ratio)}, {"c_fit", num(ball.c_fit)}}},
         {"nash", {{"c", nash.c}, {"q", nash.q}, {"samples", nash_rows}, {"roundtrip_error", roundtrip}}},
         {"pass", pass}};
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < curve.s.size(); ++i) {
    const double bt = profile.b(curve.s[i]);
    rows.push_back({curve.s[i], bt, curve.b[i], bt / curve.b[i]});
  }
  write_csv(ctx, "spi.csv", {"s", "b_theory", "b_empirical", "ratio"}, rows);
  rows.clear();
  for (std::size_t i = 0; i < profile.r.size(); ++i) rows.push_back({profile.r[i], profile.g[i], profile.h[i]});
  write_csv(ctx, "spi_profile.csv", {"r", "g", "h"}, rows);
  write_json(ctx, "spi", j);
  record(ctx, "spi", pass);
}

// ---------------------------------------------------------------------------

void ensure_spectrum(Context& ctx) {
  if (ctx.spectrum) return;
  const auto& cfg = ctx.cfg;
  GeneratorOptions opts = generator_options(cfg);
  ctx.gen.emplace(build_generator(ctx.potential, cfg.grid.n, cfg.grid.radius, opts));
  ctx.spectrum.emplace(*ctx.gen);
  if (!ctx.gen->edge_density_resolved && opts.truncation_tol < 1.0)
    ctx.warnings.push_back("kernel: edge density ratio " + fmt(ctx.gen->edge_density) + " exceeds " +
                           fmt(opts.edge_density_ratio) + "; the truncation is monitored through the row sums");
}

void stage_kernel(Context& ctx) {
  ensure_spectrum(ctx);
  const auto& cfg = ctx.cfg;
  const auto& k = cfg.kernel;
  const auto& tol = cfg.tol;
  const auto& spec = *ctx.spectrum;
  const auto& gen = *ctx.gen;
  const Weight weight(gen.potential, cfg.beta);
  const double p = bound_exponent(ctx, k.p);
  json j;
  bool pass = true;

  json lambdas = json::array();
  for (std::size_t i = 0; i < std::min<std::size_t>(8, spec.size()); ++i) lambdas.push_back(spec.lambda(i));
  j["generator"] = {{"N", gen.size()},
                    {"R", cfg.grid.radius},
                    {"box_mass_fraction", gen.box_mass_fraction},
                    {"edge_density", gen.edge_density},
                    {"edge_density_resolved", gen.edge_density_resolved}};
  j["spectrum"] = {{"lambda", lambdas}, {"gap", spec.spectral_gap()}};
  j["p"] = p;

  InvariantOptions io;
  io.tol = tol.invariant_tol;
  io.ground_tol = tol.ground_tol;
  io.seed = cfg.seed;
  const auto inv = check_invariants(gen, spec, io);
  j["invariants"] = to_json(inv);
  pass = pass && inv.pass;

  SlopeFitOptions so;
  so.slope_slack = tol.slope_slack;
  const auto od = verify_ondiag(spec, weight, p, k.t_ondiag.values, so);
  j["ondiag"] = to_json(od);
  pass = pass && od.pass;
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < od.t.size(); ++i) rows.push_back({od.t[i], od.sup_ratio[i], od.used[i] ? 1.0 : 0.0});
  write_csv(ctx, "kernel_ondiag.csv", {"t", "sup_ratio", "used"}, rows);

  OffdiagOptions oo;
  oo.gauss_floor = tol.gauss_floor;
  oo.blowup_factor = tol.blowup_factor;
  oo.allow_zero_epsilon = k.allow_zero_epsilon;
  oo.csv_stride = k.csv_stride;
  const auto pairs = pair_grid(spec.grid(), k.pair_radius, k.pair_stride);
  const auto off = verify_offdiag(spec, weight, p, k.epsilon, k.t_offdiag.values, pairs, oo);
  j["offdiag"] = to_json(off);
  pass = pass && off.pass;
  rows.clear();
  for (const auto& r : off.rows) rows.push_back({r.x, r.y, r.t, r.p, r.envelope, r.ratio});
  write_csv(ctx, "kernel_offdiag.csv", {"x", "y", "t", "p_t", "envelope", "ratio"}, rows);

  if (k.longtime) {
    LongtimeOptions lo;
    lo.rate_fraction = tol.rate_fraction;
    const auto lt = verify_longtime(spec, weight, k.t_longtime.values, lo);
    j["longtime"] = to_json(lt);
    pass = pass && lt.pass;
    rows.clear();
    for (std::size_t i = 0; i < lt.t.size(); ++i)
      rows.push_back({lt.t[i], lt.sup_deviation[i], lt.used[i] ? 1.0 : 0.0});
    write_csv(ctx, "kernel_longtime.csv", {"t", "sup_deviation", "used"}, rows);
  }

  if (k.poincare) {
    const bool weighted = k.poincare_omega == "one_plus_x2";
    const auto omega = [weighted](double x) { return weighted ? 1.0 + x * x : 1.0; };
    const auto opts = generator_options(cfg);
    const auto coarse = poincare_gap(ctx.potential, omega, cfg.grid.n, cfg.grid.radius, opts);
    const auto fine = poincare_gap(ctx.potential, omega, 2 * cfg.grid.n, cfg.grid.radius, opts);
    const double rel = std::abs(fine.lambda1 - coarse.lambda1) / coarse.lambda1;
    const bool ok = coarse.lambda1 > 0 && fine.lambda1 > 0 && rel <= tol.refinement_rel;
    j["poincare"] = {{"omega", k.poincare_omega},
                     {"coarse", to_json(coarse)},
                     {"refined", to_json(fine)},
                     {"relative_change", rel},
                     {"pass", ok}};
    pass = pass && ok;
  }

  if (k.twist) {
    TwistOptions to;
    to.slope_slack = tol.slope_slack;
    to.quad_lo = tol.quad_lo;
    to.quad_hi = tol.quad_hi;
    const TwistFunction psi{k.twist_r, k.twist_w};
    const auto tw = davies_twist_check(spec, gen, weight, k.twist_a, psi, k.t_twist.values, p, to);
    j["twist"] = to_json(tw);
    pass = pass && tw.pass;
    rows.clear();
    for (std::size_t ia = 0; ia < tw.a.size(); ++ia)
      for (std::size_t it = 0; it < tw.t.size(); ++it) rows.push_back({tw.a[ia], tw.t[it], tw.growth[ia][it], tw.y[ia][it]});
    write_csv(ctx, "kernel_twist.csv", {"a", "t", "growth", "y"}, rows);
  }

  rows.clear();
  for (std::size_t i = 0; i < spec.size(); ++i) rows.push_back({static_cast<double>(i), spec.lambda(i)});
  write_csv(ctx, "kernel_spectrum.csv", {"k", "lambda"}, rows);
  j["pass"] = pass;
  write_json(ctx, "kernel", j);
  record(ctx, "kernel", pass);
}

// ---------------------------------------------------------------------------

void stage_mc(Context& ctx) {
  ensure_spectrum(ctx);
  const auto& cfg = ctx.cfg;
  SimConfig sc{cfg.mc.n_paths, cfg.mc.dt, cfg.mc.t, cfg.mc.x0, cfg.seed};
  const auto sim = simulate(ctx.potential, sc, cfg.grid.radius);
  if (!sim.dt_heuristic_ok)
    ctx.warnings.push_back("mc: dt = " + fmt(cfg.mc.dt) + " exceeds the stability heuristic " +
                           fmt(sim.dt_heuristic));
  const auto cmp = compare_density(sim.samples, *ctx.spectrum, cfg.mc.t, cfg.mc.x0);
  const bool pass = cmp.l1 <= cfg.tol.l1_max;
  auto j = to_json(sim, cmp);
  j["t"] = cfg.mc.t;
  j["x0"] = cfg.mc.x0;
  j["pass"] = pass;
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < cmp.x.size(); ++i) rows.push_back({cmp.x[i], cmp.kde[i], cmp.spectral[i]});
  write_csv(ctx, "mc_density.csv", {"x", "kde", "spectral"}, rows);
  if (cfg.mc.export_samples) {
    write_samples_binary(ctx.out / "mc_samples.bin", sim.samples);
    write_samples_csv(ctx.out / "mc_samples.csv", sim.samples);
    ctx.outcome.written.push_back(ctx.out / "mc_samples.bin");
    ctx.outcome.written.push_back(ctx.out / "mc_samples.csv");
  }
  write_json(ctx, "mc", j);
  record(ctx, "mc", pass);
}

void skip(Context& ctx, const std::string& stage) {
  write_json(ctx, stage, {{"skipped", true}, {"pass", true}});
  ctx.outcome.stages.push_back({stage, true, true});
  ctx.log << stage << ": skipped\n";
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"hypothesis", "lyapunov", "spi", "kernel", "mc", "all"};
  return names;
}

Potential make_potential(const PotentialSection& s) {
  if (s.family == "quadratic") return Potential(Quadratic{s.kappa}, s.dim);
  if (s.family == "power_exponential") return Potential(PowerExponential{s.alpha}, s.dim);
  if (s.family == "generalized_cauchy") return Potential(GeneralizedCauchy{s.alpha, s.dim}, s.dim);
  if (s.family == "flat")
    return Potential(CustomPotential{"flat", [](double) { return 0.0; }, [](double) { return 0.0; },
                                     [](double) { return 0.0; }},
                     s.dim);
  throw ConfigError({"potential.family: unknown family '" + s.family + "'"});
}

ExperimentConfig apply_overrides(ExperimentConfig cfg, const RunOptions& opts) {
  if (!(opts.tol_scale > 0) || !std::isfinite(opts.tol_scale)) throw ConfigError({"--tol-scale: must be > 0"});
  if (opts.seed) cfg.seed = *opts.seed;
  cfg.tol = cfg.tol.scaled(opts.tol_scale);
  return cfg;
}

RunOutcome run_pipeline(const std::string& sub, const ExperimentConfig& cfg, const RunOptions& opts,
                        std::ostream& log) {
  const auto& names = subcommands();
  if (std::find(names.begin(), names.end(), sub) == names.end())
    throw ConfigError({"subcommand: unknown '" + sub + "'"});
  std::error_code ec;
  fs::create_directories(opts.out, ec);
  if (ec) throw ConfigError({"--out: cannot create " + opts.out.string() + ": " + ec.message()});

  RunOutcome outcome;
  Context ctx{cfg, opts.out, log, outcome, cfg.hash(), make_potential(cfg.potential), {}, {}, {}, {}, {}, {}, {}};
  const auto wanted = [&](const std::string& stage, bool enabled) { return sub == stage || (sub == "all" && enabled); };
  const auto run_or_skip = [&](const std::string& stage, bool enabled, void (*fn)(Context&)) {
    if (wanted(stage, enabled))
      fn(ctx);
    else if (sub == "all")
      skip(ctx, stage);
  };
  run_or_skip("hypothesis", cfg.hypothesis.enabled, stage_hypothesis);
  run_or_skip("lyapunov", cfg.lyapunov.enabled, stage_lyapunov);
  run_or_skip("spi", cfg.spi.enabled, stage_spi);
  run_or_skip("kernel", cfg.kernel.enabled, stage_kernel);
  run_or_skip("mc", cfg.mc.enabled, stage_mc);

  bool pass = true;
  json stages = json::object();
  for (const auto& s : outcome.stages) {
    pass = pass && s.pass;
    stages[s.name] = s.skipped ? json("skipped") : json(s.pass);
  }
  if (sub == "all") {
    write_json(ctx, "summary", {{"subcommand", sub}, {"stages", stages}, {"warnings", ctx.warnings}, {"pass", pass}});
  }
  for (const auto& w : ctx.warnings) log << "warning: " << w << '\n';
  outcome.exit_code = pass ? 0 : 1;
  return outcome;
}

}  // namespace hkb
