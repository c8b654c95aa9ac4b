#include "hkb/config.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "hkb/grid.hpp"

#ifndef HKB_PRESET_DIR
#define HKB_PRESET_DIR "presets"
#endif

namespace hkb {
namespace pt = boost::property_tree;

namespace {

std::string join_fields(const std::vector<std::string>& fields) {
  std::string s = "invalid configuration:";
  for (const auto& f : fields) s += "\n  " + f;
  return s;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

class Reader {
 public:
  Reader(const pt::ptree& tree, std::vector<std::string>& errors) : tree_(tree), errors_(errors) {}

  template <class T>
  void get(const std::string& key, T& out) {
    known_.insert(key);
    const auto raw = tree_.get_optional<std::string>(pt::ptree::path_type(key, '.'));
    if (!raw) return;
    const auto text = boost::algorithm::trim_copy(*raw);
    if (!parse(text, out)) errors_.push_back(key + ": cannot parse '" + text + "'");
  }

  /// "auto" or empty leaves the optional unset.
  void get_auto(const std::string& key, std::optional<double>& out) {
    known_.insert(key);
    const auto raw = tree_.get_optional<std::string>(pt::ptree::path_type(key, '.'));
    if (!raw) return;
    const auto text = boost::algorithm::trim_copy(*raw);
    if (text == "auto" || text.empty()) {
      out.reset();
      return;
    }
    double v = 0;
    if (!parse(text, v))
      errors_.push_back(key + ": expected a number or 'auto', got '" + text + "'");
    else
      out = v;
  }

  void get_list(const std::string& key, std::vector<double>& out) {
    known_.insert(key);
    const auto raw = tree_.get_optional<std::string>(pt::ptree::path_type(key, '.'));
    if (!raw) return;
    if (!parse_list(*raw, out)) errors_.push_back(key + ": expected a comma-separated list of numbers");
  }

  /// log(lo, hi, n) | lin(lo, hi, n) | comma list.
  void get_grid(const std::string& key, SampleGrid& out) {
    known_.insert(key);
    const auto raw = tree_.get_optional<std::string>(pt::ptree::path_type(key, '.'));
    if (!raw) return;
    const auto text = boost::algorithm::trim_copy(*raw);
    static const std::regex range(R"(^(log|lin)\s*\(\s*([^,]+),\s*([^,]+),\s*(\d+)\s*\)$)");
    std::smatch m;
    if (std::regex_match(text, m, range)) {
      double lo = 0, hi = 0;
      std::size_t n = 0;
      if (!parse(m[2].str(), lo) || !parse(m[3].str(), hi) || !parse(m[4].str(), n) || n < 1) {
        errors_.push_back(key + ": malformed range '" + text + "'");
        return;
      }
      if (m[1] == "log") {
        if (!(lo > 0) || !(hi > 0)) {
          errors_.push_back(key + ": log range needs positive bounds");
          return;
        }
        out.values = logspace(lo, hi, n);
      } else {
        out.values = linspace(lo, hi, n);
      }
      return;
    }
    if (!parse_list(text, out.values))
      errors_.push_back(key + ": expected log(lo, hi, n), lin(lo, hi, n) or a list, got '" + text + "'");
  }

  void report_unknown() const {
    for (const auto& [section, body] : tree_) {
      if (body.empty() && !body.data().empty()) {
        errors_.push_back(section + ": key outside any section");
        continue;
      }
      for (const auto& [key, value] : body) {
        (void)value;
        if (!known_.count(section + "." + key)) errors_.push_back(section + "." + key + ": unknown key");
      }
    }
  }

 private:
  static bool parse(const std::string& s, std::string& out) {
    out = s;
    return true;
  }
  static bool parse(const std::string& s, double& out) {
    try {
      std::size_t pos = 0;
      out = std::stod(s, &pos);
      return pos == s.size() && std::isfinite(out);
    } catch (const std::exception&) {
      return false;
    }
  }
  static bool parse(const std::string& s, std::size_t& out) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) return false;
    try {
      out = std::stoull(s);
      return true;
    } catch (const std::exception&) {
      return false;
    }
  }
  static bool parse(const std::string& s, int& out) {
    try {
      std::size_t pos = 0;
      out = std::stoi(s, &pos);
      return pos == s.size();
    } catch (const std::exception&) {
      return false;
    }
  }
  static bool parse(const std::string& s, bool& out) {
    const auto l = boost::algorithm::to_lower_copy(s);
    if (l == "true" || l == "yes" || l == "on" || l == "1") {
      out = true;
      return true;
    }
    if (l == "false" || l == "no" || l == "off" || l == "0") {
      out = false;
      return true;
    }
    return false;
  }
  static bool parse_list(const std::string& s, std::vector<double>& out) {
    std::vector<std::string> parts;
    boost::algorithm::split(parts, s, boost::is_any_of(","));
    std::vector<double> v;
    for (auto& p : parts) {
      boost::algorithm::trim(p);
      double d = 0;
      if (!parse(p, d)) return false;
      v.push_back(d);
    }
    out = std::move(v);
    return true;
  }

  const pt::ptree& tree_;
  std::vector<std::string>& errors_;
  std::set<std::string> known_;
};

bool increasing_positive(const std::vector<double>& v) {
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!(v[i] > 0) || (i > 0 && !(v[i] > v[i - 1]))) return false;
  return true;
}

void validate(const ExperimentConfig& c, std::vector<std::string>& e) {
  static const std::set<std::string> families{"quadratic", "power_exponential", "generalized_cauchy", "flat"};
  const auto& pot = c.potential;
  if (!families.count(pot.family))
    e.push_back("potential.family: expected quadratic, power_exponential, generalized_cauchy or flat");
  if (!(pot.kappa > 0)) e.push_back("potential.kappa: must be > 0");
  if (!(pot.alpha > 0)) e.push_back("potential.alpha: must be > 0");
  if (pot.dim != 1) e.push_back("potential.dim: numerics are one-dimensional (dim = 1)");
  const bool flat = pot.family == "flat";

  if (c.grid.n < 100) e.push_back("grid.N: must be >= 100");
  if (!(c.grid.radius > 0)) e.push_back("grid.R: must be > 0");
  if (!(c.grid.truncation_tol > 0)) e.push_back("grid.truncation_tol: must be > 0");

  const auto& h = c.hypothesis;
  if (h.enabled && flat) e.push_back("hypothesis.enabled: a flat potential has no drift to check");
  if (h.c && !(*h.c > 0)) e.push_back("hypothesis.c: must be > 0 or auto");
  if (!(h.alpha > 0)) e.push_back("hypothesis.alpha: must be > 0");
  if (!(h.delta >= 0)) e.push_back("hypothesis.delta: must be >= 0");
  if (!(h.eps_tol > 0 && h.eps_tol < 1)) e.push_back("hypothesis.eps_tol: must lie in (0, 1)");
  if (!(h.radius >= 5)) e.push_back("hypothesis.R: must be >= 5");
  if (h.points < 3) e.push_back("hypothesis.points: must be >= 3");

  const auto& l = c.lyapunov;
  if (l.enabled && flat) e.push_back("lyapunov.enabled: a flat potential admits no Lyapunov certificate");
  if (l.form != "auto" && l.form != "exp_power" && l.form != "pure_power")
    e.push_back("lyapunov.form: expected auto, exp_power or pure_power");
  if (l.xi != "identity" && l.xi != "log_power" && l.xi != "power_tail")
    e.push_back("lyapunov.xi: expected identity, log_power or power_tail");
  if (!h.cauchy) {
    if (!(l.gamma >= 0))
      e.push_back("lyapunov.gamma: requires gamma >= 0 (gamma = " + fmt(l.gamma) + ")");
    else if (!(l.gamma > 1.0 - h.alpha))
      e.push_back("lyapunov.gamma: requires gamma > 1 - alpha (gamma = " + fmt(l.gamma) +
                  ", alpha = " + fmt(h.alpha) + ")");
  } else {
    if (!(l.b_exp >= 0 && l.b_exp < 1)) e.push_back("lyapunov.b: requires 0 <= b < 1");
    if (!(l.a_pow * l.b_exp > 2)) e.push_back("lyapunov.a_pow: requires a b > 2");
    if (!(l.a_pow < 2 + h.alpha)) e.push_back("lyapunov.a_pow: requires a < 2 + alpha");
    if (c.spi.enabled && !c.spi.p) {
      if (!(l.gamma > 2.0 / h.alpha))
        e.push_back("lyapunov.gamma: Cauchy profile requires gamma > 2/alpha (gamma = " + fmt(l.gamma) +
                    ", alpha = " + fmt(h.alpha) + ")");
      if (!(c.beta > 0)) e.push_back("weight.beta: Cauchy profile requires beta > 0");
    }
  }
  if (!(l.a > 0)) e.push_back("lyapunov.a: must be > 0");
  if (!(l.rate_exponent > 0)) e.push_back("lyapunov.rate_exponent: must be > 0");
  if (!(l.smoothing_radius > 0)) e.push_back("lyapunov.smoothing_radius: must be > 0");
  if (!(l.radius > 0)) e.push_back("lyapunov.R: must be > 0");
  if (l.points < 3) e.push_back("lyapunov.points: must be >= 3");
  if (!(l.tail_fraction > 0 && l.tail_fraction < 1)) e.push_back("lyapunov.tail_fraction: must lie in (0, 1)");

  if (!std::isfinite(c.beta)) e.push_back("weight.beta: must be finite");

  const auto& s = c.spi;
  if (s.enabled) {
    if (!l.enabled) e.push_back("spi.enabled: the profile needs the lyapunov stage");
    if (c.grid.n < 200) e.push_back("grid.N: the best-constant search needs >= 200 points");
    if (s.s_grid.values.empty() || !increasing_positive(s.s_grid.values))
      e.push_back("spi.s_grid: must be a nonempty increasing list of positive values");
    if (s.restarts < 1) e.push_back("spi.restarts: must be >= 1");
    if (s.max_iter < 1) e.push_back("spi.max_iter: must be >= 1");
    if (s.exp_power && !(s.theta > 0)) e.push_back("spi.theta: must be > 0");
  }

  const auto& k = c.kernel;
  if (k.enabled) {
    if (k.allow_zero_epsilon ? !(k.epsilon >= 0) : !(k.epsilon > 0))
      e.push_back(k.allow_zero_epsilon ? "kernel.epsilon: must be >= 0"
                                       : "kernel.epsilon: must be > 0 (0 only with allow_zero_epsilon)");
    const auto check_grid = [&](const SampleGrid& g, const char* name, std::size_t min_points) {
      if (g.values.size() < min_points || !increasing_positive(g.values))
        e.push_back(std::string("kernel.") + name + ": need >= " + std::to_string(min_points) +
                    " increasing positive times");
    };
    check_grid(k.t_ondiag, "t_ondiag", 8);
    if (!k.t_ondiag.values.empty() && k.t_ondiag.values.back() > 1.0) e.push_back("kernel.t_ondiag: times must be <= 1");
    check_grid(k.t_offdiag, "t_offdiag", 2);
    if (k.longtime) check_grid(k.t_longtime, "t_longtime", 2);
    if (k.twist) {
      check_grid(k.t_twist, "t_twist", 3);
      if (k.twist_a.size() < 3) e.push_back("kernel.twist_a: need at least 3 values");
      if (!(k.twist_w > 0) || !(k.twist_r >= 0)) e.push_back("kernel.twist_r/twist_w: need r >= 0, w > 0");
    }
    if (!(k.pair_radius > 0)) e.push_back("kernel.pair_radius: must be > 0");
    if (k.pair_stride < 1) e.push_back("kernel.pair_stride: must be >= 1");
    if (k.poincare_omega != "one" && k.poincare_omega != "one_plus_x2")
      e.push_back("kernel.poincare_omega: expected one or one_plus_x2");
    if (flat && !k.p) e.push_back("kernel.p: must be given explicitly for a flat potential");
    if (k.csv_stride < 1) e.push_back("kernel.csv_stride: must be >= 1");
  }

  const auto& m = c.mc;
  if (m.enabled) {
    if (m.n_paths < 10000) e.push_back("mc.n_paths: density comparison needs >= 10000 paths");
    if (!(m.dt > 0)) e.push_back("mc.dt: must be > 0");
    if (!(m.t > 0)) e.push_back("mc.t: must be > 0");
    if (!(std::abs(m.x0) <= c.grid.radius)) e.push_back("mc.x0: must lie in the box [-R, R]");
  }

  const auto& t = c.tol;
  for (const auto& [name, v] : {std::pair{"slope_slack", t.slope_slack}, {"blowup_factor", t.blowup_factor},
                                {"l1_max", t.l1_max}, {"invariant_tol", t.invariant_tol},
                                {"ground_tol", t.ground_tol},
                                {"refinement_rel", t.refinement_rel}, {"gauss_floor", t.gauss_floor}})
    if (!(v > 0)) e.push_back(std::string("tolerances.") + name + ": must be > 0");
  if (!(t.rate_fraction > 0 && t.rate_fraction <= 1)) e.push_back("tolerances.rate_fraction: must lie in (0, 1]");
  if (!(t.quad_lo < t.quad_hi)) e.push_back("tolerances.quad_lo/quad_hi: need quad_lo < quad_hi");
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> fields) : std::runtime_error(join_fields(fields)), fields_(std::move(fields)) {}

Tolerances Tolerances::scaled(double f) const {
  Tolerances t = *this;
  t.slope_slack *= f;
  t.l1_max *= f;
  t.invariant_tol *= f;
  t.ground_tol *= f;
  t.refinement_rel *= f;
  t.blowup_factor = 1.0 + (blowup_factor - 1.0) * f;
  t.rate_fraction = 1.0 - (1.0 - rate_fraction) * f;
  const double mid = 0.5 * (quad_lo + quad_hi), half = 0.5 * (quad_hi - quad_lo) * f;
  t.quad_lo = mid - half;
  t.quad_hi = mid + half;
  return t;
}

nlohmann::json Tolerances::to_json() const {
  return {{"slope_slack", slope_slack},     {"blowup_factor", blowup_factor}, {"rate_fraction", rate_fraction},
          {"quad_lo", quad_lo},             {"quad_hi", quad_hi},             {"l1_max", l1_max},
          {"invariant_tol", invariant_tol}, {"ground_tol", ground_tol},
          {"refinement_rel", refinement_rel}, {"gauss_floor", gauss_floor}};
}

nlohmann::json ExperimentConfig::to_json() const {
  const auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json("auto"); };
  nlohmann::json j;
  j["experiment"] = {{"name", name}, {"seed", seed}};
  j["potential"] = {{"family", potential.family}, {"kappa", potential.kappa}, {"alpha", potential.alpha},
                    {"dim", potential.dim}};
  j["weight"] = {{"beta", beta}};
  j["hypothesis"] = {{"enabled", hypothesis.enabled}, {"c", opt(hypothesis.c)}, {"alpha", hypothesis.alpha},
                     {"delta", hypothesis.delta},     {"cauchy", hypothesis.cauchy}, {"eps_tol", hypothesis.eps_tol},
                     {"R", hypothesis.radius},        {"points", hypothesis.points}};
  j["lyapunov"] = {{"enabled", lyapunov.enabled},
                   {"form", lyapunov.form},
                   {"a", lyapunov.a},
                   {"a_pow", lyapunov.a_pow},
                   {"xi", lyapunov.xi},
                   {"gamma", lyapunov.gamma},
                   {"b", lyapunov.b_exp},
                   {"c_rate", lyapunov.c_rate},
                   {"rate_exponent", lyapunov.rate_exponent},
                   {"smoothing_radius", lyapunov.smoothing_radius},
                   {"R", lyapunov.radius},
                   {"points", lyapunov.points},
                   {"tail_fraction", lyapunov.tail_fraction}};
  j["grid"] = {{"N", grid.n}, {"R", grid.radius}, {"truncation_tol", grid.truncation_tol}};
  j["spi"] = {{"enabled", spi.enabled},   {"s_grid", spi.s_grid.values}, {"restarts", spi.restarts},
              {"max_iter", spi.max_iter}, {"p", opt(spi.p)},             {"exp_power", spi.exp_power},
              {"theta", spi.theta}};
  j["kernel"] = {{"enabled", kernel.enabled},
                 {"epsilon", kernel.epsilon},
                 {"allow_zero_epsilon", kernel.allow_zero_epsilon},
                 {"p", opt(kernel.p)},
                 {"t_ondiag", kernel.t_ondiag.values},
                 {"t_offdiag", kernel.t_offdiag.values},
                 {"t_longtime", kernel.t_longtime.values},
                 {"t_twist", kernel.t_twist.values},
                 {"pair_radius", kernel.pair_radius},
                 {"pair_stride", kernel.pair_stride},
                 {"poincare", kernel.poincare},
                 {"poincare_omega", kernel.poincare_omega},
                 {"longtime", kernel.longtime},
                 {"twist", kernel.twist},
                 {"twist_a", kernel.twist_a},
                 {"twist_r", kernel.twist_r},
                 {"twist_w", kernel.twist_w},
                 {"csv_stride", kernel.csv_stride}};
  j["mc"] = {{"enabled", mc.enabled}, {"n_paths", mc.n_paths}, {"dt", mc.dt},
             {"t", mc.t},             {"x0", mc.x0},           {"export_samples", mc.export_samples}};
  j["tolerances"] = tol.to_json();
  return j;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string ExperimentConfig::hash() const { return fnv1a_hex(to_json().dump()); }

ExperimentConfig parse_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& err) {
    throw ConfigError({std::string("syntax: ") + err.message() + " (line " + std::to_string(err.line()) + ")"});
  }

  ExperimentConfig c;
  std::vector<std::string> errors;
  Reader r(tree, errors);
  r.get("experiment.name", c.name);
  r.get("experiment.seed", c.seed);

  r.get("potential.family", c.potential.family);
  r.get("potential.kappa", c.potential.kappa);
  r.get("potential.alpha", c.potential.alpha);
  r.get("potential.dim", c.potential.dim);
  r.get("weight.beta", c.beta);

  auto& h = c.hypothesis;
  r.get("hypothesis.enabled", h.enabled);
  r.get_auto("hypothesis.c", h.c);
  r.get("hypothesis.alpha", h.alpha);
  r.get("hypothesis.delta", h.delta);
  r.get("hypothesis.cauchy", h.cauchy);
  r.get("hypothesis.eps_tol", h.eps_tol);
  r.get("hypothesis.R", h.radius);
  r.get("hypothesis.points", h.points);

  auto& l = c.lyapunov;
  r.get("lyapunov.enabled", l.enabled);
  r.get("lyapunov.form", l.form);
  r.get("lyapunov.a", l.a);
  r.get("lyapunov.a_pow", l.a_pow);
  r.get("lyapunov.xi", l.xi);
  r.get("lyapunov.gamma", l.gamma);
  r.get("lyapunov.b", l.b_exp);
  r.get("lyapunov.c_rate", l.c_rate);
  r.get("lyapunov.rate_exponent", l.rate_exponent);
  r.get("lyapunov.smoothing_radius", l.smoothing_radius);
  r.get("lyapunov.R", l.radius);
  r.get("lyapunov.points", l.points);
  r.get("lyapunov.tail_fraction", l.tail_fraction);

  r.get("grid.N", c.grid.n);
  r.get("grid.R", c.grid.radius);
  r.get("grid.truncation_tol", c.grid.truncation_tol);

  auto& s = c.spi;
  r.get("spi.enabled", s.enabled);
  r.get_grid("spi.s_grid", s.s_grid);
  r.get("spi.restarts", s.restarts);
  r.get("spi.max_iter", s.max_iter);
  r.get_auto("spi.p", s.p);
  r.get("spi.exp_power", s.exp_power);
  r.get("spi.theta", s.theta);

  auto& k = c.kernel;
  r.get("kernel.enabled", k.enabled);
  r.get("kernel.epsilon", k.epsilon);
  r.get("kernel.allow_zero_epsilon", k.allow_zero_epsilon);
  r.get_auto("kernel.p", k.p);
  r.get_grid("kernel.t_ondiag", k.t_ondiag);
  r.get_grid("kernel.t_offdiag", k.t_offdiag);
  r.get_grid("kernel.t_longtime", k.t_longtime);
  r.get_grid("kernel.t_twist", k.t_twist);
  r.get("kernel.pair_radius", k.pair_radius);
  r.get("kernel.pair_stride", k.pair_stride);
  r.get("kernel.poincare", k.poincare);
  r.get("kernel.poincare_omega", k.poincare_omega);
  r.get("kernel.longtime", k.longtime);
  r.get("kernel.twist", k.twist);
  r.get_list("kernel.twist_a", k.twist_a);
  r.get("kernel.twist_r", k.twist_r);
  r.get("kernel.twist_w", k.twist_w);
  r.get("kernel.csv_stride", k.csv_stride);

  auto& m = c.mc;
  r.get("mc.enabled", m.enabled);
  r.get("mc.n_paths", m.n_paths);
  r.get("mc.dt", m.dt);
  r.get("mc.t", m.t);
  r.get("mc.x0", m.x0);
  r.get("mc.export_samples", m.export_samples);

  auto& t = c.tol;
  r.get("tolerances.slope_slack", t.slope_slack);
  r.get("tolerances.blowup_factor", t.blowup_factor);
  r.get("tolerances.rate_fraction", t.rate_fraction);
  r.get("tolerances.quad_lo", t.quad_lo);
  r.get("tolerances.quad_hi", t.quad_hi);
  r.get("tolerances.l1_max", t.l1_max);
  r.get("tolerances.invariant_tol", t.invariant_tol);
  r.get("tolerances.ground_tol", t.ground_tol);
  r.get("tolerances.refinement_rel", t.refinement_rel);
  r.get("tolerances.gauss_floor", t.gauss_floor);

  r.report_unknown();
  validate(c, errors);
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"--config: cannot open " + path.string()});
  return parse_config(in);
}

std::filesystem::path resolve_config(const std::string& name_or_path) {
  namespace fs = std::filesystem;
  if (fs::is_regular_file(name_or_path)) return name_or_path;
  for (const fs::path& dir : {fs::path(HKB_PRESET_DIR), fs::path("presets")}) {
    const auto candidate = dir / (name_or_path + ".ini");
    if (fs::is_regular_file(candidate)) return candidate;
  }
  throw ConfigError({"--config: no file or bundled preset named '" + name_or_path + "'"});
}

}  // namespace hkb
