#pragma once

// Potentials U on R^d for the reversible diffusion L f = Δf − ∇U·∇f and
// grid checks of the drift growth hypotheses.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "hkb/grid.hpp"

namespace hkb {

/// U(x) = (1 + |x|^2)^{alpha/2}.
struct PowerExponential {
  double alpha = 2.0;
};

/// U(x) = (d + alpha)/2 · log(1 + |x|^2).
struct GeneralizedCauchy {
  double alpha = 1.0;
  int dim = 1;
};

/// U(x) = kappa |x|^2 / 2.
struct Quadratic {
  double kappa = 1.0;
};

/// User supplied one-dimensional evaluators. All three are required.
struct CustomPotential {
  std::string name = "custom";
  std::function<double(double)> u;
  std::function<double(double)> du;
  std::function<double(double)> d2u;
};

using PotentialFamily = std::variant<PowerExponential, GeneralizedCauchy, Quadratic, CustomPotential>;

/// Value, gradient and Laplacian of U at a point.
struct PotentialPoint {
  double u = 0.0;
  std::vector<double> grad;
  double lap = 0.0;
};

/// Same in d = 1.
struct PotentialValue {
  double u = 0.0;
  double du = 0.0;
  double lap = 0.0;
};

/// A potential together with the additive constant making e^{-U} a
/// probability density on its truncation box. Immutable after construction.
class Potential {
 public:
  explicit Potential(PotentialFamily family, int dim = 1, std::optional<double> hessian_lb = std::nullopt);

  PotentialValue eval(double x) const;
  PotentialPoint eval(std::span<const double> x) const;

  double u(double x) const { return eval(x).u; }
  double du(double x) const { return eval(x).du; }

  /// Copy whose additive constant makes the trapezoid mass of e^{-U} on
  /// [-radius, radius] with n nodes equal to one.
  Potential normalized(double radius, std::size_t n) const;

  /// log Z added to the raw potential.
  double normalization() const { return log_norm_; }
  int dim() const { return dim_; }
  std::optional<double> hessian_lb() const { return hessian_lb_; }
  const PotentialFamily& family() const { return family_; }
  std::string family_name() const;

  /// Mass of the raw density e^{-U} over the whole line, by the substitution
  /// x = tan(theta). Returns +inf when the integral does not converge.
  double total_raw_mass() const;

  /// Mass of the raw density on [-radius, radius] (trapezoid, n nodes).
  double box_raw_mass(double radius, std::size_t n) const;

 private:
  PotentialValue raw(double x) const;

  PotentialFamily family_;
  int dim_ = 1;
  std::optional<double> hessian_lb_;
  double log_norm_ = 0.0;
};

/// Hypotheses on the drift: ∇U·x >= |x|^alpha / c − c and |∇U| <= c (1 ∨ |x|^delta),
/// or in Cauchy mode liminf ∇U·x >= d + alpha.
struct DriftHypothesis {
  double c = 1.0;
  double alpha = 2.0;
  double delta = 1.0;
  bool cauchy_mode = false;
  double eps_tol = 0.05;
  int dim = 1;

  double liminf_target() const { return dim + alpha; }
};

struct HypothesisReport {
  bool pass = false;
  // Growth inequality (non-Cauchy) or liminf inequality (Cauchy).
  double worst_margin = 0.0;
  double worst_point = 0.0;
  // Gradient bound |∇U| <= c (1 ∨ |x|^delta).
  bool gradient_bound_pass = false;
  double gradient_worst_margin = 0.0;
  double gradient_worst_point = 0.0;
  // Smallest c for which both inequalities hold on the grid.
  double smallest_c = 0.0;
  // Growth exponent of |∇U| fitted on the outer half of the grid.
  double delta_fit = 0.0;
  // Cauchy mode: radius beyond which ∇U·x >= (d+alpha)(1 − eps_tol), and ∇U·x at the grid edge.
  double cauchy_radius = 0.0;
  double edge_value = 0.0;
};

HypothesisReport check_drift_hypothesis(const Potential& potential, const DriftHypothesis& hyp,
                                        const Grid1D& grid);

/// Smallest delta with |∇U| <= c (1 ∨ |x|^delta) for some c on the tail, estimated as the
/// log-log slope of |∇U| over |x| in [R/2, R].
double fit_gradient_exponent(const Potential& potential, const Grid1D& grid);

}  // namespace hkb
