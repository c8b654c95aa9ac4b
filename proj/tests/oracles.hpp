#pragma once

// Independent reference values. Nothing here calls into the library.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

namespace oracle {

/// OU kernel density w.r.t. μ = N(0, 1/kappa) for U = kappa x^2 / 2 (Mehler's formula).
inline double mehler(double x, double y, double t, double kappa = 1.0) {
  const double s = std::sqrt(kappa);
  x *= s;
  y *= s;
  const double e1 = std::exp(-kappa * t), e2 = e1 * e1;
  const double d = 1.0 - e2;
  return std::exp(-(e2 * (x * x + y * y) - 2.0 * e1 * x * y) / (2.0 * d)) / std::sqrt(d);
}

/// Mean and variance of X_t given X_0 = x0 for dX = −kappa X dt + √2 dB.
struct Gaussian {
  double mean, var;
};
inline Gaussian ou_law(double x0, double t, double kappa = 1.0) {
  return {x0 * std::exp(-kappa * t), (1.0 - std::exp(-2.0 * kappa * t)) / kappa};
}

/// LW / W for U = x^2/2 and W = e^{x^2/8}.
inline double ou_lyapunov_ratio(double x) { return 0.25 - 3.0 * x * x / 16.0; }

inline double central_diff(const std::function<double(double)>& f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}
inline double second_diff(const std::function<double(double)>& f, double x, double h = 1e-4) {
  return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
}

/// Solves the tridiagonal system (sub, diag, sup) z = rhs by Thomas elimination.
/// Returns false on a zero pivot.
inline bool thomas(std::vector<double> sub, std::vector<double> diag, std::vector<double> sup, std::vector<double> rhs,
                   std::vector<double>& z) {
  const std::size_t n = diag.size();
  for (std::size_t i = 1; i < n; ++i) {
    if (diag[i - 1] == 0.0) return false;
    const double w = sub[i - 1] / diag[i - 1];
    diag[i] -= w * sup[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  if (diag[n - 1] == 0.0) return false;
  z.assign(n, 0.0);
  z[n - 1] = rhs[n - 1] / diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) z[i] = (rhs[i] - sup[i] * z[i + 1]) / diag[i];
  return true;
}

/// max { f'Mf − s f'Af : f >= 0, v'f = 1 } with M = diag(mass) and A the path-graph
/// Laplacian with edge weights `cond`. A maximizer has contiguous support (on two
/// disjoint blocks the objective is convex along the segment between them), and on
/// its support it is the stationary point f = Q^{-1} v / (v'Q^{-1}v) with value
/// 1 / (v'Q^{-1}v). Enumerating every interval therefore gives the exact optimum.
inline double best_b_by_intervals(const std::vector<double>& mass, const std::vector<double>& cond,
                                  const std::vector<double>& v, double s) {
  const std::size_t n = mass.size();
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> z;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a; b < n; ++b) {
      const std::size_t m = b - a + 1;
      std::vector<double> diag(m), off(m > 1 ? m - 1 : 0), rhs(m);
      for (std::size_t k = 0; k < m; ++k) {
        const std::size_t i = a + k;
        const double left = i > 0 ? cond[i - 1] : 0.0;
        const double right = i + 1 < n ? cond[i] : 0.0;
        diag[k] = mass[i] - s * (left + right);
        rhs[k] = v[i];
        if (k + 1 < m) off[k] = s * cond[i];
      }
      if (!thomas(off, diag, off, rhs, z)) continue;
      double vz = 0.0;
      for (std::size_t k = 0; k < m; ++k) vz += v[a + k] * z[k];
      if (!(vz != 0.0)) continue;
      bool feasible = true;
      for (double zk : z) feasible = feasible && zk / vz >= -1e-13;
      if (feasible) best = std::max(best, 1.0 / vz);
    }
  }
  return best;
}

}  // namespace oracle
