#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hkb {

/// Uniform grid on [lo, hi] with n >= 2 nodes, endpoints included.
struct Grid1D {
  std::vector<double> x;
  double h = 0.0;

  static Grid1D uniform(double lo, double hi, std::size_t n);
  static Grid1D symmetric(double radius, std::size_t n) { return uniform(-radius, radius, n); }

  std::size_t size() const { return x.size(); }
  bool empty() const { return x.empty(); }
  double lo() const { return x.front(); }
  double hi() const { return x.back(); }
  double operator[](std::size_t i) const { return x[i]; }

  /// Trapezoid weight of node i.
  double weight(std::size_t i) const {
    return (i == 0 || i + 1 == x.size()) ? 0.5 * h : h;
  }
};

std::vector<double> linspace(double lo, double hi, std::size_t n);
std::vector<double> logspace(double lo, double hi, std::size_t n);

/// Least-squares slope and intercept of y against x.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};
LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Least-squares coefficients (c0, c1, c2) of y = c0 + c1 x + c2 x^2.
struct QuadraticFit {
  double c0 = 0.0, c1 = 0.0, c2 = 0.0;
};
QuadraticFit fit_quadratic(std::span<const double> x, std::span<const double> y);

}  // namespace hkb
