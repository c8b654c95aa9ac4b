#pragma once

#include <cmath>

#include "hkb/potentials.hpp"

namespace hkb {

/// V(x) = (1 + |x|^2)^{-beta/2} e^{U(x)/2}, with U the (normalized) potential.
class Weight {
 public:
  Weight(Potential potential, double beta) : potential_(std::move(potential)), beta_(beta) {}

  double operator()(double x) const {
    return std::pow(1.0 + x * x, -0.5 * beta_) * std::exp(0.5 * potential_.u(x));
  }
  double beta() const { return beta_; }
  const Potential& potential() const { return potential_; }

  /// V^2 e^{-U} = (1+|x|^2)^{-beta} is Lebesgue integrable iff 2 beta > d.
  bool square_integrable() const { return 2.0 * beta_ > potential_.dim(); }

 private:
  Potential potential_;
  double beta_;
};

}  // namespace hkb
