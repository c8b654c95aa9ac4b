#include <cmath>
#include <vector>

#include "doctest.h"

#include "hkb/errors.hpp"
#include "hkb/grid.hpp"

using namespace hkb;

TEST_CASE("grids and fits") {
  const auto g = Grid1D::symmetric(2.0, 5);
  CHECK(g.h == doctest::Approx(1.0));
  CHECK(g.weight(0) == doctest::Approx(0.5));
  CHECK(g.weight(2) == doctest::Approx(1.0));
  const auto l = logspace(1e-3, 1e-1, 3);
  CHECK(l[1] == doctest::Approx(1e-2));
  CHECK(l.back() == 1e-1);

  std::vector<double> x{0, 1, 2, 3}, y, yq;
  for (double v : x) {
    y.push_back(2 * v + 1);
    yq.push_back(1 - v + 0.5 * v * v);
  }
  const auto f = fit_line(x, y);
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  const auto q = fit_quadratic(x, yq);
  CHECK(q.c2 == doctest::Approx(0.5));
  CHECK(q.c1 == doctest::Approx(-1.0));

  CHECK_THROWS_AS(Grid1D::uniform(1.0, 0.0, 10), InputError);
  CHECK_THROWS_AS(logspace(0.0, 1.0, 3), InputError);
  CHECK_THROWS_AS(fit_line(std::vector<double>{1, 1}, std::vector<double>{0, 1}), InputError);
}
