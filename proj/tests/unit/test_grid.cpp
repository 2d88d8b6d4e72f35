#include <cmath>
#include <sstream>

#include "doctest.h"
#include "errors.hpp"
#include "grid.hpp"

using namespace rareebm;

TEST_CASE("grid domain nodes and lookup") {
  GridDomain g(-1.0, 1.0, 0.25);
  CHECK(g.size() == 9);
  CHECK(g.node(0) == -1.0);
  CHECK(g.node(8) == doctest::Approx(1.0));
  CHECK(g.nearest(0.1) == 4);
  CHECK(g.nearest(0.13) == 5);
  CHECK(g.contains(1.0));
  CHECK_FALSE(g.contains(1.5));
  CHECK(g.nodes().size() == 9);
  CHECK(g == GridDomain(-1.0, 1.0, 0.25));
}

TEST_CASE("grid domain rejects bad ranges") {
  CHECK_THROWS(GridDomain(1.0, -1.0, 0.1));
  CHECK_THROWS(GridDomain(0.0, 1.0, 0.0));
  CHECK_THROWS(GridDomain(0.0, 1.0, -0.1));
}

TEST_CASE("trapezoid integral is exact for linear functions") {
  GridDomain g(0.0, 2.0, 0.1);
  std::vector<double> v;
  for (double r : g.nodes()) v.push_back(3.0 * r + 1.0);
  GridFunction f(g, v);
  CHECK(grid_integral(f) == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(grid_integral(f, 0.5, 1.5) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("interpolation is linear inside and flat outside") {
  GridDomain g(0.0, 1.0, 0.5);
  GridFunction f(g, {0.0, 1.0, 4.0});
  CHECK(f.interpolate(0.25) == doctest::Approx(0.5));
  CHECK(f.interpolate(0.75) == doctest::Approx(2.5));
  CHECK(f.interpolate(-3.0) == 0.0);
  CHECK(f.interpolate(7.0) == 4.0);
}

TEST_CASE("normalisation and csv output") {
  GridDomain g(0.0, 1.0, 0.5);
  GridFunction f(g, {2.0, 2.0, 2.0});
  CHECK(grid_integral(grid_normalize(f)) == doctest::Approx(1.0));
  CHECK_THROWS(grid_normalize(GridFunction::constant(g, 0.0)));

  std::ostringstream os;
  write_csv(os, f, "p");
  CHECK(os.str().rfind("r,p\n", 0) == 0);
}

TEST_CASE("values must match the domain") {
  GridDomain g(0.0, 1.0, 0.5);
  CHECK_THROWS(GridFunction(g, {1.0, 2.0}));
}
