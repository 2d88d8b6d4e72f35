#include <cmath>
#include <sstream>

#include "bias.hpp"
#include "densities.hpp"
#include "doctest.h"
#include "errors.hpp"
#include "estimator.hpp"

using namespace rareebm;

TEST_CASE("zero bias returns the reference tail") {
  const auto p = ReferenceDensity::gaussian(0.0, 1.0);
  GridDomain g(-10.0, 10.0, 0.01);
  const BiasPotential v = GridBias{GridFunction::constant(g, 0.0)};
  auto est = free_energy_from_bias(v, p, g);
  CHECK(grid_integral(est.density) == doctest::Approx(1.0).epsilon(1e-12));
  for (double t : {-1.0, 0.0, 1.959964, 3.0}) {
    auto tp = tail_probability(est, t);
    CHECK(tp.value == doctest::Approx(normal_sf(t)).epsilon(2e-4));
    CHECK_FALSE(tp.truncation_warning);
  }
}

TEST_CASE("bias equal to a log ratio recovers the target tail") {
  // p_R = N(1, 0.5^2) and p_ref = N(0, 2^2): V = log p_R - log p_ref.
  const auto p_ref = ReferenceDensity::gaussian(0.0, 2.0);
  const auto p_r = ReferenceDensity::gaussian(1.0, 0.5);
  GridDomain g(-8.0, 8.0, 0.005);
  std::vector<double> v;
  for (double r : g.nodes()) v.push_back(p_r.log_pdf(r) - p_ref.log_pdf(r));
  auto est = free_energy_from_bias(GridBias{GridFunction(g, v)}, p_ref, g);
  CHECK(tail_probability(est, 2.5).value == doctest::Approx(normal_sf(3.0)).epsilon(1e-3));
  CHECK(est.free_energy.interpolate(1.0) == doctest::Approx(-p_r.log_pdf(1.0)).epsilon(1e-9));
}

TEST_CASE("threshold inside a cell is integrated from the threshold") {
  const auto p = ReferenceDensity::gaussian(0.0, 1.0);
  GridDomain coarse(-8.0, 8.0, 0.5);
  auto est = free_energy_from_bias(GridBias{GridFunction::constant(coarse, 0.0)}, p, coarse);
  const double a = tail_probability(est, 1.0).value;
  const double b = tail_probability(est, 1.25).value;
  const double c = tail_probability(est, 1.5).value;
  CHECK(a > b);
  CHECK(b > c);
  // Exactly half way through a linear cell.
  const double f1 = est.density.interpolate(1.0), f15 = est.density.interpolate(1.5);
  const double fm = 0.5 * (f1 + f15);
  CHECK(a - b == doctest::Approx(0.25 * 0.5 * (f1 + fm)).epsilon(1e-12));
}

TEST_CASE("support mask for a bounded reference density") {
  const auto p = ReferenceDensity::gev(2.0, 2.0, 0.33);
  GridDomain g(-10.0, 100.0, 0.1);
  auto est = free_energy_from_bias(GridBias{GridFunction::constant(g, 0.0)}, p, g);
  CHECK_FALSE(est.support[g.nearest(-8.0)]);
  CHECK(est.support[g.nearest(0.0)]);
  CHECK(est.density[g.nearest(-8.0)] == 0.0);
  CHECK(tail_probability(est, 2.0).value == doctest::Approx(1.0 - p.cdf(2.0)).epsilon(1e-3));

  std::ostringstream os;
  write_free_energy_csv(os, est);
  CHECK(os.str().find(",,") != std::string::npos);
}

TEST_CASE("truncation warning and domain errors") {
  const auto p = ReferenceDensity::gaussian(0.0, 1.0);
  GridDomain g(-3.0, 1.0, 0.01);
  auto est = free_energy_from_bias(GridBias{GridFunction::constant(g, 0.0)}, p, g);
  CHECK(tail_probability(est, 0.5).truncation_warning);
  CHECK_THROWS(tail_probability(est, 5.0));
}
