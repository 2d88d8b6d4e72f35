#pragma once

#include <span>
#include <variant>
#include <vector>

#include "densities.hpp"
#include "rng.hpp"

namespace rareebm {

// exp(-(r-s)^2 / (2 h^2))
struct SquaredExponential {
  double bandwidth = 1.0;
};
// (c^2 + (r-s)^2)^exponent, exponent in (-1, 0)
struct InverseMultiquadric {
  double c = 1.0;
  double exponent = -0.5;
};

struct SteinKernelConfig {
  std::variant<SquaredExponential, InverseMultiquadric> base = SquaredExponential{};
  // Replace the SE bandwidth by the median pairwise distance of the sample set
  // (floored at 1e-3). Ignored for the IMQ kernel.
  bool median_heuristic = true;
};

struct KsdTestConfig {
  double alpha = 0.95;  // confidence level; test size is 1 - alpha
  double a_bs = 0.4;    // sign-flip probability of the bootstrap chain
  std::size_t n_boot = 1000;
};

struct KsdTestResult {
  bool reject = false;
  double p_value = 1.0;
  double statistic = 0.0;  // squared KSD, V-statistic form
};

struct TestPlan {
  double a_bs;
  std::size_t n_min;
};

void validate(const SteinKernelConfig& cfg);
void validate(const KsdTestConfig& cfg);

double median_pairwise_distance(std::span<const double> samples);

// Resolves the median heuristic against a sample set; the result has a fixed
// bandwidth and median_heuristic == false.
SteinKernelConfig resolve_kernel(const SteinKernelConfig& cfg, std::span<const double> samples);

// Langevin Stein kernel in one dimension with the score of p_ref. Uses the
// configured bandwidth as is (no median heuristic).
double stein_kernel(double r, double s, const ReferenceDensity& p_ref, const SteinKernelConfig& cfg);

// sqrt((1/n^2) sum_ij k_p(r_i, r_j)).
double ksd_statistic(std::span<const double> samples, const ReferenceDensity& p_ref, const SteinKernelConfig& cfg);

// Wild bootstrap with a sign-flipping Markov chain W_1 = 1,
// W_i = -W_{i-1} with probability a_bs.
KsdTestResult wild_bootstrap_test(std::span<const double> samples, const ReferenceDensity& p_ref,
                                  const SteinKernelConfig& kernel, const KsdTestConfig& test, RngStream& rng);

// a_bs = 0.1 / q and n_min = max(500 q, 100) for thinning-derived q in [1, 10).
TestPlan recommended_test_plan(int q);

}  // namespace rareebm
