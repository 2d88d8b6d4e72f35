#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rareebm {

using ScalarField = std::function<double(std::span<const double>)>;
using VectorMap = std::function<void(std::span<const double>, std::span<double>)>;

// Bijection between standard-normal coordinates u and model parameters theta.
struct StandardNormalMap {
  VectorMap to_theta;
  VectorMap to_standard;
};

// A rare-event target: prior (and optional likelihood) over theta in R^d and a
// scalar quantity of interest. Queries are always of the form P(qoi >= T).
struct TargetProblem {
  std::string name;
  std::size_t dim = 0;
  ScalarField log_prior;
  ScalarField log_likelihood;  // empty in the traditional (prior-only) setting
  ScalarField qoi;
  std::optional<StandardNormalMap> standard_normal;
  std::vector<double> initial_point;

  bool has_likelihood() const { return static_cast<bool>(log_likelihood); }
};

struct RareEventQuery {
  double threshold = 0.0;
  explicit RareEventQuery(double t);
};

// Closed-form Gaussian posterior.
struct GaussianPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// ---------------------------------------------------------------------------
// Contamination field: M cells with iid N(prior_mean, prior_sd^2) prior, noisy
// direct measurements of a few cells, qoi = sum of squares.

struct ContaminationSpec {
  int n_cells = 9;
  double prior_mean = 1.0;
  double prior_sd = 0.3;
  std::vector<int> measured_cells{0, 1, 4};
  double noise_sd = 0.05;
  std::optional<std::vector<double>> truth;
  std::optional<std::vector<double>> data;
  std::uint64_t seed = 3;
};

struct ContaminationCase {
  ContaminationSpec spec;
  std::vector<double> truth;
  std::vector<double> data;  // one entry per measured cell
  GaussianPosterior posterior;
  TargetProblem problem;
};

ContaminationCase contamination_problem(const ContaminationSpec& spec);
// CSV columns: cell, truth, measurement (blank when unmeasured).
void write_contamination_csv(std::ostream& os, const ContaminationCase& c);

// ---------------------------------------------------------------------------
// Four-branch series system in two standard-normal variables.

double four_branch(double theta1, double theta2);
// Prior N(0, I_2), qoi = -four_branch so that failure {R <= 0} is {qoi >= 0}.
TargetProblem four_branch_problem();

struct TailMonteCarlo {
  double threshold;
  double estimate;
  double std_error;
};

// Crude Monte Carlo of P(-four_branch(theta) >= t) under N(0, I_2), all
// thresholds from the same draws.
std::vector<TailMonteCarlo> four_branch_tail_mc(std::span<const double> thresholds, std::uint64_t samples,
                                                std::uint64_t seed);

// ---------------------------------------------------------------------------
// Load exceeding a product of component capacities, with multiplicative
// lognormal measurements of each component.

struct LoadCapacitySpec {
  int n_components = 10;
  double load_mean = 2.0;
  double load_sd = 1.0;
  double capacity_mean = 12.0;
  double capacity_sd = 2.0;
  double sigma_y = 0.05;
  // Total measured capacity; each component observes total^(1/n_components).
  double measured_total = 8.0;
};

struct LoadCapacityParams {
  double gumbel_location;
  double gumbel_scale;
  double total_log_mean;   // mu_C
  double total_log_var;    // sigma_C^2
  double component_log_mean;
  double component_log_sd;
  double measurement;      // y_i
};

struct LoadCapacityCase {
  LoadCapacitySpec spec;
  LoadCapacityParams params;
  double posterior_component_log_mean;
  double posterior_component_log_var;
  TargetProblem problem;

  // P(load - capacity >= threshold | y) by adaptive quadrature over log-capacity.
  double failure_probability(double threshold = 0.0) const;
};

LoadCapacityCase load_capacity_problem(const LoadCapacitySpec& spec);

// ---------------------------------------------------------------------------
// One-dimensional N(0,1) prior with the identity as qoi; used for recovery checks.
TargetProblem standard_normal_line_problem();

}  // namespace rareebm
