#pragma once

#include <Eigen/Dense>

#include "rng.hpp"

namespace rareebm {

// Tail of a Gaussian quadratic form: P(theta' theta >= threshold) for
// theta ~ N(mean, cov). The covariance is eigendecomposed so the form becomes
// a weighted sum of noncentral chi-squares, whose tail is recovered from its
// characteristic function by Imhof's inversion integral.
double gaussian_quadratic_tail(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, double threshold);

struct MonteCarloEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

// Importance sampling with an exponentially tilted proposal q ~ N(m_t, S_t)
// proportional to exp(t theta'theta) N(mean, cov), with t chosen so that the
// tilted mean of the form equals the threshold.
MonteCarloEstimate gaussian_quadratic_tail_importance(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                                      double threshold, RngStream& rng, std::size_t n);

}  // namespace rareebm
