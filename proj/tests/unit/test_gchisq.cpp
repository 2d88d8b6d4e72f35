#include <cmath>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/non_central_chi_squared.hpp>

#include "doctest.h"
#include "gchisq.hpp"
#include "rng.hpp"

using namespace rareebm;

TEST_CASE("one degree of freedom at the 95 % point") {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(1);
  Eigen::MatrixXd c = Eigen::MatrixXd::Identity(1, 1);
  CHECK(gaussian_quadratic_tail(m, c, 3.841459) == doctest::Approx(0.05).epsilon(1e-6));
}

TEST_CASE("isotropic covariance reduces to a scaled noncentral chi-square") {
  const int k = 9;
  Eigen::VectorXd m = Eigen::VectorXd::Constant(k, 1.0);
  const double s2 = 0.09;
  Eigen::MatrixXd c = s2 * Eigen::MatrixXd::Identity(k, k);
  boost::math::non_central_chi_squared_distribution<> ref(k, m.squaredNorm() / s2);
  for (double t : {9.0, 12.0, 15.0, 20.0}) {
    const double expected = boost::math::cdf(boost::math::complement(ref, t / s2));
    CHECK(gaussian_quadratic_tail(m, c, t) == doctest::Approx(expected).epsilon(1e-6));
  }
}

TEST_CASE("central chi-square with many degrees of freedom") {
  const int k = 20;
  Eigen::VectorXd m = Eigen::VectorXd::Zero(k);
  Eigen::MatrixXd c = Eigen::MatrixXd::Identity(k, k);
  boost::math::chi_squared_distribution<> ref(k);
  CHECK(gaussian_quadratic_tail(m, c, 45.0) ==
        doctest::Approx(boost::math::cdf(boost::math::complement(ref, 45.0))).epsilon(1e-6));
}

namespace {

Eigen::MatrixXd mixed_covariance() {
  Eigen::MatrixXd a(3, 3);
  a << 1.0, 0.3, -0.2, 0.3, 0.5, 0.1, -0.2, 0.1, 0.2;
  return a * a.transpose() + 0.05 * Eigen::MatrixXd::Identity(3, 3);
}

}  // namespace

TEST_CASE("correlated form agrees with crude Monte Carlo") {
  Eigen::VectorXd m(3);
  m << 0.5, -0.2, 1.0;
  const Eigen::MatrixXd c = mixed_covariance();
  const double t = 6.0;
  const double p = gaussian_quadratic_tail(m, c, t);

  Eigen::LLT<Eigen::MatrixXd> llt(c);
  const Eigen::MatrixXd l = llt.matrixL();
  RngStream rng(2024);
  const std::size_t n = 10000000;
  std::size_t hits = 0;
  Eigen::VectorXd z(3);
  for (std::size_t i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) z(j) = rng.normal();
    hits += (m + l * z).squaredNorm() >= t;
  }
  const double mc = static_cast<double>(hits) / n;
  const double sd = std::sqrt(mc * (1.0 - mc) / n);
  CHECK(std::abs(p - mc) <= 3.0 * sd);
}

TEST_CASE("tilted importance sampling agrees with the inversion in the far tail") {
  Eigen::VectorXd m(3);
  m << 0.5, -0.2, 1.0;
  const Eigen::MatrixXd c = mixed_covariance();
  const double t = 40.0;
  const double p = gaussian_quadratic_tail(m, c, t);
  RngStream rng(9);
  auto is = gaussian_quadratic_tail_importance(m, c, t, rng, 200000);
  CHECK(p < 1e-4);
  CHECK(std::abs(is.estimate - p) <= 4.0 * is.std_error);
  CHECK(is.std_error < 0.05 * is.estimate);
}

TEST_CASE("rejects covariance that is not positive semi-definite") {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(2);
  Eigen::MatrixXd c(2, 2);
  c << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS(gaussian_quadratic_tail(m, c, 1.0));
}
