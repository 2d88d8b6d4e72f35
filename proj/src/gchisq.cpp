#include "gchisq.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "errors.hpp"

namespace rareebm {
namespace {

// theta'theta = sum_j lambda_j (z_j + delta_j)^2 + offset with z iid N(0,1).
struct QuadraticForm {
  std::vector<double> lambda;
  std::vector<double> delta2;
  std::vector<double> shift;  // b_j = (Q' mean)_j, used by the tilted sampler
  double offset = 0.0;
};

QuadraticForm decompose(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols() || cov.rows() != mean.size())
    throw NumericError("quadratic form: mean/covariance dimensions disagree");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericError("quadratic form: eigendecomposition failed");
  const Eigen::VectorXd lam = eig.eigenvalues();
  const double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
  if (lam.minCoeff() < -1e-12 * scale) throw NumericError("quadratic form: covariance is not positive semidefinite");
  const Eigen::VectorXd b = eig.eigenvectors().transpose() * mean;
  QuadraticForm q;
  for (Eigen::Index j = 0; j < lam.size(); ++j) {
    if (lam(j) <= 1e-14 * scale) {
      q.offset += b(j) * b(j);
      continue;
    }
    q.lambda.push_back(lam(j));
    q.delta2.push_back(b(j) * b(j) / lam(j));
    q.shift.push_back(b(j));
  }
  return q;
}

// Wynn's epsilon algorithm on a sequence of partial sums; returns the last
// even-column entry, which is the accelerated limit.
double wynn_epsilon(const std::vector<double>& s) {
  const std::size_t n = s.size();
  std::vector<double> prev(n + 1, 0.0), cur(s.begin(), s.end());
  double best = s.back();
  for (std::size_t k = 1; k < n; ++k) {
    std::vector<double> next(n - k);
    bool ok = true;
    for (std::size_t i = 0; i + k < n; ++i) {
      const double diff = cur[i + 1] - cur[i];
      if (diff == 0.0) {
        ok = false;
        break;
      }
      next[i] = prev[i + 1] + 1.0 / diff;
    }
    if (!ok) break;
    prev = std::move(cur);
    cur = std::move(next);
    if (k % 2 == 0 && std::isfinite(cur.back())) best = cur.back();
  }
  return best;
}

}  // namespace

double gaussian_quadratic_tail(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, double threshold) {
  const QuadraticForm q = decompose(mean, cov);
  const double x = threshold - q.offset;
  if (q.lambda.empty()) return x <= 0.0 ? 1.0 : 0.0;
  if (x <= 0.0) return 1.0;

  const std::size_t m = q.lambda.size();
  auto phase = [&](double u) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double lu = q.lambda[j] * u;
      s += std::atan(lu) + q.delta2[j] * lu / (1.0 + lu * lu);
    }
    return 0.5 * s - 0.5 * x * u;
  };
  auto log_rho = [&](double u) {
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double lu2 = q.lambda[j] * q.lambda[j] * u * u;
      s += 0.25 * std::log1p(lu2) + 0.5 * q.delta2[j] * lu2 / (1.0 + lu2);
    }
    return s;
  };
  double slope0 = 0.0;  // limit of the integrand at u -> 0
  for (std::size_t j = 0; j < m; ++j) slope0 += 0.5 * q.lambda[j] * (1.0 + q.delta2[j]);
  slope0 -= 0.5 * x;
  auto integrand = [&](double u) {
    if (u < 1e-300) return slope0;
    return std::sin(phase(u)) / (u * std::exp(log_rho(u)));
  };

  // Integrate over half-periods of the asymptotic phase (d pi/4 - x u/2) so the
  // piece integrals alternate, then accelerate the partial sums.
  const double omega = 0.5 * x;
  const double phase_inf = 0.25 * std::numbers::pi * static_cast<double>(m);
  const double half_period = std::numbers::pi / omega;
  double first = (phase_inf + std::numbers::pi) / omega;
  while (first > half_period) first -= half_period;
  if (first < 0.25 * half_period) first += half_period;

  using Quad = boost::math::quadrature::gauss_kronrod<double, 31>;
  double total = Quad::integrate(integrand, 0.0, first, 8, 1e-12);
  std::vector<double> partial{total};
  double a = first;
  double accelerated = std::numeric_limits<double>::quiet_NaN();
  constexpr std::size_t kMaxPieces = 200000;
  constexpr std::size_t kWindow = 41;
  for (std::size_t k = 0; k < kMaxPieces; ++k) {
    const double b = a + half_period;
    total += Quad::integrate(integrand, a, b, 8, 1e-12);
    partial.push_back(total);
    // Bound on everything beyond b: integrand magnitude decays monotonically.
    const double bound = half_period / (b * std::exp(log_rho(b)));
    a = b;
    if (bound < 1e-18) return std::clamp(0.5 + total / std::numbers::pi, 0.0, 1.0);
    if (partial.size() >= 2 * kWindow && partial.size() % kWindow == 0) {
      const std::vector<double> tail(partial.end() - kWindow, partial.end());
      const double limit = wynn_epsilon(tail);
      if (std::abs(limit - accelerated) < 1e-16 + 1e-10 * std::abs(0.5 * std::numbers::pi + limit))
        return std::clamp(0.5 + limit / std::numbers::pi, 0.0, 1.0);
      accelerated = limit;
    }
  }
  throw NumericError("quadratic form tail: inversion integral did not converge");
}

MonteCarloEstimate gaussian_quadratic_tail_importance(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                                      double threshold, RngStream& rng, std::size_t n) {
  if (n < 2) throw EstimationError("importance sampling needs at least two draws");
  const QuadraticForm q = decompose(mean, cov);
  const std::size_t m = q.lambda.size();
  const double x = threshold - q.offset;
  if (m == 0) return {x <= 0.0 ? 1.0 : 0.0, 0.0};

  // Cumulant generating function of sum_j y_j^2, y_j ~ N(b_j, lambda_j).
  auto cgf = [&](double t) {
    double k = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double a = 1.0 - 2.0 * t * q.lambda[j];
      k += -0.5 * std::log(a) + t * q.shift[j] * q.shift[j] / a;
    }
    return k;
  };
  auto cgf_prime = [&](double t) {
    double k = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double a = 1.0 - 2.0 * t * q.lambda[j];
      k += q.lambda[j] / a + q.shift[j] * q.shift[j] / (a * a);
    }
    return k;
  };
  double lam_max = 0.0;
  for (double l : q.lambda) lam_max = std::max(lam_max, l);
  double t = 0.0;
  if (cgf_prime(0.0) < x) {
    double lo = 0.0, hi = 0.5 / lam_max;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (cgf_prime(mid) < x ? lo : hi) = mid;
    }
    t = lo;
  }
  const double log_mgf = cgf(t);

  double sum = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double form = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double a = 1.0 - 2.0 * t * q.lambda[j];
      const double y = q.shift[j] / a + std::sqrt(q.lambda[j] / a) * rng.normal();
      form += y * y;
    }
    const double w = form >= x ? std::exp(log_mgf - t * form) : 0.0;
    sum += w;
    sum2 += w * w;
  }
  const double nn = static_cast<double>(n);
  const double est = sum / nn;
  const double var = std::max(0.0, (sum2 / nn - est * est) * nn / (nn - 1.0));
  return {est, std::sqrt(var / nn)};
}

}  // namespace rareebm
