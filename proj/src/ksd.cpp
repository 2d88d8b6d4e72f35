#include "ksd.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "errors.hpp"

namespace rareebm {
namespace {

constexpr double kMinBandwidth = 1e-3;
// Median of pairwise distances is taken over at most this many points.
constexpr std::size_t kMedianSubset = 1000;

struct KernelTerms {
  double k, dr, ds, drs;
};

KernelTerms base_terms(double r, double s, const SteinKernelConfig& cfg) {
  const double d = r - s;
  if (const auto* se = std::get_if<SquaredExponential>(&cfg.base)) {
    const double h2 = se->bandwidth * se->bandwidth;
    const double k = std::exp(-0.5 * d * d / h2);
    return {k, -d / h2 * k, d / h2 * k, (1.0 / h2 - d * d / (h2 * h2)) * k};
  }
  const auto& imq = std::get<InverseMultiquadric>(cfg.base);
  const double b = imq.exponent;
  const double q = imq.c * imq.c + d * d;
  const double k = std::pow(q, b);
  const double k1 = std::pow(q, b - 1.0);
  const double k2 = std::pow(q, b - 2.0);
  return {k, 2.0 * b * d * k1, -2.0 * b * d * k1, -2.0 * b * k1 - 4.0 * b * (b - 1.0) * d * d * k2};
}

double stein_from_scores(double r, double s, double sr, double ss, const SteinKernelConfig& cfg) {
  const KernelTerms t = base_terms(r, s, cfg);
  return t.drs + sr * t.ds + ss * t.dr + sr * ss * t.k;
}

Eigen::MatrixXd stein_matrix(std::span<const double> x, const ReferenceDensity& p_ref, const SteinKernelConfig& cfg) {
  const std::size_t n = x.size();
  std::vector<double> score(n);
  for (std::size_t i = 0; i < n; ++i) score[i] = p_ref.score(x[i]);
  Eigen::MatrixXd K(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = stein_from_scores(x[i], x[j], score[i], score[j], cfg);
      K(i, j) = v;
      K(j, i) = v;
    }
  return K;
}

}  // namespace

void validate(const SteinKernelConfig& cfg) {
  if (const auto* se = std::get_if<SquaredExponential>(&cfg.base)) {
    if (!cfg.median_heuristic && !(se->bandwidth > 0.0)) throw ConfigError("KSD bandwidth must be positive");
  } else {
    const auto& imq = std::get<InverseMultiquadric>(cfg.base);
    if (!(imq.c > 0.0)) throw ConfigError("IMQ constant must be positive");
    if (!(imq.exponent > -1.0 && imq.exponent < 0.0)) throw ConfigError("IMQ exponent must lie in (-1, 0)");
  }
}

void validate(const KsdTestConfig& cfg) {
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw ConfigError("KSD confidence level must lie in (0, 1)");
  if (!(cfg.a_bs > 0.0 && cfg.a_bs <= 0.5)) throw ConfigError("bootstrap flip probability must lie in (0, 0.5]");
  if (cfg.n_boot == 0) throw ConfigError("n_boot must be positive");
}

double median_pairwise_distance(std::span<const double> samples) {
  std::vector<double> pts;
  if (samples.size() > kMedianSubset) {
    pts.reserve(kMedianSubset);
    for (std::size_t k = 0; k < kMedianSubset; ++k) pts.push_back(samples[k * samples.size() / kMedianSubset]);
  } else {
    pts.assign(samples.begin(), samples.end());
  }
  std::vector<double> d;
  d.reserve(pts.size() * (pts.size() - 1) / 2);
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j < i; ++j) d.push_back(std::abs(pts[i] - pts[j]));
  if (d.empty()) return 0.0;
  const std::size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  double m = d[mid];
  if (d.size() % 2 == 0) m = 0.5 * (m + *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid)));
  return m;
}

SteinKernelConfig resolve_kernel(const SteinKernelConfig& cfg, std::span<const double> samples) {
  validate(cfg);
  SteinKernelConfig out = cfg;
  out.median_heuristic = false;
  if (cfg.median_heuristic && std::holds_alternative<SquaredExponential>(cfg.base))
    out.base = SquaredExponential{std::max(kMinBandwidth, median_pairwise_distance(samples))};
  return out;
}

double stein_kernel(double r, double s, const ReferenceDensity& p_ref, const SteinKernelConfig& cfg) {
  return stein_from_scores(r, s, p_ref.score(r), p_ref.score(s), cfg);
}

double ksd_statistic(std::span<const double> samples, const ReferenceDensity& p_ref, const SteinKernelConfig& cfg) {
  if (samples.size() < 2) throw EstimationError("KSD needs at least two samples");
  const SteinKernelConfig k = resolve_kernel(cfg, samples);
  const Eigen::MatrixXd K = stein_matrix(samples, p_ref, k);
  const double n = static_cast<double>(samples.size());
  double s = K.sum() / (n * n);
  if (s < 0.0 && s > -1e-14) s = 0.0;
  if (s < 0.0) throw NumericError("KSD: negative V-statistic");
  return std::sqrt(s);
}

KsdTestResult wild_bootstrap_test(std::span<const double> samples, const ReferenceDensity& p_ref,
                                  const SteinKernelConfig& kernel, const KsdTestConfig& test, RngStream& rng) {
  if (samples.size() < 2) throw EstimationError("KSD test needs at least two samples");
  validate(test);
  const SteinKernelConfig k = resolve_kernel(kernel, samples);
  const Eigen::MatrixXd K = stein_matrix(samples, p_ref, k);
  if (K.cwiseAbs().maxCoeff() == 0.0) throw EstimationError("KSD test: Stein kernel matrix is identically zero");
  const std::size_t n = samples.size();
  const double nn = static_cast<double>(n) * static_cast<double>(n);
  KsdTestResult res;
  res.statistic = K.sum() / nn;

  Eigen::VectorXd w(static_cast<Eigen::Index>(n));
  std::size_t exceed = 0;
  for (std::size_t b = 0; b < test.n_boot; ++b) {
    w(0) = 1.0;
    for (std::size_t i = 1; i < n; ++i) {
      const double u = rng.uniform();
      w(static_cast<Eigen::Index>(i)) = u < test.a_bs ? -w(static_cast<Eigen::Index>(i - 1)) : w(static_cast<Eigen::Index>(i - 1));
    }
    const double sb = w.dot(K * w) / nn;
    // Relative slack so that replicates equal to the observed value in exact
    // arithmetic count as exceedances despite summation-order rounding.
    if (sb >= res.statistic - 1e-12 * std::abs(res.statistic)) ++exceed;
  }
  res.p_value = static_cast<double>(1 + exceed) / static_cast<double>(test.n_boot + 1);
  res.reject = res.p_value < 1.0 - test.alpha;
  return res;
}

TestPlan recommended_test_plan(int q) {
  if (q < 1 || q >= 10) throw ConfigError("test plan: q must satisfy 1 <= q < 10");
  return {0.1 / static_cast<double>(q), static_cast<std::size_t>(std::max(500 * q, 100))};
}

}  // namespace rareebm
