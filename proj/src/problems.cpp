#include "problems.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <set>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "densities.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace rareebm {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double sum_squares(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

}  // namespace

RareEventQuery::RareEventQuery(double t) : threshold(t) {
  if (!std::isfinite(t)) throw ConfigError("query threshold must be finite");
}

// ---------------------------------------------------------------------------

ContaminationCase contamination_problem(const ContaminationSpec& spec) {
  const int m = spec.n_cells;
  if (m < 1) throw ConfigError("contamination: n_cells must be positive");
  if (!(spec.prior_sd > 0.0)) throw ConfigError("contamination: prior_sd must be positive");
  if (!(spec.noise_sd > 0.0)) throw ConfigError("contamination: noise_sd must be positive");
  std::set<int> seen;
  for (int c : spec.measured_cells) {
    if (c < 0 || c >= m) throw ConfigError("contamination: measured cell index out of range");
    if (!seen.insert(c).second) throw ConfigError("contamination: measured cells must be distinct");
  }

  ContaminationCase out;
  out.spec = spec;
  const auto k = spec.measured_cells.size();
  const RngStream root(spec.seed);

  if (spec.truth) {
    if (spec.truth->size() != static_cast<std::size_t>(m)) throw ConfigError("contamination: truth has wrong length");
    out.truth = *spec.truth;
  } else {
    RngStream rng = root.split("truth");
    out.truth.resize(m);
    for (double& t : out.truth) t = spec.prior_mean + spec.prior_sd * rng.normal();
  }
  if (spec.data) {
    if (spec.data->size() != k) throw ConfigError("contamination: data length must match measured_cells");
    out.data = *spec.data;
  } else {
    RngStream rng = root.split("noise");
    out.data.resize(k);
    for (std::size_t j = 0; j < k; ++j) out.data[j] = out.truth[spec.measured_cells[j]] + spec.noise_sd * rng.normal();
  }

  // Conjugate linear-Gaussian update with a selection observation operator.
  const double prior_prec = 1.0 / (spec.prior_sd * spec.prior_sd);
  const double noise_prec = 1.0 / (spec.noise_sd * spec.noise_sd);
  Eigen::MatrixXd precision = prior_prec * Eigen::MatrixXd::Identity(m, m);
  Eigen::VectorXd rhs = Eigen::VectorXd::Constant(m, prior_prec * spec.prior_mean);
  for (std::size_t j = 0; j < k; ++j) {
    const int c = spec.measured_cells[j];
    precision(c, c) += noise_prec;
    rhs(c) += noise_prec * out.data[j];
  }
  out.posterior.cov = precision.ldlt().solve(Eigen::MatrixXd::Identity(m, m));
  out.posterior.mean = out.posterior.cov * rhs;

  TargetProblem& p = out.problem;
  p.name = "contamination";
  p.dim = static_cast<std::size_t>(m);
  const double mu = spec.prior_mean, sd = spec.prior_sd;
  p.log_prior = [mu, sd](std::span<const double> th) {
    double s = 0.0;
    for (double v : th) s += (v - mu) * (v - mu);
    return -0.5 * s / (sd * sd);
  };
  if (k > 0) {
    p.log_likelihood = [cells = spec.measured_cells, data = out.data, nsd = spec.noise_sd](std::span<const double> th) {
      double s = 0.0;
      for (std::size_t j = 0; j < cells.size(); ++j) {
        const double r = (data[j] - th[cells[j]]) / nsd;
        s += r * r;
      }
      return -0.5 * s;
    };
  }
  p.qoi = sum_squares;
  p.standard_normal = StandardNormalMap{
      [mu, sd](std::span<const double> u, std::span<double> th) {
        for (std::size_t i = 0; i < u.size(); ++i) th[i] = mu + sd * u[i];
      },
      [mu, sd](std::span<const double> th, std::span<double> u) {
        for (std::size_t i = 0; i < th.size(); ++i) u[i] = (th[i] - mu) / sd;
      }};
  p.initial_point.assign(m, mu);
  for (std::size_t j = 0; j < k; ++j) p.initial_point[spec.measured_cells[j]] = out.data[j];
  return out;
}

void write_contamination_csv(std::ostream& os, const ContaminationCase& c) {
  os << "cell,truth,measurement\n";
  char buf[64];
  for (std::size_t i = 0; i < c.truth.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,", i, c.truth[i]);
    os << buf;
    const auto& cells = c.spec.measured_cells;
    const auto it = std::find(cells.begin(), cells.end(), static_cast<int>(i));
    if (it != cells.end()) {
      std::snprintf(buf, sizeof buf, "%.17g", c.data[static_cast<std::size_t>(it - cells.begin())]);
      os << buf;
    }
    os << '\n';
  }
}

// ---------------------------------------------------------------------------

double four_branch(double a, double b) {
  const double d = a - b;
  const double s = (a + b) / std::numbers::sqrt2;
  const double c = 6.0 / std::numbers::sqrt2;
  return std::min({3.0 + 0.1 * d * d - s, 3.0 + 0.1 * d * d + s, d + c, -d + c});
}

TargetProblem four_branch_problem() {
  TargetProblem p;
  p.name = "four_branch";
  p.dim = 2;
  p.log_prior = [](std::span<const double> th) { return -0.5 * sum_squares(th); };
  p.qoi = [](std::span<const double> th) { return -four_branch(th[0], th[1]); };
  p.standard_normal = StandardNormalMap{
      [](std::span<const double> u, std::span<double> th) { std::copy(u.begin(), u.end(), th.begin()); },
      [](std::span<const double> th, std::span<double> u) { std::copy(th.begin(), th.end(), u.begin()); }};
  p.initial_point = {0.0, 0.0};
  return p;
}

std::vector<TailMonteCarlo> four_branch_tail_mc(std::span<const double> thresholds, std::uint64_t samples,
                                                std::uint64_t seed) {
  if (samples < 2) throw ConfigError("Monte Carlo needs at least two samples");
  RngStream rng(seed);
  std::vector<std::uint64_t> hits(thresholds.size(), 0);
  for (std::uint64_t i = 0; i < samples; ++i) {
    const double a = rng.normal();
    const double b = rng.normal();
    const double q = -four_branch(a, b);
    for (std::size_t k = 0; k < thresholds.size(); ++k) hits[k] += q >= thresholds[k];
  }
  std::vector<TailMonteCarlo> out;
  const double n = static_cast<double>(samples);
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    const double p = static_cast<double>(hits[k]) / n;
    out.push_back({thresholds[k], p, std::sqrt(p * (1.0 - p) / n)});
  }
  return out;
}

TargetProblem standard_normal_line_problem() {
  TargetProblem p;
  p.name = "standard_normal_line";
  p.dim = 1;
  p.log_prior = [](std::span<const double> th) { return -0.5 * th[0] * th[0]; };
  p.qoi = [](std::span<const double> th) { return th[0]; };
  p.standard_normal = StandardNormalMap{
      [](std::span<const double> u, std::span<double> th) { th[0] = u[0]; },
      [](std::span<const double> th, std::span<double> u) { u[0] = th[0]; }};
  p.initial_point = {0.0};
  return p;
}

// ---------------------------------------------------------------------------

namespace {

// Upper tail of the Gumbel law, accurate far into the tail.
double gumbel_sf(double x, double loc, double scale) { return -std::expm1(-std::exp(-(x - loc) / scale)); }

}  // namespace

double LoadCapacityCase::failure_probability(double threshold) const {
  const double n = spec.n_components;
  const double mean = n * posterior_component_log_mean;
  const double sd = std::sqrt(n * posterior_component_log_var);
  const double loc = params.gumbel_location, scale = params.gumbel_scale;
  auto integrand = [&](double x) {
    const double z = (x - mean) / sd;
    const double density = std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi));
    return density * gumbel_sf(std::exp(x) + threshold, loc, scale);
  };
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, mean - 12.0 * sd, mean + 12.0 * sd,
                                                                       20, 1e-13, &err);
}

LoadCapacityCase load_capacity_problem(const LoadCapacitySpec& spec) {
  if (spec.n_components < 1) throw ConfigError("load_capacity: n_components must be at least 1");
  if (!(spec.load_sd > 0.0) || !(spec.capacity_sd > 0.0) || !(spec.capacity_mean > 0.0) || !(spec.sigma_y > 0.0) ||
      !(spec.measured_total > 0.0))
    throw ConfigError("load_capacity: scales and means must be positive");

  LoadCapacityCase out;
  out.spec = spec;
  const double n = spec.n_components;
  LoadCapacityParams& prm = out.params;
  constexpr double euler_gamma = std::numbers::egamma;
  prm.gumbel_scale = spec.load_sd * std::sqrt(6.0) / std::numbers::pi;
  prm.gumbel_location = spec.load_mean - euler_gamma * prm.gumbel_scale;
  const double cv = spec.capacity_sd / spec.capacity_mean;
  prm.total_log_var = std::log1p(cv * cv);
  prm.total_log_mean = std::log(spec.capacity_mean) - 0.5 * prm.total_log_var;
  prm.component_log_mean = prm.total_log_mean / n;
  prm.component_log_sd = std::sqrt(prm.total_log_var / n);
  prm.measurement = std::pow(spec.measured_total, 1.0 / n);

  const double prior_var = prm.component_log_sd * prm.component_log_sd;
  const double noise_var = spec.sigma_y * spec.sigma_y;
  out.posterior_component_log_var = 1.0 / (1.0 / prior_var + 1.0 / noise_var);
  out.posterior_component_log_mean =
      out.posterior_component_log_var * (prm.component_log_mean / prior_var + std::log(prm.measurement) / noise_var);

  TargetProblem& p = out.problem;
  p.name = "load_capacity";
  p.dim = static_cast<std::size_t>(spec.n_components) + 1;
  const double loc = prm.gumbel_location, scale = prm.gumbel_scale;
  const double cmu = prm.component_log_mean, csd = prm.component_log_sd;
  p.log_prior = [loc, scale, cmu, csd](std::span<const double> th) {
    const double z = (th[0] - loc) / scale;
    double lp = -z - std::exp(-z) - std::log(scale);
    for (std::size_t i = 1; i < th.size(); ++i) {
      if (!(th[i] > 0.0)) return kNegInf;
      const double lx = std::log(th[i]);
      const double w = (lx - cmu) / csd;
      lp += -0.5 * w * w - lx;
    }
    return lp;
  };
  const double log_y = std::log(prm.measurement);
  const double sy = spec.sigma_y;
  p.log_likelihood = [log_y, sy](std::span<const double> th) {
    double s = 0.0;
    for (std::size_t i = 1; i < th.size(); ++i) {
      if (!(th[i] > 0.0)) return kNegInf;
      const double r = (log_y - std::log(th[i])) / sy;
      s += r * r;
    }
    return -0.5 * s;
  };
  p.qoi = [](std::span<const double> th) {
    // Product in log space keeps n_C = 100 away from overflow.
    double log_c = 0.0;
    for (std::size_t i = 1; i < th.size(); ++i) log_c += std::log(th[i]);
    return th[0] - std::exp(log_c);
  };
  p.standard_normal = StandardNormalMap{
      [loc, scale, cmu, csd](std::span<const double> u, std::span<double> th) {
        // Gumbel quantile of Phi(u0), written via the upper tail so u0 >> 0 keeps precision.
        const double minus_log_cdf = u[0] > 0.0 ? -std::log1p(-normal_sf(u[0])) : -std::log(normal_cdf(u[0]));
        th[0] = loc - scale * std::log(minus_log_cdf);
        for (std::size_t i = 1; i < u.size(); ++i) th[i] = std::exp(cmu + csd * u[i]);
      },
      [loc, scale, cmu, csd](std::span<const double> th, std::span<double> u) {
        const double e = std::exp(-(th[0] - loc) / scale);
        const double cdf = std::exp(-e);
        u[0] = cdf > 0.5 ? -normal_quantile(-std::expm1(-e)) : normal_quantile(cdf);
        for (std::size_t i = 1; i < th.size(); ++i) u[i] = (std::log(th[i]) - cmu) / csd;
      }};
  p.initial_point.assign(p.dim, std::exp(out.posterior_component_log_mean));
  p.initial_point[0] = loc - scale * std::log(std::log(2.0));
  return out;
}

}  // namespace rareebm
