#include "densities.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "errors.hpp"

namespace rareebm {
namespace {

constexpr double kGumbelShapeTol = 1e-8;
const double kLogSqrt2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

bool is_gumbel(const Gev& g) { return std::abs(g.shape) < kGumbelShapeTol; }

// Returns 1 + shape*z, or 1 for the Gumbel limit.
double gev_base(const Gev& g, double z) { return is_gumbel(g) ? 1.0 : 1.0 + g.shape * z; }

}  // namespace

ReferenceDensity ReferenceDensity::gaussian(double mean, double sd) {
  if (!std::isfinite(mean) || !(sd > 0.0) || !std::isfinite(sd))
    throw ConfigError("gaussian reference density needs finite mean and sd > 0");
  return ReferenceDensity(Gaussian{mean, sd});
}

ReferenceDensity ReferenceDensity::gev(double location, double scale, double shape) {
  if (!std::isfinite(location) || !(scale > 0.0) || !std::isfinite(scale) || !std::isfinite(shape))
    throw ConfigError("GEV reference density needs finite location, scale > 0 and finite shape");
  return ReferenceDensity(Gev{location, scale, shape});
}

bool ReferenceDensity::in_support(double r) const {
  return std::visit(Overloaded{[](const Gaussian&) { return true; },
                               [r](const Gev& g) {
                                 if (is_gumbel(g)) return true;
                                 return gev_base(g, (r - g.location) / g.scale) > 0.0;
                               }},
                    params_) &&
         std::isfinite(r);
}

double ReferenceDensity::log_pdf(double r) const {
  return std::visit(
      Overloaded{[r](const Gaussian& g) {
                   const double z = (r - g.mean) / g.sd;
                   return -0.5 * z * z - std::log(g.sd) - kLogSqrt2Pi;
                 },
                 [r](const Gev& g) {
                   const double z = (r - g.location) / g.scale;
                   if (is_gumbel(g)) return -std::log(g.scale) - z - std::exp(-z);
                   const double base = 1.0 + g.shape * z;
                   if (!(base > 0.0)) return -std::numeric_limits<double>::infinity();
                   const double log_t = -std::log(base) / g.shape;
                   return -std::log(g.scale) + (g.shape + 1.0) * log_t - std::exp(log_t);
                 }},
      params_);
}

double ReferenceDensity::pdf(double r) const { return std::exp(log_pdf(r)); }

double ReferenceDensity::score(double r) const {
  if (!in_support(r)) throw DomainError("score evaluated outside the reference support");
  return std::visit(Overloaded{[r](const Gaussian& g) { return -(r - g.mean) / (g.sd * g.sd); },
                               [r](const Gev& g) {
                                 const double z = (r - g.location) / g.scale;
                                 if (is_gumbel(g)) return (std::exp(-z) - 1.0) / g.scale;
                                 const double base = 1.0 + g.shape * z;
                                 const double t = std::pow(base, -1.0 / g.shape);
                                 return (t - g.shape - 1.0) / (base * g.scale);
                               }},
                    params_);
}

double ReferenceDensity::cdf(double r) const {
  return std::visit(Overloaded{[r](const Gaussian& g) { return normal_cdf((r - g.mean) / g.sd); },
                               [r](const Gev& g) {
                                 const double z = (r - g.location) / g.scale;
                                 if (is_gumbel(g)) return std::exp(-std::exp(-z));
                                 const double base = 1.0 + g.shape * z;
                                 if (!(base > 0.0)) return g.shape > 0.0 ? 0.0 : 1.0;
                                 return std::exp(-std::pow(base, -1.0 / g.shape));
                               }},
                    params_);
}

double ReferenceDensity::quantile(double p) const {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("quantile: p must lie in (0, 1)");
  return std::visit(Overloaded{[p](const Gaussian& g) { return g.mean + g.sd * normal_quantile(p); },
                               [p](const Gev& g) {
                                 const double y = -std::log(p);
                                 if (is_gumbel(g)) return g.location - g.scale * std::log(y);
                                 return g.location + g.scale * std::expm1(-g.shape * std::log(y)) / g.shape;
                               }},
                    params_);
}

std::vector<double> ReferenceDensity::sample(RngStream& rng, std::size_t n) const {
  std::vector<double> out(n);
  if (const auto* g = std::get_if<Gaussian>(&params_)) {
    for (double& x : out) x = g->mean + g->sd * rng.normal();
  } else {
    for (double& x : out) x = quantile(rng.uniform());
  }
  return out;
}

std::string ReferenceDensity::describe() const {
  std::ostringstream os;
  std::visit(Overloaded{[&os](const Gaussian& g) { os << "N(" << g.mean << "," << g.sd << "^2)"; },
                        [&os](const Gev& g) {
                          os << "GEV(" << g.location << "," << g.scale << "," << g.shape << ")";
                        }},
             params_);
  return os.str();
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
double normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("normal_quantile: p must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double sample_quantile(std::vector<double> values, double p) {
  if (values.empty()) throw EstimationError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double kde_bandwidth_nrd(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 2) throw EstimationError("kde: need at least two samples");
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double x : samples) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  std::vector<double> v(samples.begin(), samples.end());
  const double iqr = sample_quantile(v, 0.75) - sample_quantile(v, 0.25);
  const double factor = 1.06 * std::pow(static_cast<double>(n), -0.2);
  // Spread below sqrt(machine epsilon) of the data scale counts as no spread.
  const double tiny = 1e-8 * std::max(std::abs(mean), 1.0);
  if (!(sd > tiny)) throw EstimationError("kde: samples have zero spread");
  double bw = factor * std::min(sd, iqr / 1.34);
  if (!(bw > 0.0)) bw = factor * sd;
  return bw;
}

GridFunction kde_gaussian(std::span<const double> samples, const GridDomain& grid) {
  return kde_gaussian(samples, grid, kde_bandwidth_nrd(samples));
}

GridFunction kde_gaussian(std::span<const double> samples, const GridDomain& grid, double bandwidth) {
  if (samples.size() < 1) throw EstimationError("kde: no samples");
  if (!(bandwidth > 0.0)) throw EstimationError("kde: bandwidth must be positive");
  std::vector<double> out(grid.size(), 0.0);
  const double h = grid.spacing();
  const double d = h / bandwidth;
  const double step_decay = std::exp(-d * d);
  const auto n_nodes = static_cast<std::ptrdiff_t>(grid.size());
  // Walk outward from the nearest node: exp(-(z+d)^2/2) = exp(-z^2/2) * exp(-zd - d^2/2).
  for (double x : samples) {
    const auto c = static_cast<std::ptrdiff_t>(std::llround((x - grid.lo()) / h));
    const double zc = (grid.lo() + static_cast<double>(c) * h - x) / bandwidth;
    const double gc = std::exp(-0.5 * zc * zc);
    double g = gc, q = std::exp(-zc * d - 0.5 * d * d);
    for (std::ptrdiff_t i = c; i < n_nodes && g > 0.0; ++i) {
      if (i >= 0) out[static_cast<std::size_t>(i)] += g;
      g *= q;
      q *= step_decay;
    }
    g = gc * std::exp(zc * d - 0.5 * d * d);
    q = std::exp(zc * d - 1.5 * d * d);
    for (std::ptrdiff_t i = c - 1; i >= 0 && g > 0.0; --i) {
      if (i < n_nodes) out[static_cast<std::size_t>(i)] += g;
      g *= q;
      q *= step_decay;
    }
  }
  const double norm = 1.0 / (static_cast<double>(samples.size()) * bandwidth) / std::sqrt(2.0 * std::numbers::pi);
  for (double& v : out) v *= norm;
  return GridFunction(grid, std::move(out));
}

}  // namespace rareebm
