#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include "grid.hpp"
#include "rng.hpp"

namespace rareebm {

struct Gaussian {
  double mean = 0.0;
  double sd = 1.0;
};

// Generalised extreme value with the usual sign convention: shape > 0 has a
// heavy right tail and support [location - scale/shape, inf).
struct Gev {
  double location = 0.0;
  double scale = 1.0;
  double shape = 0.0;
};

class ReferenceDensity {
 public:
  static ReferenceDensity gaussian(double mean, double sd);
  static ReferenceDensity gev(double location, double scale, double shape);

  const std::variant<Gaussian, Gev>& params() const { return params_; }

  bool in_support(double r) const;
  double pdf(double r) const;
  double log_pdf(double r) const;
  // d/dr log pdf; throws DomainError outside the open support.
  double score(double r) const;
  double cdf(double r) const;
  double quantile(double p) const;
  std::vector<double> sample(RngStream& rng, std::size_t n) const;

  std::string describe() const;

 private:
  explicit ReferenceDensity(std::variant<Gaussian, Gev> p) : params_(p) {}
  std::variant<Gaussian, Gev> params_;
};

// Standard normal helpers (upper tail via erfc so that far tails keep precision).
double normal_cdf(double z);
double normal_sf(double z);
double normal_quantile(double p);

// 1.06 * min(sd, IQR/1.34) * n^(-1/5), falling back to sd when the IQR is zero.
double kde_bandwidth_nrd(std::span<const double> samples);
GridFunction kde_gaussian(std::span<const double> samples, const GridDomain& grid);
GridFunction kde_gaussian(std::span<const double> samples, const GridDomain& grid, double bandwidth);

// Type-7 sample quantile (linear interpolation between order statistics).
double sample_quantile(std::vector<double> values, double p);

}  // namespace rareebm
