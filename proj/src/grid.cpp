#include "grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "errors.hpp"

namespace rareebm {

GridDomain::GridDomain(double lo, double hi, double spacing)
    : lo_(lo), hi_(hi), spacing_(spacing), size_(0) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(hi > lo))
    throw ConfigError("grid: need finite lo < hi");
  if (!(spacing > 0.0)) throw ConfigError("grid: spacing must be positive");
  const double steps = (hi - lo) / spacing;
  const double rounded = std::round(steps);
  if (std::abs(steps - rounded) > 1e-6 * std::max(1.0, rounded))
    throw ConfigError("grid: (hi - lo) is not a multiple of the spacing");
  size_ = static_cast<std::size_t>(rounded) + 1;
}

std::vector<double> GridDomain::nodes() const {
  std::vector<double> out(size_);
  for (std::size_t i = 0; i < size_; ++i) out[i] = node(i);
  return out;
}

bool GridDomain::contains(double r) const {
  const double tol = 1e-9 * spacing_;
  return r >= lo_ - tol && r <= hi_ + tol;
}

std::size_t GridDomain::nearest(double r) const {
  if (!contains(r)) throw DomainError("grid: point " + std::to_string(r) + " outside grid");
  const double x = std::round((r - lo_) / spacing_);
  return std::min(size_ - 1, static_cast<std::size_t>(std::max(0.0, x)));
}

bool GridDomain::operator==(const GridDomain& o) const {
  return size_ == o.size_ && std::abs(lo_ - o.lo_) <= 1e-12 * spacing_ &&
         std::abs(spacing_ - o.spacing_) <= 1e-12 * spacing_;
}

GridFunction::GridFunction(GridDomain domain, std::vector<double> values)
    : domain_(domain), values_(std::move(values)) {
  if (values_.size() != domain_.size()) throw ConfigError("grid function: length does not match domain");
  for (double v : values_)
    if (!std::isfinite(v)) throw NumericError("grid function: non-finite value");
}

GridFunction GridFunction::constant(GridDomain domain, double value) {
  return GridFunction(domain, std::vector<double>(domain.size(), value));
}

double GridFunction::interpolate(double r) const {
  if (r <= domain_.lo()) return values_.front();
  if (r >= domain_.hi()) return values_.back();
  const double x = (r - domain_.lo()) / domain_.spacing();
  auto i = static_cast<std::size_t>(x);
  if (i >= values_.size() - 1) return values_.back();
  const double t = x - static_cast<double>(i);
  return values_[i] + t * (values_[i + 1] - values_[i]);
}

double grid_integral(const GridFunction& g, double a, double b) {
  if (a > b) throw DomainError("grid_integral: a > b");
  const std::size_t ia = g.domain().nearest(a);
  const std::size_t ib = g.domain().nearest(b);
  if (ia == ib) return 0.0;
  const auto v = g.values();
  double sum = 0.5 * (v[ia] + v[ib]);
  for (std::size_t i = ia + 1; i < ib; ++i) sum += v[i];
  return sum * g.domain().spacing();
}

double grid_integral(const GridFunction& g) {
  return grid_integral(g, g.domain().lo(), g.domain().hi());
}

GridFunction grid_normalize(const GridFunction& g) {
  const double total = grid_integral(g);
  if (!(total > 0.0) || !std::isfinite(total))
    throw NumericError("grid_normalize: total integral is not positive");
  std::vector<double> out(g.values().begin(), g.values().end());
  for (double& v : out) v /= total;
  return GridFunction(g.domain(), std::move(out));
}

void write_csv(std::ostream& os, const GridFunction& g, std::string_view value_name) {
  os << "r," << value_name << '\n';
  char buf[64];
  for (std::size_t i = 0; i < g.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", g.domain().node(i), g[i]);
    os << buf;
  }
}

}  // namespace rareebm
