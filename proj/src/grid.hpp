#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

namespace rareebm {

// Equispaced nodes lo, lo+h, ..., hi.
class GridDomain {
 public:
  GridDomain(double lo, double hi, double spacing);

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  double spacing() const { return spacing_; }
  std::size_t size() const { return size_; }
  double node(std::size_t i) const { return lo_ + static_cast<double>(i) * spacing_; }
  std::vector<double> nodes() const;

  // Index of the node closest to r; r must lie in [lo, hi].
  std::size_t nearest(double r) const;
  bool contains(double r) const;

  bool operator==(const GridDomain& o) const;

 private:
  double lo_;
  double hi_;
  double spacing_;
  std::size_t size_;
};

class GridFunction {
 public:
  GridFunction(GridDomain domain, std::vector<double> values);
  static GridFunction constant(GridDomain domain, double value);

  const GridDomain& domain() const { return domain_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

  // Linear interpolation inside the grid, boundary value outside.
  double interpolate(double r) const;

 private:
  GridDomain domain_;
  std::vector<double> values_;
};

// Trapezoid integral between the nodes nearest to a and b.
double grid_integral(const GridFunction& g, double a, double b);
double grid_integral(const GridFunction& g);
GridFunction grid_normalize(const GridFunction& g);

// Two columns (r, value), 17 significant digits.
void write_csv(std::ostream& os, const GridFunction& g, std::string_view value_name = "value");

}  // namespace rareebm
