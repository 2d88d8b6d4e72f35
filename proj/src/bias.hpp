#pragma once

#include <iosfwd>
#include <span>
#include <variant>
#include <vector>

#include "grid.hpp"

namespace rareebm {

// V(r) = offset + sum_j w_j exp(-(kappa (r - b_j))^2) with fixed, increasing
// centres. Training only moves the weights.
struct RbfBias {
  std::vector<double> weights;
  std::vector<double> centers;
  double kappa = 1.0;
  double offset = 0.0;

  // B equispaced centres on [lo, hi] (a single centre sits at lo), zero weights.
  static RbfBias equispaced(std::size_t count, double lo, double hi, double kappa);
};

// Nodal values of V; linear in between, constant beyond the end nodes.
struct GridBias {
  GridFunction values;
};

using BiasPotential = std::variant<RbfBias, GridBias>;

void validate(const RbfBias& v);

double bias_eval(const RbfBias& v, double r);
double bias_eval(const GridBias& v, double r);
double bias_eval(const BiasPotential& v, double r);

// d V / d w_j at r, i.e. the basis functions themselves.
std::vector<double> bias_weight_gradient(const RbfBias& v, double r);
// Accumulates scale * basis(r) into out without allocating; only touches the
// centres within reach of r.
void accumulate_weight_gradient(const RbfBias& v, double r, double scale, std::span<double> out);

GridBias bias_update_grid(const GridBias& v, const GridFunction& direction, double step);

// V + c; every downstream probability is unchanged by the shift.
BiasPotential bias_shift(const BiasPotential& v, double c);

// Largest |V| parameter: |w_j| for RBF, |V(node)| for the grid form.
double bias_magnitude(const BiasPotential& v);

// Columns r,V on the nodes of the grid.
void write_bias_csv(std::ostream& os, const BiasPotential& v, const GridDomain& grid);

}  // namespace rareebm
