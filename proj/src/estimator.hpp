#pragma once

#include <iosfwd>
#include <vector>

#include "bias.hpp"
#include "densities.hpp"
#include "grid.hpp"

namespace rareebm {

// F = -log p_ref - V on nodes where p_ref > 1e-300, and the implied density
// p_R = exp(-F) normalised over the grid. Masked nodes carry F = 0 and p_R = 0.
struct FreeEnergyEstimate {
  GridFunction free_energy;
  std::vector<bool> support;
  GridFunction density;
};

FreeEnergyEstimate free_energy_from_bias(const BiasPotential& v, const ReferenceDensity& p_ref, const GridDomain& grid);

struct TailProbability {
  double value = 0.0;
  // p_R at one of the last five nodes exceeds 1e-16 max(p_R): mass may be cut off.
  bool truncation_warning = false;
};

// Trapezoid integral of p_R over [T, hi]; the cell containing T is integrated
// from T exactly using the linear interpolant.
TailProbability tail_probability(const FreeEnergyEstimate& est, double threshold);

// Columns r,F,p_R; F is left blank on masked nodes.
void write_free_energy_csv(std::ostream& os, const FreeEnergyEstimate& est);

}  // namespace rareebm
