#include "estimator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "errors.hpp"

namespace rareebm {
namespace {

const double kLogSupportFloor = std::log(1e-300);

// Integral of the piecewise-linear interpolant of g over [t, hi].
double upper_integral(const GridFunction& g, double t) {
  const GridDomain& dom = g.domain();
  const double h = dom.spacing();
  const std::size_t n = g.size();
  double pos = (t - dom.lo()) / h;
  pos = std::clamp(pos, 0.0, static_cast<double>(n - 1));
  std::size_t k = static_cast<std::size_t>(std::floor(pos));
  if (k >= n - 1) return 0.0;
  const double frac = pos - static_cast<double>(k);
  const double gt = (1.0 - frac) * g[k] + frac * g[k + 1];
  double s = 0.5 * (gt + g[k + 1]) * (1.0 - frac) * h;
  for (std::size_t i = k + 1; i + 1 < n; ++i) s += 0.5 * (g[i] + g[i + 1]) * h;
  return s;
}

}  // namespace

FreeEnergyEstimate free_energy_from_bias(const BiasPotential& v, const ReferenceDensity& p_ref, const GridDomain& grid) {
  const std::size_t n = grid.size();
  std::vector<double> f(n, 0.0), neg_f(n, -std::numeric_limits<double>::infinity());
  std::vector<bool> mask(n, false);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double r = grid.node(i);
    const double lp = p_ref.log_pdf(r);
    if (!(lp > kLogSupportFloor)) continue;
    const double vi = bias_eval(v, r);
    if (!std::isfinite(vi)) throw NumericError("free energy: bias potential is not finite");
    mask[i] = true;
    f[i] = -lp - vi;
    neg_f[i] = -f[i];
    top = std::max(top, neg_f[i]);
  }
  if (!std::isfinite(top)) throw EstimationError("free energy: reference density vanishes on the whole grid");
  std::vector<double> p(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    if (mask[i]) p[i] = std::exp(neg_f[i] - top);
  GridFunction dens = grid_normalize(GridFunction(grid, std::move(p)));
  return {GridFunction(grid, std::move(f)), std::move(mask), std::move(dens)};
}

TailProbability tail_probability(const FreeEnergyEstimate& est, double threshold) {
  const GridFunction& p = est.density;
  const GridDomain& dom = p.domain();
  if (!std::isfinite(threshold) || threshold < dom.lo() || threshold > dom.hi())
    throw DomainError("tail probability: threshold outside the grid");
  TailProbability out;
  const double total = upper_integral(p, dom.lo());
  out.value = std::clamp(upper_integral(p, threshold) / total, 0.0, 1.0);
  double peak = 0.0;
  for (double x : p.values()) peak = std::max(peak, x);
  const std::size_t n = p.size();
  for (std::size_t i = n - std::min<std::size_t>(5, n); i < n; ++i)
    if (p[i] >= 1e-16 * peak) out.truncation_warning = true;
  return out;
}

void write_free_energy_csv(std::ostream& os, const FreeEnergyEstimate& est) {
  os << "r,F,p_R\n";
  char buf[96];
  const GridDomain& dom = est.density.domain();
  for (std::size_t i = 0; i < dom.size(); ++i) {
    if (est.support[i])
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", dom.node(i), est.free_energy[i], est.density[i]);
    else
      std::snprintf(buf, sizeof buf, "%.17g,,%.17g\n", dom.node(i), est.density[i]);
    os << buf;
  }
}

}  // namespace rareebm
