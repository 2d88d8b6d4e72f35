#include "bias.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "errors.hpp"

namespace rareebm {
namespace {

// exp(-x) underflows to exactly zero beyond this.
constexpr double kExpCutoff = 745.2;

template <class F>
void for_each_active(const RbfBias& v, double r, F&& f) {
  const double reach = std::sqrt(kExpCutoff) / v.kappa;
  auto first = std::lower_bound(v.centers.begin(), v.centers.end(), r - reach);
  auto last = std::upper_bound(first, v.centers.end(), r + reach);
  for (auto it = first; it != last; ++it) {
    const double z = v.kappa * (r - *it);
    f(static_cast<std::size_t>(it - v.centers.begin()), std::exp(-z * z));
  }
}

}  // namespace

RbfBias RbfBias::equispaced(std::size_t count, double lo, double hi, double kappa) {
  if (count == 0) throw ConfigError("RBF bias needs at least one centre");
  if (!(hi > lo) && count > 1) throw ConfigError("RBF centre range must satisfy lo < hi");
  RbfBias v;
  v.kappa = kappa;
  v.weights.assign(count, 0.0);
  v.centers.resize(count);
  for (std::size_t j = 0; j < count; ++j)
    v.centers[j] = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(count - 1);
  validate(v);
  return v;
}

void validate(const RbfBias& v) {
  if (v.centers.empty()) throw ConfigError("RBF bias needs at least one centre");
  if (v.weights.size() != v.centers.size()) throw ConfigError("RBF weights and centres differ in length");
  if (!(v.kappa > 0.0) || !std::isfinite(v.kappa)) throw ConfigError("RBF shape must be positive");
  for (std::size_t j = 1; j < v.centers.size(); ++j)
    if (!(v.centers[j] > v.centers[j - 1])) throw ConfigError("RBF centres must be strictly increasing");
}

double bias_eval(const RbfBias& v, double r) {
  double s = v.offset;
  for_each_active(v, r, [&](std::size_t j, double phi) { s += v.weights[j] * phi; });
  return s;
}

double bias_eval(const GridBias& v, double r) { return v.values.interpolate(r); }

double bias_eval(const BiasPotential& v, double r) {
  return std::visit([r](const auto& b) { return bias_eval(b, r); }, v);
}

std::vector<double> bias_weight_gradient(const RbfBias& v, double r) {
  std::vector<double> g(v.centers.size(), 0.0);
  accumulate_weight_gradient(v, r, 1.0, g);
  return g;
}

void accumulate_weight_gradient(const RbfBias& v, double r, double scale, std::span<double> out) {
  for_each_active(v, r, [&](std::size_t j, double phi) { out[j] += scale * phi; });
}

GridBias bias_update_grid(const GridBias& v, const GridFunction& direction, double step) {
  if (!(v.values.domain() == direction.domain())) throw ConfigError("bias update: grid mismatch");
  std::vector<double> out(v.values.values().begin(), v.values.values().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= step * direction[i];
  return GridBias{GridFunction(v.values.domain(), std::move(out))};
}

BiasPotential bias_shift(const BiasPotential& v, double c) {
  if (const auto* g = std::get_if<GridBias>(&v)) {
    std::vector<double> out(g->values.values().begin(), g->values.values().end());
    for (double& x : out) x += c;
    return GridBias{GridFunction(g->values.domain(), std::move(out))};
  }
  RbfBias r = std::get<RbfBias>(v);
  r.offset += c;
  return r;
}

double bias_magnitude(const BiasPotential& v) {
  double m = 0.0;
  if (const auto* r = std::get_if<RbfBias>(&v)) {
    for (double w : r->weights) m = std::max(m, std::abs(w));
  } else {
    for (double x : std::get<GridBias>(v).values.values()) m = std::max(m, std::abs(x));
  }
  return m;
}

void write_bias_csv(std::ostream& os, const BiasPotential& v, const GridDomain& grid) {
  os << "r,V\n";
  char buf[64];
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double r = grid.node(i);
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", r, bias_eval(v, r));
    os << buf;
  }
}

}  // namespace rareebm
