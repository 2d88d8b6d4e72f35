#include "harness/statistics.hpp"

#include <algorithm>
#include <cmath>

#include "densities.hpp"
#include "errors.hpp"

namespace rareebm::harness {

RunStatistics compute_statistics(std::span<const double> estimates, std::span<const std::uint64_t> budgets,
                                 std::optional<double> reference) {
  if (estimates.empty()) throw EstimationError("statistics need at least one estimate");
  RunStatistics s;
  s.n = estimates.size();
  const double n = static_cast<double>(s.n);
  double sum = 0.0;
  for (double x : estimates) sum += x;
  s.mean = sum / n;
  if (s.n >= 2) {
    double ss = 0.0;
    for (double x : estimates) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / (n - 1.0));
    if (s.mean > 0.0) s.cov = *s.sd / s.mean;
  }
  if (reference) {
    double se = 0.0;
    for (double x : estimates) se += (x - *reference) * (x - *reference);
    s.rmse = std::sqrt(se / n);
  }
  const std::vector<double> v(estimates.begin(), estimates.end());
  s.ci_low = sample_quantile(v, 0.025);
  s.ci_high = sample_quantile(v, 0.975);
  if (!budgets.empty()) {
    s.budget_min = *std::min_element(budgets.begin(), budgets.end());
    s.budget_max = *std::max_element(budgets.begin(), budgets.end());
    double b = 0.0;
    for (std::uint64_t x : budgets) b += static_cast<double>(x);
    s.budget_mean = b / static_cast<double>(budgets.size());
  }
  return s;
}

}  // namespace rareebm::harness
