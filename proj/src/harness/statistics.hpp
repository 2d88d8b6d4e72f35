#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace rareebm::harness {

struct RunStatistics {
  std::size_t n = 0;
  double mean = 0.0;
  std::optional<double> sd;    // n >= 2
  std::optional<double> rmse;  // only with a reference value
  std::optional<double> cov;   // sd / mean; n >= 2 and mean > 0
  double ci_low = 0.0;         // 2.5 % empirical percentile
  double ci_high = 0.0;        // 97.5 % empirical percentile
  std::uint64_t budget_min = 0;
  std::uint64_t budget_max = 0;
  double budget_mean = 0.0;
};

RunStatistics compute_statistics(std::span<const double> estimates, std::span<const std::uint64_t> budgets,
                                 std::optional<double> reference = std::nullopt);

}  // namespace rareebm::harness
