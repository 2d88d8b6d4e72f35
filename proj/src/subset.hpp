#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "mcmc.hpp"
#include "problems.hpp"
#include "rng.hpp"

namespace rareebm {

struct SubsetConfig {
  enum class Schedule { Adaptive, FixedLog };
  std::size_t samples_per_level = 1000;  // N_s
  std::size_t mh_steps_per_seed = 5;
  Schedule schedule = Schedule::Adaptive;
  double p0 = 0.1;                 // Adaptive
  std::size_t max_levels = 50;     // Adaptive
  double start = 5.0;              // FixedLog: first threshold
  std::size_t n_thresholds = 10;   // FixedLog: nr_t
  std::optional<double> schedule_end;  // FixedLog: last threshold, defaults to the query
  // Posterior initialisation (ignored when the problem has no likelihood).
  std::size_t init_burn_in = 100;
  std::size_t init_thin = 500;
  // Random-walk step sizes for level propagation; empty means a pilot tuning
  // run of tune.pilot_steps on the unconstrained target (counted in the budget).
  std::vector<double> steps;
  TuneConfig tune;

  void validate() const;
};

// T_k = start + (end - start) log(1 + k (e - 1) / nr_t), k = 0..nr_t.
std::vector<double> fixed_log_schedule(double start, double end, std::size_t nr_t);

struct SubsetLevel {
  double threshold = 0.0;
  double fraction = 0.0;  // share of the level's samples at or above threshold
  double acceptance = 0.0;  // of the moves that produced this level (0 for level 0)
};

struct SubsetResult {
  double p_hat = 0.0;
  std::vector<SubsetLevel> levels;
  Budget budget;
  bool level_failure = false;
  // Estimates for additional thresholds read off the same run.
  std::vector<double> extra_p_hat;
};

// Estimates P(qoi >= T) and, for each entry of also_report, P(qoi >= t).
// Levels run up to the largest of these thresholds; each estimate is the
// product of the level fractions below t times the fraction of the deepest
// population (conditioned below t) that reaches t.
SubsetResult subset_estimate(const TargetProblem& problem, const RareEventQuery& query, const SubsetConfig& cfg,
                             RngStream& rng, const std::vector<double>& also_report = {});

// Threshold sequence of a fixed schedule ending at final_threshold (empty for
// the adaptive schedule).
std::vector<double> subset_thresholds(const SubsetConfig& cfg, double final_threshold);

// Forward evaluations spent before the first conditional level.
std::uint64_t subset_initial_cost(const TargetProblem& problem, const SubsetConfig& cfg);

// Columns level,threshold,fraction,acceptance.
void write_levels_csv(std::ostream& os, const SubsetResult& r);

}  // namespace rareebm
