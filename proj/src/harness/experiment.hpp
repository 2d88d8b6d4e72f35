#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ebm_train.hpp"
#include "harness/config.hpp"
#include "harness/statistics.hpp"
#include "problems.hpp"

namespace rareebm::harness {

struct ProblemInstance {
  TargetProblem problem;
  std::optional<ContaminationCase> contamination;
  std::optional<LoadCapacityCase> load_capacity;

  // Closed-form (or quadrature) answer for P(qoi >= t), when one exists.
  std::optional<double> oracle(double threshold) const;
};

ProblemInstance build_problem(const ProblemConfig& cfg);

struct RunOutcome {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double p_hat = 0.0;
  std::vector<double> extra_p_hat;  // one per also_report threshold
  std::uint64_t budget = 0;
  std::size_t steps = 0;            // SGDM updates or subset levels
  std::string stop_reason;
  std::vector<TrainRecord> trace;
};

struct ExperimentResult {
  std::vector<RunOutcome> runs;
  std::optional<RunStatistics> stats;  // empty when every replicate failed
  std::vector<std::optional<RunStatistics>> extra_stats;
  std::optional<double> reference;
  std::vector<std::optional<double>> extra_reference;
  Json summary;
};

// One replicate with its own random stream derived from `seed`.
RunOutcome run_replicate(const ExperimentConfig& cfg, const ProblemInstance& inst, std::size_t run, std::uint64_t seed);

// Runs cfg.n_runs replicates with seeds base_seed + i on up to cfg.jobs
// threads and aggregates them. When cfg.out_dir is set, writes runs.csv,
// summary.json and (with cfg.traces) traces/run_NNNN.csv there.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Number of fixed-schedule thresholds that makes a subset run cost `budget`
// forward evaluations.
std::size_t match_subset_thresholds(const ExperimentConfig& cfg, const ProblemInstance& inst, double budget);
std::uint64_t planned_subset_budget(const ExperimentConfig& cfg, const ProblemInstance& inst);

struct TableOptions {
  std::string config_dir;  // holds <table>/table.json; empty uses the built-in default
  std::string out_dir;     // results go to <out_dir>/<table>/
  unsigned jobs = 1;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> runs;
};

// Runs every row listed in <config_dir>/<name>/table.json and returns the
// side-by-side summary (also written to table_summary.json/.csv).
Json replicate_table(const std::string& name, const TableOptions& opts);

std::string default_config_dir();

// Reference answers for a named problem ("contamination", "four_branch",
// "load_capacity", "normal_line"); options tune sample sizes and thresholds.
Json oracle_report(const std::string& problem, const Json& options);

Json statistics_json(const RunStatistics& s);

}  // namespace rareebm::harness
