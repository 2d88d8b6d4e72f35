// Command-line front end over the rareebm C API.
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "rareebm.h"

namespace {

int exit_code(rareebm_status s) {
  switch (s) {
    case RAREEBM_OK:
      return 0;
    case RAREEBM_ERR_CONFIG:
    case RAREEBM_ERR_ARGUMENT:
    case RAREEBM_ERR_IO:
      return 2;
    default:
      return 3;
  }
}

int report(rareebm_status s) {
  if (s != RAREEBM_OK) std::cerr << "rareebm: " << rareebm_last_error() << "\n";
  return exit_code(s);
}

void print_and_free(char* s) {
  if (!s) return;
  std::cout << s << "\n";
  rareebm_string_free(s);
}

struct CommonOptions {
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  unsigned jobs = 1;
  std::optional<std::size_t> runs;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--seed", o.seed, "Base seed; replicate i uses a stream derived from (seed, i)");
  cmd->add_option("--out-dir", o.out_dir, "Directory for results");
  cmd->add_option("--jobs", o.jobs, "Replicates run concurrently")->check(CLI::PositiveNumber);
  cmd->add_option("--runs", o.runs, "Override the number of replicates")->check(CLI::PositiveNumber);
}

rareebm_status load(const std::string& path, const CommonOptions& o, bool traces, rareebm_experiment** e) {
  rareebm_status s = rareebm_experiment_from_file(path.c_str(), e);
  if (s != RAREEBM_OK) return s;
  if (o.seed && (s = rareebm_experiment_set_seed(*e, *o.seed)) != RAREEBM_OK) return s;
  if (!o.out_dir.empty() && (s = rareebm_experiment_set_out_dir(*e, o.out_dir.c_str())) != RAREEBM_OK) return s;
  if ((s = rareebm_experiment_set_jobs(*e, o.jobs)) != RAREEBM_OK) return s;
  if (o.runs && (s = rareebm_experiment_set_runs(*e, *o.runs)) != RAREEBM_OK) return s;
  if (traces && (s = rareebm_experiment_set_traces(*e, 1)) != RAREEBM_OK) return s;
  return RAREEBM_OK;
}

int run_config(const std::string& path, const CommonOptions& o, bool traces) {
  rareebm_experiment* e = nullptr;
  rareebm_status s = load(path, o, traces, &e);
  if (s != RAREEBM_OK) {
    rareebm_experiment_free(e);
    return report(s);
  }
  rareebm_result* r = nullptr;
  s = rareebm_experiment_run(e, &r);
  rareebm_experiment_free(e);
  if (s != RAREEBM_OK) return report(s);
  char* summary = nullptr;
  s = rareebm_result_summary_json(r, &summary);
  if (s == RAREEBM_OK) print_and_free(summary);

  size_t n = 0, failed = 0;
  rareebm_result_run_count(r, &n);
  for (size_t i = 0; i < n; ++i) {
    int ok = 0;
    rareebm_result_run(r, i, nullptr, nullptr, &ok);
    if (!ok) ++failed;
  }
  rareebm_result_free(r);
  if (s != RAREEBM_OK) return report(s);
  if (n > 0 && failed == n) {
    std::cerr << "rareebm: all " << n << " replicates failed\n";
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rare-event probability estimation with learned bias potentials"};
  app.set_version_flag("--version", std::string(rareebm_version()));
  app.require_subcommand(1);

  CommonOptions common;
  std::string config_path;
  std::string table;
  std::string config_dir;
  std::string problem;
  std::string oracle_options;

  auto* run = app.add_subcommand("run", "Run the replicates of one experiment configuration");
  run->add_option("config", config_path, "JSON configuration file")->required();
  add_common(run, common);

  auto* traces = app.add_subcommand("traces", "Run an experiment and write per-iteration traces");
  traces->add_option("config", config_path, "JSON configuration file")->required();
  add_common(traces, common);

  auto* replicate = app.add_subcommand("replicate", "Reproduce a results table");
  replicate->add_option("table", table, "Table name (table1, table2, table3)")->required();
  replicate->add_option("--config-dir", config_dir, "Directory holding <table>/table.json");
  add_common(replicate, common);

  auto* oracle = app.add_subcommand("oracle", "Print reference answers for a problem");
  oracle->add_option("problem", problem, "contamination, four_branch, load_capacity or normal_line")->required();
  oracle->add_option("--options", oracle_options, "JSON object with oracle options");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return run_config(config_path, common, false);
  if (traces->parsed()) return run_config(config_path, common, true);
  if (replicate->parsed()) {
    char* out = nullptr;
    const rareebm_status s = rareebm_replicate_table(
        table.c_str(), config_dir.empty() ? nullptr : config_dir.c_str(),
        common.out_dir.empty() ? nullptr : common.out_dir.c_str(), common.jobs, common.seed.has_value(),
        common.seed.value_or(0), common.runs.has_value(), common.runs.value_or(0), &out);
    if (s != RAREEBM_OK) return report(s);
    print_and_free(out);
    return 0;
  }
  if (oracle->parsed()) {
    char* out = nullptr;
    const rareebm_status s =
        rareebm_oracle_json(problem.c_str(), oracle_options.empty() ? nullptr : oracle_options.c_str(), &out);
    if (s != RAREEBM_OK) return report(s);
    print_and_free(out);
    return 0;
  }
  return 0;
}
