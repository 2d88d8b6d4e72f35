#include "rareebm.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <new>
#include <sstream>
#include <string>

#include "densities.hpp"
#include "errors.hpp"
#include "harness/config.hpp"
#include "harness/experiment.hpp"
#include "harness/json_out.hpp"
#include "problems.hpp"

struct rareebm_experiment {
  rareebm::harness::ExperimentConfig cfg;
};

struct rareebm_result {
  rareebm::harness::ExperimentResult result;
};

struct rareebm_density {
  rareebm::ReferenceDensity d;
};

namespace {

thread_local std::string last_error;

rareebm_status fail(rareebm_status s, const std::string& msg) {
  last_error = msg;
  return s;
}

template <class F>
rareebm_status guarded(F&& f) {
  try {
    last_error.clear();
    return f();
  } catch (const rareebm::ConfigError& e) {
    return fail(RAREEBM_ERR_CONFIG, e.what());
  } catch (const rareebm::harness::Json::exception& e) {
    return fail(RAREEBM_ERR_CONFIG, e.what());
  } catch (const rareebm::NumericError& e) {
    return fail(RAREEBM_ERR_NUMERIC, e.what());
  } catch (const rareebm::EstimationError& e) {
    return fail(RAREEBM_ERR_NUMERIC, e.what());
  } catch (const rareebm::DomainError& e) {
    return fail(RAREEBM_ERR_NUMERIC, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(RAREEBM_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(RAREEBM_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(RAREEBM_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(RAREEBM_ERR_INTERNAL, "unknown error");
  }
}

char* copy_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

rareebm_status reparse(rareebm_experiment* e, const char* section, const char* key, rareebm::harness::Json value) {
  rareebm::harness::Json j = e->cfg.resolved;
  j[section][key] = std::move(value);
  e->cfg = rareebm::harness::parse_config(j);
  return RAREEBM_OK;
}

}  // namespace

extern "C" {

const char* rareebm_version(void) { return "0.1.0"; }

const char* rareebm_last_error(void) { return last_error.c_str(); }

void rareebm_string_free(char* s) { std::free(s); }

rareebm_status rareebm_experiment_from_file(const char* path, rareebm_experiment** out) {
  if (!path || !out) return fail(RAREEBM_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    std::ifstream in(path);
    if (!in) return fail(RAREEBM_ERR_IO, std::string("cannot open configuration file '") + path + "'");
    *out = new rareebm_experiment{rareebm::harness::load_config_file(path)};
    return RAREEBM_OK;
  });
}

rareebm_status rareebm_experiment_from_json(const char* json, rareebm_experiment** out) {
  if (!json || !out) return fail(RAREEBM_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    const auto j = rareebm::harness::Json::parse(json, nullptr, true, true);
    *out = new rareebm_experiment{rareebm::harness::parse_config(j)};
    return RAREEBM_OK;
  });
}

void rareebm_experiment_free(rareebm_experiment* e) { delete e; }

rareebm_status rareebm_experiment_set_seed(rareebm_experiment* e, uint64_t base_seed) {
  if (!e) return fail(RAREEBM_ERR_ARGUMENT, "null experiment");
  return guarded([&] { return reparse(e, "runs", "base_seed", base_seed); });
}

rareebm_status rareebm_experiment_set_out_dir(rareebm_experiment* e, const char* dir) {
  if (!e || !dir) return fail(RAREEBM_ERR_ARGUMENT, "null argument");
  return guarded([&] { return reparse(e, "output", "dir", std::string(dir)); });
}

rareebm_status rareebm_experiment_set_jobs(rareebm_experiment* e, unsigned jobs) {
  if (!e) return fail(RAREEBM_ERR_ARGUMENT, "null experiment");
  if (jobs == 0) return fail(RAREEBM_ERR_ARGUMENT, "jobs must be positive");
  return guarded([&] { return reparse(e, "runs", "jobs", jobs); });
}

rareebm_status rareebm_experiment_set_runs(rareebm_experiment* e, size_t n_runs) {
  if (!e) return fail(RAREEBM_ERR_ARGUMENT, "null experiment");
  if (n_runs == 0) return fail(RAREEBM_ERR_ARGUMENT, "n_runs must be positive");
  return guarded([&] { return reparse(e, "runs", "n_runs", n_runs); });
}

rareebm_status rareebm_experiment_set_traces(rareebm_experiment* e, int enabled) {
  if (!e) return fail(RAREEBM_ERR_ARGUMENT, "null experiment");
  return guarded([&] { return reparse(e, "output", "traces", enabled != 0); });
}

rareebm_status rareebm_experiment_config_json(const rareebm_experiment* e, char** out) {
  if (!e || !out) return fail(RAREEBM_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    *out = copy_string(rareebm::harness::dump_json(e->cfg.resolved));
    return RAREEBM_OK;
  });
}

rareebm_status rareebm_experiment_run(const rareebm_experiment* e, rareebm_result** out) {
  if (!e || !out) return fail(RAREEBM_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    *out = new rareebm_result{rareebm::harness::run_experiment(e->cfg)};
    return RAREEBM_OK;
  });
}

void rareebm_result_free(rareebm_result* r) { delete r; }

rareebm_status rareebm_result_summary_json(const rareebm_result* r, char** out) {
  if (!r || !out) return fail(RAREEBM_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    *out = copy_string(rareebm::harness::dump_json(r->result.summary));
    return RAREEBM_OK;
  });
}

rareebm_status rareebm_result_run_count(const rareebm_result* r, size_t* out) {
  if (!r || !out) return fail(RAREEBM_ERR_ARGUMENT, "null argument");
  *out = r->result.runs.size();
  return RAREEBM_OK;
}

rareebm_status rareebm_result_run(const rareebm_result* r, size_t index, double* p_hat, uint64_t* budget, int* ok) {
  if (!r) return fail(RAREEBM_ERR_ARGUMENT, "null result");
  if (index >= r->result.runs.size()) return fail(RAREEBM_ERR_ARGUMENT, "run index out of range");
  const auto& run = r->result.runs[index];
  if (p_hat) *p_hat = run.p_hat;
  if (budget) *budget = run.budget;
  if (ok) *ok = run.ok ? 1 : 0;
  return RAREEBM_OK;
}

rareebm_status rareebm_result_trace_csv(const rareebm_result* r, size_t index, char** out) {
  if (!r || !out) return fail(RAREEBM_ERR_ARGUMENT, "null argument");
  if (index >= r->result.runs.size()) return fail(RAREEBM_ERR_ARGUMENT, "run index out of range");
  return guarded([&] {
    std::ostringstream os;
    rareebm::write_trace_csv(os, r->result.runs[index].trace);
    *out = copy_string(os.str());
    return RAREEBM_OK;
  });
}

rareebm_status rareebm_replicate_table(const char* name, const char* config_dir, const char* out_dir, unsigned jobs,
                                       int has_seed, uint64_t seed, int has_runs, size_t runs, char** summary_json) {
  if (!name) return fail(RAREEBM_ERR_ARGUMENT, "null table name");
  return guarded([&] {
    rareebm::harness::TableOptions opts;
    if (config_dir) opts.config_dir = config_dir;
    if (out_dir) opts.out_dir = out_dir;
    opts.jobs = jobs == 0 ? 1 : jobs;
    if (has_seed) opts.seed = seed;
    if (has_runs) {
      if (runs == 0) return fail(RAREEBM_ERR_ARGUMENT, "runs must be positive");
      opts.runs = runs;
    }
    const auto table = rareebm::harness::replicate_table(name, opts);
    if (summary_json) *summary_json = copy_string(rareebm::harness::dump_json(table));
    return RAREEBM_OK;
  });
}

rareebm_status rareebm_oracle_json(const char* problem, const char* options_json, char** out) {
  if (!problem || !out) return fail(RAREEBM_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    rareebm::harness::Json opt = options_json ? rareebm::harness::Json::parse(options_json) : rareebm::harness::Json();
    *out = copy_string(rareebm::harness::dump_json(rareebm::harness::oracle_report(problem, opt)));
    return RAREEBM_OK;
  });
}

rareebm_status rareebm_density_gaussian(double mean, double sd, rareebm_density** out) {
  if (!out) return fail(RAREEBM_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    *out = new rareebm_density{rareebm::ReferenceDensity::gaussian(mean, sd)};
    return RAREEBM_OK;
  });
}

rareebm_status rareebm_density_gev(double location, double scale, double shape, rareebm_density** out) {
  if (!out) return fail(RAREEBM_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    *out = new rareebm_density{rareebm::ReferenceDensity::gev(location, scale, shape)};
    return RAREEBM_OK;
  });
}

void rareebm_density_free(rareebm_density* d) { delete d; }

rareebm_status rareebm_density_pdf(const rareebm_density* d, double r, double* out) {
  if (!d || !out) return fail(RAREEBM_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    *out = d->d.pdf(r);
    return RAREEBM_OK;
  });
}

rareebm_status rareebm_density_score(const rareebm_density* d, double r, double* out) {
  if (!d || !out) return fail(RAREEBM_ERR_ARGUMENT, "null argument");
  return guarded([&] {
    *out = d->d.score(r);
    return RAREEBM_OK;
  });
}

double rareebm_four_branch(double theta1, double theta2) { return rareebm::four_branch(theta1, theta2); }

}  // extern "C"
