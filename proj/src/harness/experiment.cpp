#include "harness/experiment.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "densities.hpp"
#include "errors.hpp"
#include "estimator.hpp"
#include "gchisq.hpp"
#include "harness/json_out.hpp"
#include "subset.hpp"

namespace fs = std::filesystem;

namespace rareebm::harness {

std::optional<double> ProblemInstance::oracle(double threshold) const {
  if (contamination) return gaussian_quadratic_tail(contamination->posterior.mean, contamination->posterior.cov, threshold);
  if (load_capacity) return load_capacity->failure_probability(threshold);
  if (problem.name == "standard_normal_line") return normal_sf(threshold);
  return std::nullopt;
}

ProblemInstance build_problem(const ProblemConfig& cfg) {
  ProblemInstance inst;
  switch (cfg.kind) {
    case ProblemConfig::Kind::Contamination:
      inst.contamination = contamination_problem(cfg.contamination);
      inst.problem = inst.contamination->problem;
      break;
    case ProblemConfig::Kind::FourBranch:
      inst.problem = four_branch_problem();
      break;
    case ProblemConfig::Kind::LoadCapacity:
      inst.load_capacity = load_capacity_problem(cfg.load_capacity);
      inst.problem = inst.load_capacity->problem;
      break;
    case ProblemConfig::Kind::NormalLine:
      inst.problem = standard_normal_line_problem();
      break;
  }
  return inst;
}

namespace {

TrainConfig train_config_for(const ExperimentConfig& cfg, const ProblemInstance& inst) {
  TrainConfig tc = cfg.ebm.train;
  if (cfg.ebm.group_measured_cells && inst.contamination) {
    std::vector<std::size_t> measured, free;
    const auto& cells = inst.contamination->spec.measured_cells;
    for (std::size_t i = 0; i < inst.problem.dim; ++i) {
      if (std::find(cells.begin(), cells.end(), static_cast<int>(i)) != cells.end()) measured.push_back(i);
      else free.push_back(i);
    }
    tc.sampler.tune.groups.clear();
    if (!measured.empty()) tc.sampler.tune.groups.push_back(measured);
    if (!free.empty()) tc.sampler.tune.groups.push_back(free);
  }
  return tc;
}

BiasPotential initial_bias(const ExperimentConfig& cfg) {
  if (cfg.ebm.parametric) {
    const RbfLayout& l = cfg.ebm.rbf;
    return RbfBias::equispaced(l.count, l.lo, l.hi, l.kappa);
  }
  return GridBias{GridFunction::constant(cfg.ebm.train.grid, 0.0)};
}

double run_threshold(const ExperimentConfig& cfg) {
  double t = cfg.threshold;
  for (double x : cfg.also_report) t = std::max(t, x);
  return t;
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string threshold_label(double t) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", t);
  return buf;
}

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

void write_runs_csv(const fs::path& path, const ExperimentConfig& cfg, const std::vector<RunOutcome>& runs) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "run,seed,p_hat,budget,steps,stop_reason,status";
  for (double t : cfg.also_report) os << ",p_hat_at_" << threshold_label(t);
  os << "\n";
  for (const RunOutcome& r : runs) {
    os << r.run << "," << r.seed << "," << (r.ok ? fmt(r.p_hat) : "") << "," << r.budget << "," << r.steps << ","
       << r.stop_reason << "," << (r.ok ? "ok" : "failed");
    for (std::size_t k = 0; k < cfg.also_report.size(); ++k)
      os << "," << (r.ok && k < r.extra_p_hat.size() ? fmt(r.extra_p_hat[k]) : "");
    os << "\n";
  }
}

}  // namespace

Json statistics_json(const RunStatistics& s) {
  Json j = Json::object();
  j["n"] = s.n;
  j["mean"] = s.mean;
  j["sd"] = optional_number(s.sd);
  j["rmse"] = optional_number(s.rmse);
  j["cov"] = optional_number(s.cov);
  j["ci_low"] = s.ci_low;
  j["ci_high"] = s.ci_high;
  j["budget_min"] = s.budget_min;
  j["budget_max"] = s.budget_max;
  j["budget_mean"] = s.budget_mean;
  return j;
}

RunOutcome run_replicate(const ExperimentConfig& cfg, const ProblemInstance& inst, std::size_t run, std::uint64_t seed) {
  RunOutcome out;
  out.run = run;
  out.seed = seed;
  RngStream rng(seed);
  const RareEventQuery query(cfg.threshold);
  try {
    if (cfg.method == ExperimentConfig::Method::Ebm) {
      const TrainConfig tc = train_config_for(cfg, inst);
      const ReferenceDensity& p_ref = *cfg.ebm.p_ref;
      TrainResult tr = train_bias_potential(inst.problem, query, p_ref, initial_bias(cfg), tc, rng);
      const FreeEnergyEstimate est = free_energy_from_bias(tr.bias, p_ref, tc.grid);
      out.p_hat = tail_probability(est, cfg.threshold).value;
      for (double t : cfg.also_report) out.extra_p_hat.push_back(tail_probability(est, t).value);
      out.budget = tr.budget.forward_evals;
      out.steps = tr.steps;
      out.stop_reason = to_string(tr.stop_reason);
      out.trace = std::move(tr.trace);
    } else {
      const SubsetResult sr = subset_estimate(inst.problem, query, cfg.subset.config, rng, cfg.also_report);
      out.p_hat = sr.p_hat;
      out.extra_p_hat = sr.extra_p_hat;
      out.budget = sr.budget.forward_evals;
      out.steps = sr.levels.size();
      out.stop_reason = sr.level_failure ? "level_failure" : "final_level";
    }
    out.ok = true;
  } catch (const ConfigError&) {
    throw;
  } catch (const TrainingError& e) {
    out.error = e.what();
    out.trace = e.trace();
    out.stop_reason = "failed";
  } catch (const std::exception& e) {
    out.error = e.what();
    out.stop_reason = "failed";
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const ProblemInstance inst = build_problem(cfg.problem);
  ExperimentResult res;
  res.runs.resize(cfg.n_runs);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cfg.n_runs) return;
      try {
        res.runs[i] = run_replicate(cfg, inst, i, cfg.base_seed + i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next.store(cfg.n_runs);
      }
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(cfg.jobs, static_cast<unsigned>(cfg.n_runs)));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  // Reference values.
  auto resolve = [&](const ReferenceSpec& r, double t) -> std::optional<double> {
    if (r.value) return r.value;
    if (r.oracle) {
      const auto o = inst.oracle(t);
      if (!o) throw ConfigError("query.reference: no oracle available for this problem");
      return o;
    }
    return std::nullopt;
  };
  res.reference = resolve(cfg.reference, cfg.threshold);
  for (std::size_t k = 0; k < cfg.also_report.size(); ++k)
    res.extra_reference.push_back(resolve(cfg.also_report_reference[k], cfg.also_report[k]));

  std::vector<double> est;
  std::vector<std::vector<double>> extra(cfg.also_report.size());
  std::vector<std::uint64_t> budgets;
  Json failures = Json::array();
  Json stops = Json::object();
  for (const RunOutcome& r : res.runs) {
    stops[r.stop_reason] = stops.value(r.stop_reason, 0) + 1;
    if (!r.ok) {
      failures.push_back({{"run", r.run}, {"seed", r.seed}, {"error", r.error}});
      continue;
    }
    est.push_back(r.p_hat);
    budgets.push_back(r.budget);
    for (std::size_t k = 0; k < extra.size(); ++k) extra[k].push_back(r.extra_p_hat[k]);
  }
  if (!est.empty()) {
    res.stats = compute_statistics(est, budgets, res.reference);
    for (std::size_t k = 0; k < extra.size(); ++k)
      res.extra_stats.push_back(compute_statistics(extra[k], budgets, res.extra_reference[k]));
  } else {
    res.extra_stats.resize(extra.size());
  }

  Json s = Json::object();
  s["name"] = cfg.name;
  s["problem"] = cfg.resolved["problem"]["kind"];
  s["method"] = cfg.method == ExperimentConfig::Method::Ebm ? "ebm" : "subset";
  s["threshold"] = cfg.threshold;
  s["n_runs"] = cfg.n_runs;
  s["n_completed"] = est.size();
  s["partial"] = est.size() != cfg.n_runs;
  s["reference"] = optional_number(res.reference);
  s["statistics"] = res.stats ? statistics_json(*res.stats) : Json(nullptr);
  Json extras = Json::array();
  for (std::size_t k = 0; k < cfg.also_report.size(); ++k) {
    extras.push_back({{"threshold", cfg.also_report[k]},
                      {"reference", optional_number(res.extra_reference[k])},
                      {"statistics", res.extra_stats[k] ? statistics_json(*res.extra_stats[k]) : Json(nullptr)}});
  }
  s["also_report"] = extras;
  if (cfg.method == ExperimentConfig::Method::Subset) s["planned_budget"] = planned_subset_budget(cfg, inst);
  s["stop_reasons"] = stops;
  s["failures"] = failures;
  s["published"] = cfg.published;
  s["config"] = cfg.resolved;
  res.summary = s;

  if (!cfg.out_dir.empty()) {
    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    write_runs_csv(dir / "runs.csv", cfg, res.runs);
    std::ofstream(dir / "summary.json") << dump_json(s);
    if (cfg.traces && cfg.method == ExperimentConfig::Method::Ebm) {
      fs::create_directories(dir / "traces");
      for (const RunOutcome& r : res.runs) {
        char name[32];
        std::snprintf(name, sizeof name, "run_%04zu.csv", r.run);
        std::ofstream os(dir / "traces" / name);
        write_trace_csv(os, r.trace);
      }
    }
  }
  return res;
}

std::uint64_t planned_subset_budget(const ExperimentConfig& cfg, const ProblemInstance& inst) {
  const SubsetConfig& sc = cfg.subset.config;
  const std::uint64_t init = subset_initial_cost(inst.problem, sc);
  if (sc.schedule != SubsetConfig::Schedule::FixedLog) return init;
  const std::size_t levels = subset_thresholds(sc, run_threshold(cfg)).size();
  return init + (levels - 1) * sc.samples_per_level * sc.mh_steps_per_seed;
}

std::size_t match_subset_thresholds(const ExperimentConfig& cfg, const ProblemInstance& inst, double budget) {
  const SubsetConfig& sc = cfg.subset.config;
  if (sc.schedule != SubsetConfig::Schedule::FixedLog)
    throw ConfigError("budget matching needs the fixed_log subset schedule");
  if (sc.schedule_end && *sc.schedule_end != run_threshold(cfg))
    throw ConfigError("budget matching needs the schedule to end at the largest query threshold");
  const double init = static_cast<double>(subset_initial_cost(inst.problem, sc));
  const double per_level = static_cast<double>(sc.samples_per_level * sc.mh_steps_per_seed);
  const double n = std::round((budget - init) / per_level);
  return static_cast<std::size_t>(std::max(1.0, n));
}

std::string default_config_dir() {
  if (const char* env = std::getenv("RAREEBM_CONFIG_DIR"); env && *env) return env;
  return RAREEBM_DEFAULT_CONFIG_DIR;
}

Json replicate_table(const std::string& name, const TableOptions& opts) {
  const fs::path base = fs::path(opts.config_dir.empty() ? default_config_dir() : opts.config_dir) / name;
  const fs::path manifest_path = base / "table.json";
  std::ifstream in(manifest_path);
  if (!in) throw ConfigError("no replication manifest at " + manifest_path.string());
  Json manifest;
  try {
    manifest = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("invalid manifest " + manifest_path.string() + ": " + e.what());
  }
  if (!manifest.contains("rows") || !manifest["rows"].is_array()) throw ConfigError("manifest needs a rows array");

  const fs::path out_root = fs::path(opts.out_dir.empty() ? "results" : opts.out_dir) / name;
  Json table = Json::object();
  table["table"] = name;
  table["title"] = manifest.value("title", "");
  Json rows = Json::array();
  std::map<std::string, double> mean_budget;
  std::ofstream csv;
  fs::create_directories(out_root);
  csv.open(out_root / "table_summary.csv");
  csv << "row,label,threshold,budget_mean,mean,rmse,cov,ci_low,ci_high,reference\n";

  for (const Json& row : manifest["rows"]) {
    const std::string id = row.at("id").get<std::string>();
    const std::string label = row.value("label", id);
    std::ifstream cin(base / row.at("config").get<std::string>());
    if (!cin) throw ConfigError("missing row config " + (base / row.at("config").get<std::string>()).string());
    Json user = Json::parse(cin, nullptr, true, true);
    if (opts.seed) user["runs"]["base_seed"] = *opts.seed;
    if (opts.runs) user["runs"]["n_runs"] = *opts.runs;
    user["runs"]["jobs"] = opts.jobs;
    user["output"]["dir"] = (out_root / id).string();
    if (!user["output"].contains("name")) user["output"]["name"] = label;
    if (row.contains("published")) user["output"]["published"] = row["published"];
    ExperimentConfig cfg = parse_config(user);

    Json match = nullptr;
    if (row.contains("budget_match")) {
      const Json& bm = row["budget_match"];
      double target;
      if (bm.contains("from")) {
        const std::string from = bm["from"].get<std::string>();
        if (!mean_budget.count(from)) throw ConfigError("budget_match refers to an unknown or later row '" + from + "'");
        target = mean_budget[from];
      } else {
        target = bm.at("budget").get<double>();
      }
      const ProblemInstance inst = build_problem(cfg.problem);
      const std::size_t nr = match_subset_thresholds(cfg, inst, target);
      user["method"]["subset"]["schedule"]["n_thresholds"] = nr;
      cfg = parse_config(user);
      const std::uint64_t planned = planned_subset_budget(cfg, inst);
      match = {{"target", target}, {"n_thresholds", nr}, {"planned_budget", planned},
               {"relative_gap", std::abs(static_cast<double>(planned) - target) / target}};
    }

    const ExperimentResult r = run_experiment(cfg);
    if (r.stats) mean_budget[id] = r.stats->budget_mean;
    Json jr = {{"id", id}, {"label", label}, {"config", row.at("config")}, {"summary", r.summary["statistics"]},
               {"also_report", r.summary["also_report"]}, {"reference", r.summary["reference"]},
               {"n_completed", r.summary["n_completed"]}, {"budget_match", match},
               {"published", row.value("published", Json::object())}};
    rows.push_back(jr);

    auto line = [&](double t, const std::optional<RunStatistics>& st, const std::optional<double>& ref) {
      csv << id << ",\"" << label << "\"," << fmt(t) << ",";
      if (st) {
        csv << fmt(st->budget_mean) << "," << fmt(st->mean) << "," << (st->rmse ? fmt(*st->rmse) : "") << ","
            << (st->cov ? fmt(*st->cov) : "") << "," << fmt(st->ci_low) << "," << fmt(st->ci_high);
      } else {
        csv << ",,,,,";
      }
      csv << "," << (ref ? fmt(*ref) : "") << "\n";
    };
    line(cfg.threshold, r.stats, r.reference);
    for (std::size_t k = 0; k < cfg.also_report.size(); ++k)
      line(cfg.also_report[k], r.extra_stats[k], r.extra_reference[k]);
  }
  table["rows"] = rows;
  std::ofstream(out_root / "table_summary.json") << dump_json(table);
  return table;
}

Json oracle_report(const std::string& problem, const Json& options) {
  const Json opt = options.is_null() ? Json::object() : options;
  Json out = Json::object();
  out["problem"] = problem;
  if (problem == "contamination") {
    ContaminationSpec spec;
    if (opt.contains("seed")) spec.seed = opt["seed"].get<std::uint64_t>();
    const double t = opt.value("threshold", 20.0);
    const auto n_is = opt.value("importance_samples", static_cast<std::uint64_t>(1000000));
    const ContaminationCase c = contamination_problem(spec);
    out["seed"] = spec.seed;
    out["measured_cells"] = spec.measured_cells;
    out["truth"] = c.truth;
    out["data"] = c.data;
    out["posterior_mean"] = std::vector<double>(c.posterior.mean.data(), c.posterior.mean.data() + c.posterior.mean.size());
    Json sd = Json::array();
    for (Eigen::Index i = 0; i < c.posterior.cov.rows(); ++i) sd.push_back(std::sqrt(c.posterior.cov(i, i)));
    out["posterior_sd"] = sd;
    out["threshold"] = t;
    out["probability"] = gaussian_quadratic_tail(c.posterior.mean, c.posterior.cov, t);
    RngStream rng(spec.seed, 7);
    const MonteCarloEstimate is = gaussian_quadratic_tail_importance(c.posterior.mean, c.posterior.cov, t, rng, n_is);
    out["importance_sampling"] = {{"samples", n_is}, {"estimate", is.estimate}, {"std_error", is.std_error}};
  } else if (problem == "four_branch") {
    const auto n = opt.value("samples", static_cast<std::uint64_t>(10000000));
    const auto seed = opt.value("seed", static_cast<std::uint64_t>(1));
    std::vector<double> ts = opt.value("thresholds", std::vector<double>{0.0, 2.0});
    Json rows = Json::array();
    for (const TailMonteCarlo& m : four_branch_tail_mc(ts, n, seed))
      rows.push_back({{"threshold", m.threshold}, {"estimate", m.estimate}, {"std_error", m.std_error}});
    out["samples"] = n;
    out["seed"] = seed;
    out["tails"] = rows;
  } else if (problem == "load_capacity") {
    std::vector<int> ns = opt.value("n_components", std::vector<int>{10, 100});
    const double t = opt.value("threshold", 0.0);
    Json rows = Json::array();
    for (int n : ns) {
      LoadCapacitySpec spec;
      spec.n_components = n;
      const LoadCapacityCase c = load_capacity_problem(spec);
      rows.push_back({{"n_components", n},
                      {"total_log_mean", c.params.total_log_mean},
                      {"total_log_var", c.params.total_log_var},
                      {"posterior_component_log_mean", c.posterior_component_log_mean},
                      {"posterior_component_log_var", c.posterior_component_log_var},
                      {"failure_probability", c.failure_probability(t)}});
    }
    out["threshold"] = t;
    out["cases"] = rows;
  } else if (problem == "normal_line") {
    const double t = opt.value("threshold", 1.959964);
    out["threshold"] = t;
    out["probability"] = normal_sf(t);
  } else {
    throw ConfigError("oracle: unknown problem '" + problem + "'");
  }
  return out;
}

}  // namespace rareebm::harness
