#include "harness/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "errors.hpp"

namespace rareebm::harness {
namespace {

constexpr const char* kContamination = R"({
  "problem": {"kind": "contamination", "n_cells": 9, "prior_mean": 1.0, "prior_sd": 0.3,
              "measured_cells": [0, 1, 4], "noise_sd": 0.05, "truth": null, "data": null, "seed": 3},
  "query": {"threshold": 20.0, "also_report": [], "reference": "oracle", "also_report_reference": []},
  "method": {
    "kind": "ebm",
    "ebm": {
      "bias": {"kind": "grid"},
      "grid": {"lo": -80.0, "hi": 120.0, "spacing": 0.1},
      "p_ref": {"kind": "gaussian", "mean": 20.0, "sd": 7.0},
      "learning_rate": {"kind": "constant", "gamma": 15.0},
      "momentum": 0.5,
      "max_steps": 500,
      "n_samples": 125, "thin": 10, "burn_in": 100,
      "sampler": {"kind": "random_walk", "initial_step": 0.1, "pilot_steps": 500, "batch": 25,
                  "target_accept": 0.3, "adapt_rate": 0.0, "group_measured_cells": true},
      "stopping": {"kind": "ksd", "alpha": 0.95, "a_bs": 0.4, "n_boot": 1000, "min_steps": 5, "monitor_ksd": true,
                   "kernel": {"kind": "squared_exponential", "median_heuristic": true, "bandwidth": 1.0}},
      "record_kl": true
    },
    "subset": {
      "samples_per_level": 60, "mh_steps_per_seed": 20,
      "schedule": {"kind": "fixed_log", "start": 5.0, "end": null, "n_thresholds": 35},
      "init_burn_in": 100, "init_thin": 500, "steps": [], "pilot_steps": 500, "target_accept": 0.3
    }
  },
  "runs": {"n_runs": 50, "base_seed": 1, "jobs": 1},
  "output": {"name": "", "dir": "", "traces": false, "published": {}}
})";

constexpr const char* kFourBranch = R"({
  "problem": {"kind": "four_branch"},
  "query": {"threshold": 0.0, "also_report": [2.0], "reference": 4.46e-3, "also_report_reference": [null]},
  "method": {
    "kind": "ebm",
    "ebm": {
      "bias": {"kind": "grid"},
      "grid": {"lo": -10.0, "hi": 100.0, "spacing": 0.1},
      "p_ref": {"kind": "gev", "location": 2.0, "scale": 3.0, "shape": 0.0},
      "learning_rate": {"kind": "constant", "gamma": 6.5},
      "momentum": 0.5,
      "max_steps": 24,
      "n_samples": 100, "thin": 4, "burn_in": 5,
      "sampler": {"kind": "random_walk", "initial_step": 1.0, "pilot_steps": 200, "batch": 25,
                  "target_accept": 0.3, "adapt_rate": 0.5, "group_measured_cells": false},
      "stopping": {"kind": "ksd", "alpha": 0.99, "a_bs": 0.5, "n_boot": 1000, "min_steps": 5, "monitor_ksd": true,
                   "kernel": {"kind": "squared_exponential", "median_heuristic": true, "bandwidth": 1.0}},
      "record_kl": true
    },
    "subset": {
      "samples_per_level": 80, "mh_steps_per_seed": 5,
      "schedule": {"kind": "fixed_log", "start": -2.0, "end": 2.0, "n_thresholds": 24},
      "init_burn_in": 0, "init_thin": 1, "steps": [], "pilot_steps": 200, "target_accept": 0.3
    }
  },
  "runs": {"n_runs": 50, "base_seed": 1, "jobs": 1},
  "output": {"name": "", "dir": "", "traces": false, "published": {}}
})";

constexpr const char* kLoadCapacity = R"({
  "problem": {"kind": "load_capacity", "n_components": 10, "load_mean": 2.0, "load_sd": 1.0,
              "capacity_mean": 12.0, "capacity_sd": 2.0, "sigma_y": 0.05, "measured_total": 8.0},
  "query": {"threshold": 0.0, "also_report": [], "reference": "oracle", "also_report_reference": []},
  "method": {
    "kind": "ebm",
    "ebm": {
      "bias": {"kind": "grid"},
      "grid": {"lo": -100.0, "hi": 100.0, "spacing": 0.1},
      "p_ref": {"kind": "gev", "location": 0.0, "scale": 7.0, "shape": 0.0},
      "learning_rate": {"kind": "exp_decay", "gamma0": 19.0, "factor": -0.005},
      "momentum": 0.95,
      "max_steps": 25,
      "n_samples": 50, "thin": 6, "burn_in": 10,
      "sampler": {"kind": "pcn", "beta": 0.3, "pilot_steps": 0, "batch": 25,
                  "target_accept": 0.3, "adapt_rate": 0.5},
      "stopping": {"kind": "none", "alpha": 0.95, "a_bs": 0.5, "n_boot": 1000, "min_steps": 5, "monitor_ksd": true,
                   "kernel": {"kind": "squared_exponential", "median_heuristic": true, "bandwidth": 1.0}},
      "record_kl": true
    },
    "subset": {
      "samples_per_level": 100, "mh_steps_per_seed": 10,
      "schedule": {"kind": "adaptive", "p0": 0.1},
      "init_burn_in": 100, "init_thin": 10, "steps": [], "pilot_steps": 500, "target_accept": 0.3
    }
  },
  "runs": {"n_runs": 50, "base_seed": 1, "jobs": 1},
  "output": {"name": "", "dir": "", "traces": false, "published": {}}
})";

constexpr const char* kNormalLine = R"({
  "problem": {"kind": "normal_line"},
  "query": {"threshold": 1.959964, "also_report": [], "reference": "oracle", "also_report_reference": []},
  "method": {
    "kind": "ebm",
    "ebm": {
      "bias": {"kind": "grid"},
      "grid": {"lo": -8.0, "hi": 8.0, "spacing": 0.05},
      "p_ref": {"kind": "gaussian", "mean": 0.0, "sd": 2.0},
      "learning_rate": {"kind": "constant", "gamma": 2.0},
      "momentum": 0.5,
      "max_steps": 300,
      "n_samples": 20000, "thin": 5, "burn_in": 100,
      "sampler": {"kind": "random_walk", "initial_step": 2.4, "pilot_steps": 0, "batch": 25,
                  "target_accept": 0.3, "adapt_rate": 0.0, "group_measured_cells": false},
      "stopping": {"kind": "none", "alpha": 0.95, "a_bs": 0.2, "n_boot": 1000, "min_steps": 5, "monitor_ksd": false,
                   "kernel": {"kind": "squared_exponential", "median_heuristic": true, "bandwidth": 1.0}},
      "record_kl": true
    },
    "subset": {
      "samples_per_level": 1000, "mh_steps_per_seed": 5,
      "schedule": {"kind": "adaptive", "p0": 0.1},
      "init_burn_in": 0, "init_thin": 1, "steps": [1.0], "pilot_steps": 200, "target_accept": 0.3
    }
  },
  "runs": {"n_runs": 20, "base_seed": 1, "jobs": 1},
  "output": {"name": "", "dir": "", "traces": false, "published": {}}
})";

// Strict accessor: every key must be consumed, and types are checked.
class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  const Json& raw(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(at(key) + ": missing");
    return j_.at(key);
  }

  double num(const std::string& key) {
    const Json& v = raw(key);
    if (!v.is_number()) throw ConfigError(at(key) + ": expected a number");
    return v.get<double>();
  }
  double num(const std::string& key, double fallback) {
    seen_.insert(key);
    return has(key) ? num(key) : fallback;
  }
  std::int64_t integer(const std::string& key) {
    const Json& v = raw(key);
    if (!v.is_number_integer()) throw ConfigError(at(key) + ": expected an integer");
    return v.get<std::int64_t>();
  }
  std::int64_t integer(const std::string& key, std::int64_t fallback) {
    seen_.insert(key);
    return has(key) ? integer(key) : fallback;
  }
  std::size_t count(const std::string& key) {
    const std::int64_t v = integer(key);
    if (v < 0) throw ConfigError(at(key) + ": must be non-negative");
    return static_cast<std::size_t>(v);
  }
  std::size_t count(const std::string& key, std::size_t fallback) {
    seen_.insert(key);
    return has(key) ? count(key) : fallback;
  }
  bool flag(const std::string& key, bool fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    const Json& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(at(key) + ": expected true or false");
    return v.get<bool>();
  }
  std::string text(const std::string& key) {
    const Json& v = raw(key);
    if (!v.is_string()) throw ConfigError(at(key) + ": expected a string");
    return v.get<std::string>();
  }
  std::string text(const std::string& key, const std::string& fallback) {
    seen_.insert(key);
    return has(key) ? text(key) : fallback;
  }
  std::vector<double> numbers(const std::string& key) {
    const Json& v = raw(key);
    if (v.is_null()) return {};
    if (!v.is_array()) throw ConfigError(at(key) + ": expected an array of numbers");
    std::vector<double> out;
    for (const Json& x : v) {
      if (!x.is_number()) throw ConfigError(at(key) + ": expected an array of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }
  Reader sub(const std::string& key) { return Reader(raw(key), at(key)); }
  void skip(const std::string& key) { seen_.insert(key); }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(at(it.key()) + ": unknown key");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

ReferenceSpec parse_reference(const Json& v, const std::string& where) {
  ReferenceSpec r;
  if (v.is_null()) return r;
  if (v.is_string()) {
    if (v.get<std::string>() != "oracle") throw ConfigError(where + ": expected a number, \"oracle\" or null");
    r.oracle = true;
    return r;
  }
  if (!v.is_number()) throw ConfigError(where + ": expected a number, \"oracle\" or null");
  r.value = v.get<double>();
  return r;
}

ProblemConfig parse_problem(Reader r) {
  ProblemConfig p;
  const std::string kind = r.text("kind");
  if (kind == "contamination") {
    p.kind = ProblemConfig::Kind::Contamination;
    ContaminationSpec& c = p.contamination;
    c.n_cells = static_cast<int>(r.integer("n_cells", c.n_cells));
    c.prior_mean = r.num("prior_mean", c.prior_mean);
    c.prior_sd = r.num("prior_sd", c.prior_sd);
    if (r.has("measured_cells")) {
      c.measured_cells.clear();
      for (double x : r.numbers("measured_cells")) {
        if (x != static_cast<double>(static_cast<int>(x))) throw ConfigError("problem.measured_cells: expected integers");
        c.measured_cells.push_back(static_cast<int>(x));
      }
    } else {
      r.skip("measured_cells");
    }
    c.noise_sd = r.num("noise_sd", c.noise_sd);
    if (r.has("truth")) c.truth = r.numbers("truth");
    else r.skip("truth");
    if (r.has("data")) c.data = r.numbers("data");
    else r.skip("data");
    c.seed = static_cast<std::uint64_t>(r.integer("seed", static_cast<std::int64_t>(c.seed)));
  } else if (kind == "four_branch") {
    p.kind = ProblemConfig::Kind::FourBranch;
  } else if (kind == "load_capacity") {
    p.kind = ProblemConfig::Kind::LoadCapacity;
    LoadCapacitySpec& l = p.load_capacity;
    l.n_components = static_cast<int>(r.integer("n_components", l.n_components));
    l.load_mean = r.num("load_mean", l.load_mean);
    l.load_sd = r.num("load_sd", l.load_sd);
    l.capacity_mean = r.num("capacity_mean", l.capacity_mean);
    l.capacity_sd = r.num("capacity_sd", l.capacity_sd);
    l.sigma_y = r.num("sigma_y", l.sigma_y);
    l.measured_total = r.num("measured_total", l.measured_total);
  } else if (kind == "normal_line") {
    p.kind = ProblemConfig::Kind::NormalLine;
  } else {
    throw ConfigError("problem.kind: unknown problem '" + kind + "'");
  }
  r.finish();
  return p;
}

ReferenceDensity parse_density(Reader r) {
  const std::string kind = r.text("kind");
  ReferenceDensity d = ReferenceDensity::gaussian(0.0, 1.0);
  if (kind == "gaussian") {
    d = ReferenceDensity::gaussian(r.num("mean"), r.num("sd"));
  } else if (kind == "gev") {
    d = ReferenceDensity::gev(r.num("location"), r.num("scale"), r.num("shape", 0.0));
  } else {
    throw ConfigError(r.at("kind") + ": unknown density '" + kind + "'");
  }
  r.finish();
  return d;
}

SteinKernelConfig parse_kernel(Reader r) {
  SteinKernelConfig k;
  const std::string kind = r.text("kind");
  if (kind == "squared_exponential") {
    k.base = SquaredExponential{r.num("bandwidth", 1.0)};
    k.median_heuristic = r.flag("median_heuristic", true);
  } else if (kind == "inverse_multiquadric") {
    k.base = InverseMultiquadric{r.num("c", 1.0), r.num("exponent", -0.5)};
    k.median_heuristic = false;
  } else {
    throw ConfigError(r.at("kind") + ": unknown kernel '" + kind + "'");
  }
  r.finish();
  validate(k);
  return k;
}

EbmMethod parse_ebm(Reader r) {
  EbmMethod m;
  {
    Reader b = r.sub("bias");
    const std::string kind = b.text("kind");
    if (kind == "rbf") {
      m.parametric = true;
      m.rbf.count = b.count("count", m.rbf.count);
      m.rbf.lo = b.num("lo", m.rbf.lo);
      m.rbf.hi = b.num("hi", m.rbf.hi);
      m.rbf.kappa = b.num("kappa", m.rbf.kappa);
    } else if (kind != "grid") {
      throw ConfigError(b.at("kind") + ": expected \"grid\" or \"rbf\"");
    }
    b.finish();
  }
  TrainConfig& t = m.train;
  {
    Reader g = r.sub("grid");
    t.grid = GridDomain(g.num("lo"), g.num("hi"), g.num("spacing"));
    g.finish();
  }
  m.p_ref = parse_density(r.sub("p_ref"));
  {
    Reader lr = r.sub("learning_rate");
    const std::string kind = lr.text("kind");
    if (kind == "constant") t.schedule = LrSchedule::constant(lr.num("gamma"));
    else if (kind == "exp_decay") t.schedule = LrSchedule::exp_decay(lr.num("gamma0"), lr.num("factor"));
    else throw ConfigError(lr.at("kind") + ": expected \"constant\" or \"exp_decay\"");
    lr.finish();
  }
  t.momentum_weight = r.num("momentum");
  t.max_steps = r.count("max_steps");
  t.chain.n_keep = r.count("n_samples");
  t.chain.thin = r.count("thin");
  t.chain.burn_in = r.count("burn_in");
  {
    Reader s = r.sub("sampler");
    const std::string kind = s.text("kind");
    if (kind == "random_walk") t.sampler.kind = SamplerConfig::Kind::RandomWalk;
    else if (kind == "pcn") t.sampler.kind = SamplerConfig::Kind::Pcn;
    else throw ConfigError(s.at("kind") + ": expected \"random_walk\" or \"pcn\"");
    t.sampler.initial_step = s.num("initial_step", t.sampler.initial_step);
    t.sampler.pcn_beta = s.num("beta", t.sampler.pcn_beta);
    t.sampler.tune.pilot_steps = s.count("pilot_steps", 0);
    t.sampler.tune.batch = s.count("batch", t.sampler.tune.batch);
    t.sampler.tune.target_accept = s.num("target_accept", t.sampler.tune.target_accept);
    t.sampler.adapt_rate = s.num("adapt_rate", 0.0);
    m.group_measured_cells = s.flag("group_measured_cells", false);
    s.finish();
  }
  {
    Reader s = r.sub("stopping");
    const std::string kind = s.text("kind");
    if (kind == "ksd") t.stopping.kind = StoppingConfig::Kind::Ksd;
    else if (kind == "none") t.stopping.kind = StoppingConfig::Kind::None;
    else throw ConfigError(s.at("kind") + ": expected \"ksd\" or \"none\"");
    t.stopping.test.alpha = s.num("alpha", t.stopping.test.alpha);
    t.stopping.test.a_bs = s.num("a_bs", t.stopping.test.a_bs);
    t.stopping.test.n_boot = s.count("n_boot", t.stopping.test.n_boot);
    t.stopping.min_steps = s.count("min_steps", t.stopping.min_steps);
    t.stopping.monitor_ksd = s.flag("monitor_ksd", true);
    if (s.has("kernel")) t.stopping.kernel = parse_kernel(s.sub("kernel"));
    else s.skip("kernel");
    s.finish();
  }
  t.record_kl = r.flag("record_kl", true);
  r.finish();
  t.validate();
  return m;
}

SubsetMethod parse_subset(Reader r) {
  SubsetMethod m;
  SubsetConfig& c = m.config;
  c.samples_per_level = r.count("samples_per_level");
  c.mh_steps_per_seed = r.count("mh_steps_per_seed");
  {
    Reader s = r.sub("schedule");
    const std::string kind = s.text("kind");
    if (kind == "adaptive") {
      c.schedule = SubsetConfig::Schedule::Adaptive;
      c.p0 = s.num("p0", c.p0);
      c.max_levels = s.count("max_levels", c.max_levels);
    } else if (kind == "fixed_log") {
      c.schedule = SubsetConfig::Schedule::FixedLog;
      c.start = s.num("start");
      c.n_thresholds = s.count("n_thresholds");
      if (s.has("end")) c.schedule_end = s.num("end");
      else s.skip("end");
    } else {
      throw ConfigError(s.at("kind") + ": expected \"adaptive\" or \"fixed_log\"");
    }
    s.finish();
  }
  c.init_burn_in = r.count("init_burn_in", c.init_burn_in);
  c.init_thin = r.count("init_thin", c.init_thin);
  c.steps = r.numbers("steps");
  c.tune.pilot_steps = r.count("pilot_steps", c.tune.pilot_steps);
  c.tune.target_accept = r.num("target_accept", c.tune.target_accept);
  r.finish();
  c.validate();
  return m;
}

}  // namespace

Json default_config(const std::string& problem_kind, const std::string& method) {
  const char* text = nullptr;
  if (problem_kind == "contamination") text = kContamination;
  else if (problem_kind == "four_branch") text = kFourBranch;
  else if (problem_kind == "load_capacity") text = kLoadCapacity;
  else if (problem_kind == "normal_line") text = kNormalLine;
  else throw ConfigError("problem.kind: unknown problem '" + problem_kind + "'");
  Json j = Json::parse(text);
  if (method != "ebm" && method != "subset") throw ConfigError("method.kind: expected \"ebm\" or \"subset\"");
  j["method"]["kind"] = method;
  return j;
}

Json overlay(const Json& base, const Json& patch) {
  if (!patch.is_object() || !base.is_object()) return patch;
  if (patch.contains("kind") && base.contains("kind") && patch.at("kind") != base.at("kind")) return patch;
  Json out = base;
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (out.contains(it.key())) out[it.key()] = overlay(out[it.key()], it.value());
    else out[it.key()] = it.value();
  }
  return out;
}

ExperimentConfig parse_config(const Json& user) {
  if (!user.is_object()) throw ConfigError("configuration must be a JSON object");
  std::string problem_kind = "contamination";
  if (user.contains("problem")) {
    const Json& p = user.at("problem");
    if (!p.is_object() || !p.contains("kind") || !p.at("kind").is_string())
      throw ConfigError("problem.kind: required string");
    problem_kind = p.at("kind").get<std::string>();
  } else {
    throw ConfigError("problem: required section");
  }
  std::string method = "ebm";
  if (user.contains("method") && user.at("method").is_object() && user.at("method").contains("kind")) {
    if (!user.at("method").at("kind").is_string()) throw ConfigError("method.kind: expected a string");
    method = user.at("method").at("kind").get<std::string>();
  }
  const Json resolved = overlay(default_config(problem_kind, method), user);

  ExperimentConfig cfg;
  cfg.resolved = resolved;
  Reader root(resolved, "");
  cfg.problem = parse_problem(root.sub("problem"));
  {
    Reader q = root.sub("query");
    cfg.threshold = q.num("threshold");
    cfg.also_report = q.numbers("also_report");
    cfg.reference = parse_reference(q.raw("reference"), "query.reference");
    const Json& extra = q.raw("also_report_reference");
    if (!extra.is_null()) {
      if (!extra.is_array()) throw ConfigError("query.also_report_reference: expected an array");
      for (const Json& v : extra) cfg.also_report_reference.push_back(parse_reference(v, "query.also_report_reference"));
    }
    if (cfg.also_report_reference.size() > cfg.also_report.size())
      throw ConfigError("query.also_report_reference: longer than also_report");
    cfg.also_report_reference.resize(cfg.also_report.size());
    q.finish();
    RareEventQuery check(cfg.threshold);
    for (double t : cfg.also_report) RareEventQuery extra_check(t);
  }
  {
    Reader m = root.sub("method");
    const std::string kind = m.text("kind");
    cfg.method = kind == "subset" ? ExperimentConfig::Method::Subset : ExperimentConfig::Method::Ebm;
    // Both blocks are validated so that typos in the inactive one surface too.
    cfg.ebm = parse_ebm(m.sub("ebm"));
    cfg.subset = parse_subset(m.sub("subset"));
    m.finish();
  }
  {
    Reader r = root.sub("runs");
    cfg.n_runs = r.count("n_runs");
    if (cfg.n_runs < 1) throw ConfigError("runs.n_runs: must be at least 1");
    cfg.base_seed = static_cast<std::uint64_t>(r.integer("base_seed"));
    const std::size_t jobs = r.count("jobs", 1);
    cfg.jobs = static_cast<unsigned>(std::max<std::size_t>(1, jobs));
    r.finish();
  }
  {
    Reader o = root.sub("output");
    cfg.name = o.text("name", "");
    cfg.out_dir = o.text("dir", "");
    cfg.traces = o.flag("traces", false);
    const Json& published = o.raw("published");
    cfg.published = published.is_null() ? Json::object() : published;
    o.finish();
  }
  root.finish();

  if (cfg.method == ExperimentConfig::Method::Ebm) {
    const GridDomain& g = cfg.ebm.train.grid;
    if (!g.contains(cfg.threshold)) throw ConfigError("method.ebm.grid: does not cover query.threshold");
    for (double t : cfg.also_report)
      if (!g.contains(t)) throw ConfigError("method.ebm.grid: does not cover query.also_report");
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file '" + path + "'");
  Json j;
  try {
    j = Json::parse(in, nullptr, true, true);
  } catch (const Json::parse_error& e) {
    throw ConfigError("configuration file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

}  // namespace rareebm::harness
