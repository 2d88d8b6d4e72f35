#include "subset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>

#include "densities.hpp"
#include "errors.hpp"

namespace rareebm {

void SubsetConfig::validate() const {
  if (samples_per_level < 2) throw ConfigError("subset sampling needs at least two samples per level");
  if (mh_steps_per_seed == 0) throw ConfigError("subset sampling needs at least one MH step per seed");
  if (schedule == Schedule::Adaptive && !(p0 > 0.0 && p0 < 1.0)) throw ConfigError("p0 must lie in (0, 1)");
  if (schedule == Schedule::FixedLog && n_thresholds == 0) throw ConfigError("fixed schedule needs nr_t >= 1");
  if (init_thin == 0) throw ConfigError("initial thinning must be positive");
  for (double h : steps)
    if (!(h > 0.0)) throw ConfigError("subset step sizes must be positive");
}

std::vector<double> fixed_log_schedule(double start, double end, std::size_t nr_t) {
  if (nr_t == 0) throw ConfigError("fixed schedule needs nr_t >= 1");
  std::vector<double> t(nr_t + 1);
  const double em1 = std::numbers::e - 1.0;
  for (std::size_t k = 0; k <= nr_t; ++k)
    t[k] = start + (end - start) * std::log1p(static_cast<double>(k) * em1 / static_cast<double>(nr_t));
  t[nr_t] = end;
  return t;
}

namespace {

double fraction_at_least(const std::vector<ChainState>& pop, double t) {
  std::size_t c = 0;
  for (const ChainState& s : pop) c += s.r >= t;
  return static_cast<double>(c) / static_cast<double>(pop.size());
}

std::vector<ChainState> initial_population(const TargetProblem& problem, const SubsetConfig& cfg,
                                           RngStream& rng, Budget& budget, std::vector<double>& steps) {
  const std::size_t n = cfg.samples_per_level;
  const BiasedTarget target(problem);
  std::vector<ChainState> pop;
  pop.reserve(n);

  const bool direct = !problem.has_likelihood() && problem.standard_normal.has_value();
  std::optional<ChainState> state;
  if (!direct || steps.empty()) state = init_chain_state(target, problem.initial_point, budget);
  if (steps.empty()) {
    RngStream tune_rng = rng.split("tune");
    steps = tune_step_sizes(target, *state, cfg.tune, tune_rng, budget);
  }
  if (direct) {
    RngStream draw = rng.split("prior");
    std::vector<double> u(problem.dim), theta(problem.dim);
    for (std::size_t i = 0; i < n; ++i) {
      for (double& x : u) x = draw.normal();
      problem.standard_normal->to_theta(u, theta);
      pop.push_back(target.evaluate(theta));
      ++budget.forward_evals;
    }
    return pop;
  }
  RngStream chain = rng.split("init");
  const ProposalKind rw = RandomWalk{steps};
  ChainConfig burn{cfg.init_burn_in, 1, 0};
  if (cfg.init_burn_in > 0) mh_run(target, rw, *state, burn, chain, budget);
  const ChainConfig step{0, cfg.init_thin, 1};
  for (std::size_t i = 0; i < n; ++i) {
    mh_run(target, rw, *state, step, chain, budget);
    pop.push_back(*state);
  }
  return pop;
}

}  // namespace

SubsetResult subset_estimate(const TargetProblem& problem, const RareEventQuery& query, const SubsetConfig& cfg,
                             RngStream& rng, const std::vector<double>& also_report) {
  cfg.validate();
  // Levels run up to the largest requested threshold; every estimate is then
  // read off the same nested populations.
  double T = query.threshold;
  for (double t : also_report) T = std::max(T, RareEventQuery(t).threshold);
  const std::size_t n = cfg.samples_per_level;
  SubsetResult res;
  std::vector<double> steps = cfg.steps;
  if (!steps.empty() && steps.size() != problem.dim) throw ConfigError("subset step sizes have the wrong dimension");

  std::vector<ChainState> pop = initial_population(problem, cfg, rng, res.budget, steps);
  const ProposalKind rw = RandomWalk{steps};
  const std::vector<double> fixed = subset_thresholds(cfg, T);

  // populations[k] is distributed as the target conditioned on r >= thresholds[k-1];
  // cumulative[k] estimates P(r >= thresholds[k-1]).
  std::vector<std::vector<double>> populations;
  std::vector<double> cumulative{1.0};
  std::vector<double> thresholds;
  double p = 1.0;
  double last_acc = 0.0;
  RngStream level_rng = rng.split("levels");
  for (std::size_t k = 0;; ++k) {
    std::vector<double> rs(n);
    for (std::size_t i = 0; i < n; ++i) rs[i] = pop[i].r;
    populations.push_back(rs);

    double tk;
    if (cfg.schedule == SubsetConfig::Schedule::Adaptive) {
      tk = std::min(T, sample_quantile(rs, 1.0 - cfg.p0));
      if (k + 1 >= cfg.max_levels) tk = T;
    } else {
      tk = fixed[std::min(k, fixed.size() - 1)];
    }
    const double frac = fraction_at_least(pop, tk);
    res.levels.push_back({tk, frac, last_acc});
    thresholds.push_back(tk);
    p *= frac;
    cumulative.push_back(p);
    if (frac == 0.0) {
      res.level_failure = true;
      break;
    }
    if (tk >= T) break;

    std::vector<std::size_t> survivors;
    for (std::size_t i = 0; i < n; ++i)
      if (pop[i].r >= tk) survivors.push_back(i);
    const BiasedTarget constrained(problem, nullptr, tk);
    const ChainConfig walk{0, 1, cfg.mh_steps_per_seed};
    RngStream seed_rng = level_rng.split(k);
    std::vector<ChainState> next;
    next.reserve(n);
    std::size_t acc = 0, prop = 0;
    for (std::size_t i = 0; i < n; ++i) {
      ChainState s = pop[survivors[seed_rng.index(survivors.size())]];
      RngStream chain = seed_rng.split(i);
      const ChainResult cr = mh_run(constrained, rw, s, walk, chain, res.budget);
      acc += cr.accepted;
      prop += cr.proposals;
      next.push_back(std::move(s));
    }
    last_acc = prop ? static_cast<double>(acc) / static_cast<double>(prop) : 0.0;
    pop = std::move(next);
  }

  auto readout = [&](double t) {
    // deepest population whose conditioning threshold does not exceed t
    std::size_t k = 0;
    while (k + 1 < populations.size() && thresholds[k] <= t) ++k;
    std::size_t c = 0;
    for (double r : populations[k]) c += r >= t;
    return cumulative[k] * static_cast<double>(c) / static_cast<double>(n);
  };
  res.p_hat = readout(query.threshold);
  for (double t : also_report) res.extra_p_hat.push_back(readout(t));
  return res;
}

std::vector<double> subset_thresholds(const SubsetConfig& cfg, double final_threshold) {
  std::vector<double> out;
  if (cfg.schedule != SubsetConfig::Schedule::FixedLog) return out;
  for (double t : fixed_log_schedule(cfg.start, cfg.schedule_end.value_or(final_threshold), cfg.n_thresholds))
    if (t < final_threshold) out.push_back(t);
  out.push_back(final_threshold);
  return out;
}

std::uint64_t subset_initial_cost(const TargetProblem& problem, const SubsetConfig& cfg) {
  const bool direct = !problem.has_likelihood() && problem.standard_normal.has_value();
  std::uint64_t c = 0;
  if (!direct || cfg.steps.empty()) c += 1;
  if (cfg.steps.empty()) c += cfg.tune.pilot_steps;
  if (direct) return c + cfg.samples_per_level;
  return c + cfg.init_burn_in + cfg.init_thin * cfg.samples_per_level;
}

void write_levels_csv(std::ostream& os, const SubsetResult& r) {
  os << "level,threshold,fraction,acceptance\n";
  char buf[128];
  for (std::size_t k = 0; k < r.levels.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", k, r.levels[k].threshold, r.levels[k].fraction,
                  r.levels[k].acceptance);
    os << buf;
  }
}

}  // namespace rareebm
