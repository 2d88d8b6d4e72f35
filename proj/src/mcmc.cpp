#include "mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "errors.hpp"

namespace rareebm {

BiasedTarget::BiasedTarget(const TargetProblem& problem, const BiasPotential* bias, double r_floor)
    : problem_(&problem), bias_(bias), r_floor_(r_floor) {}

ChainState BiasedTarget::evaluate(std::span<const double> theta) const {
  ChainState s;
  s.theta.assign(theta.begin(), theta.end());
  s.log_prior = problem_->log_prior(theta);
  if (!std::isfinite(s.log_prior)) {
    s.log_prior = -std::numeric_limits<double>::infinity();
    s.r = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  s.log_lik = problem_->has_likelihood() ? problem_->log_likelihood(theta) : 0.0;
  s.r = problem_->qoi(theta);
  return s;
}

ChainState BiasedTarget::evaluate_standard(std::span<const double> u) const {
  if (!problem_->standard_normal) throw ConfigError("problem has no standard-normal transform");
  std::vector<double> theta(problem_->dim);
  problem_->standard_normal->to_theta(u, theta);
  ChainState s = evaluate(theta);
  s.u.assign(u.begin(), u.end());
  return s;
}

bool BiasedTarget::admissible(const ChainState& s) const {
  return std::isfinite(s.log_prior) && std::isfinite(s.log_lik) && std::isfinite(s.r) && s.r >= r_floor_;
}

double BiasedTarget::log_density(const ChainState& s) const {
  if (!admissible(s)) return -std::numeric_limits<double>::infinity();
  return s.log_prior + s.log_lik - bias_at(s.r);
}

double BiasedTarget::log_density_pcn(const ChainState& s) const {
  if (!admissible(s)) return -std::numeric_limits<double>::infinity();
  return s.log_lik - bias_at(s.r);
}

ChainState init_chain_state(const BiasedTarget& target, std::span<const double> theta, Budget& budget) {
  const TargetProblem& p = target.problem();
  if (theta.size() != p.dim) throw ConfigError("initial point has the wrong dimension");
  ChainState s = target.evaluate(theta);
  ++budget.forward_evals;
  if (!std::isfinite(target.log_density(s))) throw NumericError("initial point has non-finite log density");
  if (p.standard_normal) {
    s.u.resize(p.dim);
    p.standard_normal->to_standard(s.theta, s.u);
  }
  return s;
}

namespace {

// One Metropolis step; returns whether the proposal was accepted.
class Stepper {
 public:
  Stepper(const BiasedTarget& target, const ProposalKind& proposal, ChainState& state)
      : target_(target), proposal_(proposal), state_(state), scratch_(state.theta.size()) {
    if (const auto* rw = std::get_if<RandomWalk>(&proposal_)) {
      if (rw->steps.size() != state.theta.size()) throw ConfigError("random walk: one step size per coordinate");
      for (double h : rw->steps)
        if (!(h >= 0.0) || !std::isfinite(h)) throw ConfigError("random walk: step sizes must be finite and >= 0");
    } else {
      const double b = std::get<Pcn>(proposal_).beta;
      if (!(b > 0.0 && b <= 1.0)) throw ConfigError("pCN parameter must lie in (0, 1]");
      if (!target.problem().standard_normal) throw ConfigError("pCN needs a standard-normal transform");
      if (state.u.size() != state.theta.size()) throw ConfigError("pCN state lacks standard-normal coordinates");
    }
    refresh();
  }

  // Re-evaluates the cached density after the bias changed.
  void refresh() {
    current_ = is_pcn() ? target_.log_density_pcn(state_) : target_.log_density(state_);
    if (!std::isfinite(current_)) throw NumericError("chain state has non-finite log density");
  }

  bool is_pcn() const { return std::holds_alternative<Pcn>(proposal_); }

  // coords limits random-walk moves to a subset (nullptr = all).
  bool step(RngStream& rng, Budget& budget, const std::vector<std::size_t>* coords = nullptr, double scale = 1.0) {
    ChainState cand;
    double cand_logd;
    if (const auto* rw = std::get_if<RandomWalk>(&proposal_)) {
      std::copy(state_.theta.begin(), state_.theta.end(), scratch_.begin());
      if (coords) {
        for (std::size_t c : *coords) scratch_[c] += scale * rw->steps[c] * rng.normal();
      } else {
        for (std::size_t c = 0; c < scratch_.size(); ++c) scratch_[c] += scale * rw->steps[c] * rng.normal();
      }
      cand = target_.evaluate(scratch_);
      cand_logd = target_.log_density(cand);
    } else {
      const double b = std::get<Pcn>(proposal_).beta;
      const double a = std::sqrt(std::max(0.0, 1.0 - b * b));
      for (std::size_t c = 0; c < scratch_.size(); ++c) scratch_[c] = a * state_.u[c] + b * rng.normal();
      cand = target_.evaluate_standard(scratch_);
      cand_logd = target_.log_density_pcn(cand);
    }
    ++budget.forward_evals;
    const double log_u = std::log(rng.uniform());
    if (log_u < cand_logd - current_) {
      if (!is_pcn() && !state_.u.empty()) {
        cand.u.resize(cand.theta.size());
        target_.problem().standard_normal->to_standard(cand.theta, cand.u);
      }
      state_ = std::move(cand);
      current_ = cand_logd;
      return true;
    }
    return false;
  }

  const ChainState& state() const { return state_; }

 private:
  const BiasedTarget& target_;
  const ProposalKind& proposal_;
  ChainState& state_;
  std::vector<double> scratch_;
  double current_ = 0.0;
};

void write_trace_row(std::ostream& os, std::size_t step, double r, bool accepted) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%zu,%.17g,%d\n", step, r, accepted ? 1 : 0);
  os << buf;
}

}  // namespace

ChainResult mh_run(const BiasedTarget& target, const ProposalKind& proposal, ChainState& state,
                   const ChainConfig& cfg, RngStream& rng, Budget& budget) {
  if (cfg.thin == 0) throw ConfigError("thinning factor must be positive");
  Stepper stepper(target, proposal, state);
  ChainResult res;
  res.kept_r.reserve(cfg.n_keep);
  if (cfg.keep_theta) res.kept_theta.reserve(cfg.n_keep * state.theta.size());
  std::size_t step_no = 0;
  for (std::size_t i = 0; i < cfg.burn_in; ++i, ++step_no) {
    const bool acc = stepper.step(rng, budget);
    res.burn_in_accepted += acc;
    if (cfg.trace) write_trace_row(*cfg.trace, step_no, state.r, acc);
  }
  for (std::size_t k = 0; k < cfg.n_keep; ++k) {
    for (std::size_t t = 0; t < cfg.thin; ++t, ++step_no) {
      const bool acc = stepper.step(rng, budget);
      res.accepted += acc;
      ++res.proposals;
      if (cfg.trace) write_trace_row(*cfg.trace, step_no, state.r, acc);
    }
    res.kept_r.push_back(state.r);
    if (cfg.keep_theta) res.kept_theta.insert(res.kept_theta.end(), state.theta.begin(), state.theta.end());
  }
  res.acceptance_rate = res.proposals ? static_cast<double>(res.accepted) / static_cast<double>(res.proposals) : 0.0;
  return res;
}

std::vector<double> tune_step_sizes(const BiasedTarget& target, ChainState& state, const TuneConfig& cfg,
                                    RngStream& rng, Budget& budget, std::optional<std::vector<double>> start) {
  const std::size_t d = state.theta.size();
  if (cfg.pilot_steps < 200) throw ConfigError("step-size tuning needs at least 200 pilot steps");
  if (cfg.batch == 0) throw ConfigError("tuning batch must be positive");
  std::vector<std::vector<std::size_t>> groups = cfg.groups;
  if (groups.empty()) {
    groups.emplace_back(d);
    for (std::size_t i = 0; i < d; ++i) groups[0][i] = i;
  }
  for (const auto& g : groups)
    for (std::size_t c : g)
      if (c >= d) throw ConfigError("tuning group index out of range");

  RandomWalk rw{start ? std::move(*start) : std::vector<double>(d, cfg.initial_step)};
  if (rw.steps.size() != d) throw ConfigError("initial step sizes have the wrong dimension");
  for (double& h : rw.steps) h = std::max(h, cfg.floor);
  ProposalKind kind = std::move(rw);
  auto& steps = std::get<RandomWalk>(kind).steps;

  const std::size_t n_batches = std::max<std::size_t>(1, cfg.pilot_steps / cfg.batch);
  const bool split = groups.size() > 1;
  const std::size_t group_batches = split ? (n_batches + 1) / 2 : 0;

  Stepper stepper(target, kind, state);
  std::vector<std::size_t> visits(groups.size(), 0);
  std::size_t used = 0;
  for (std::size_t b = 0; b < group_batches; ++b) {
    const std::size_t gi = b % groups.size();
    std::size_t acc = 0;
    for (std::size_t s = 0; s < cfg.batch; ++s) acc += stepper.step(rng, budget, &groups[gi]);
    used += cfg.batch;
    const double eta = 1.0 / std::sqrt(static_cast<double>(++visits[gi]));
    const double f = std::exp(eta * (static_cast<double>(acc) / static_cast<double>(cfg.batch) - cfg.target_accept));
    for (std::size_t c : groups[gi]) steps[c] = std::max(cfg.floor, steps[c] * f);
  }
  std::size_t k = 0;
  while (used < cfg.pilot_steps) {
    const std::size_t len = std::min(cfg.batch, cfg.pilot_steps - used);
    std::size_t acc = 0;
    for (std::size_t s = 0; s < len; ++s) acc += stepper.step(rng, budget);
    used += len;
    const double eta = 1.0 / std::sqrt(static_cast<double>(++k));
    const double f = std::exp(eta * (static_cast<double>(acc) / static_cast<double>(len) - cfg.target_accept));
    for (double& h : steps) h = std::max(cfg.floor, h * f);
  }
  return steps;
}

double tune_pcn_beta(const BiasedTarget& target, ChainState& state, const TuneConfig& cfg, RngStream& rng,
                     Budget& budget, double start) {
  if (cfg.pilot_steps < 200) throw ConfigError("pCN tuning needs at least 200 pilot steps");
  if (cfg.batch == 0) throw ConfigError("tuning batch must be positive");
  ProposalKind kind = Pcn{std::clamp(start, 1e-4, 1.0)};
  Stepper stepper(target, kind, state);
  std::size_t used = 0, k = 0;
  while (used < cfg.pilot_steps) {
    const std::size_t len = std::min(cfg.batch, cfg.pilot_steps - used);
    std::size_t acc = 0;
    for (std::size_t s = 0; s < len; ++s) acc += stepper.step(rng, budget);
    used += len;
    const double eta = 1.0 / std::sqrt(static_cast<double>(++k));
    double& beta = std::get<Pcn>(kind).beta;
    beta = std::clamp(beta * std::exp(eta * (static_cast<double>(acc) / static_cast<double>(len) - cfg.target_accept)),
                      1e-4, 1.0);
  }
  return std::get<Pcn>(kind).beta;
}

std::optional<double> lag1_correlation(std::span<const double> r) {
  if (r.size() < 3) return std::nullopt;
  const std::size_t n = r.size() - 1;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += r[i];
    my += r[i + 1];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = r[i] - mx, b = r[i + 1] - my;
    sxy += a * b;
    sxx += a * a;
    syy += b * b;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace rareebm
