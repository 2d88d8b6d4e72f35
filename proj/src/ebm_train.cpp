#include "ebm_train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace rareebm {

double LrSchedule::at(std::size_t n) const {
  if (kind == Kind::Constant) return gamma0;
  return gamma0 * std::exp(factor * static_cast<double>(n));
}

void LrSchedule::validate() const {
  if (!(gamma0 > 0.0) || !std::isfinite(gamma0)) throw ConfigError("learning rate must be positive");
  if (kind == Kind::ExpDecay && !(factor < 0.0)) throw ConfigError("decay factor must be negative");
}

std::vector<double> sgdm_step(SgdmState& state, std::span<const double> grad, double lr) {
  if (state.momentum.empty()) state.momentum.assign(grad.size(), 0.0);
  if (state.momentum.size() != grad.size()) throw ConfigError("SGDM: gradient dimension changed");
  if (!(state.momentum_weight >= 0.0 && state.momentum_weight < 1.0))
    throw ConfigError("SGDM: momentum weight must lie in [0, 1)");
  for (double g : grad)
    if (!std::isfinite(g)) throw NumericError("SGDM: non-finite gradient");
  const double b = state.momentum_weight;
  std::vector<double> delta(grad.size());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    state.momentum[i] = b * state.momentum[i] + (1.0 - b) * grad[i];
    delta[i] = -lr * state.momentum[i];
  }
  ++state.step;
  return delta;
}

std::vector<double> kl_gradient_rbf(const RbfBias& v, std::span<const double> ref_samples,
                                    std::span<const double> biased_samples) {
  if (ref_samples.empty() || biased_samples.empty()) throw EstimationError("KL gradient needs samples");
  std::vector<double> g(v.centers.size(), 0.0);
  const double wr = 1.0 / static_cast<double>(ref_samples.size());
  const double ws = 1.0 / static_cast<double>(biased_samples.size());
  for (double r : ref_samples) accumulate_weight_gradient(v, r, wr, g);
  for (double s : biased_samples) accumulate_weight_gradient(v, s, -ws, g);
  return g;
}

std::vector<double> mle_gradient_rbf(const RbfBias& v, std::span<const double> ref_samples,
                                     std::span<const double> biased_samples) {
  if (ref_samples.empty() || biased_samples.empty()) throw EstimationError("KL gradient needs samples");
  const std::size_t b = v.centers.size();
  // d log Z / dw = -E_{p_V}[dV/dw], estimated from the biased samples.
  std::vector<double> dlogz(b, 0.0);
  const double ws = 1.0 / static_cast<double>(biased_samples.size());
  for (double s : biased_samples) accumulate_weight_gradient(v, s, -ws, dlogz);
  // d/dw log p_V(r) = -dV/dw(r) - d log Z/dw; average over r_i and negate.
  std::vector<double> mean_dlogp(b, 0.0);
  const double wr = 1.0 / static_cast<double>(ref_samples.size());
  for (double r : ref_samples) accumulate_weight_gradient(v, r, -wr, mean_dlogp);
  for (std::size_t j = 0; j < b; ++j) mean_dlogp[j] -= dlogz[j];
  for (double& x : mean_dlogp) x = -x;
  return mean_dlogp;
}

GridFunction kl_gradient_grid(const GridFunction& p_ref, const GridFunction& p_v) {
  if (!(p_ref.domain() == p_v.domain())) throw ConfigError("grid gradient: grid mismatch");
  std::vector<double> d(p_ref.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = p_ref[i] - p_v[i];
  return GridFunction(p_ref.domain(), std::move(d));
}

GridFunction tabulate(const ReferenceDensity& p_ref, const GridDomain& grid) {
  std::vector<double> v(grid.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = p_ref.pdf(grid.node(i));
  return GridFunction(grid, std::move(v));
}

double estimate_kl(const ReferenceDensity& p_ref, const GridFunction& p_v) {
  const GridDomain& g = p_v.domain();
  std::vector<double> f(g.size(), 0.0);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double r = g.node(i);
    const double pr = p_ref.pdf(r);
    if (pr <= 0.0) continue;
    f[i] = pr * (p_ref.log_pdf(r) - std::log(std::max(p_v[i], 1e-12)));
  }
  return grid_integral(GridFunction(g, std::move(f)));
}

void TrainConfig::validate() const {
  if (chain.n_keep < 2) throw ConfigError("training needs at least two gradient samples per step");
  if (chain.thin == 0) throw ConfigError("thinning factor must be positive");
  if (!(momentum_weight >= 0.0 && momentum_weight < 1.0)) throw ConfigError("momentum weight must lie in [0, 1)");
  schedule.validate();
  if (stopping.kind == StoppingConfig::Kind::Ksd) rareebm::validate(stopping.test);
  rareebm::validate(stopping.kernel);
  if (sampler.tune.pilot_steps != 0 && sampler.tune.pilot_steps < 200)
    throw ConfigError("pilot run needs 0 or at least 200 steps");
}

std::string to_string(StopReason r) { return r == StopReason::KsdAccepted ? "ksd" : "max_steps"; }

namespace {

bool all_in_support(std::span<const double> x, const ReferenceDensity& p) {
  for (double r : x) {
    if (!p.in_support(r)) return false;
    // the score must also be finite for the Stein kernel
    if (!std::isfinite(p.log_pdf(r))) return false;
  }
  return true;
}

double sample_variance(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

}  // namespace

TrainResult train_bias_potential(const TargetProblem& problem, const RareEventQuery& query,
                                 const ReferenceDensity& p_ref, const BiasPotential& bias_init,
                                 const TrainConfig& cfg, RngStream& rng) {
  cfg.validate();
  if (!cfg.grid.contains(query.threshold)) throw ConfigError("working grid does not cover the query threshold");
  if (const auto* rbf = std::get_if<RbfBias>(&bias_init)) validate(*rbf);
  if (const auto* gb = std::get_if<GridBias>(&bias_init))
    if (!(gb->values.domain() == cfg.grid)) throw ConfigError("grid bias must live on the working grid");

  TrainResult res{bias_init, {}, {}, StopReason::MaxSteps, 0};
  if (cfg.max_steps == 0) return res;

  RngStream chain_rng = rng.split("chain");
  RngStream ref_rng = rng.split("reference");
  RngStream ksd_rng = rng.split("ksd");

  // Chain set-up at the initial potential: starting point and pilot tuning.
  BiasPotential& bias = res.bias;
  BiasedTarget target(problem, &bias);
  ChainState state = init_chain_state(target, problem.initial_point, res.budget);
  ProposalKind proposal;
  const double target_acc = cfg.sampler.tune.target_accept;
  if (cfg.sampler.kind == SamplerConfig::Kind::Pcn) {
    double beta = cfg.sampler.pcn_beta;
    if (cfg.sampler.tune.pilot_steps > 0)
      beta = tune_pcn_beta(target, state, cfg.sampler.tune, chain_rng, res.budget, beta);
    proposal = Pcn{beta};
  } else {
    std::vector<double> steps(problem.dim, cfg.sampler.initial_step);
    if (cfg.sampler.tune.pilot_steps > 0)
      steps = tune_step_sizes(target, state, cfg.sampler.tune, chain_rng, res.budget, steps);
    proposal = RandomWalk{steps};
  }

  const GridFunction p_ref_grid = tabulate(p_ref, cfg.grid);
  SgdmState opt;
  opt.momentum_weight = cfg.momentum_weight;
  const bool ksd_stop = cfg.stopping.kind == StoppingConfig::Kind::Ksd;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  for (std::size_t it = 1; it <= cfg.max_steps; ++it) {
    const ChainResult chain = mh_run(target, proposal, state, cfg.chain, chain_rng, res.budget);
    const std::span<const double> s = chain.kept_r;

    TrainRecord rec;
    rec.iteration = it;
    rec.acceptance = chain.acceptance_rate;
    rec.budget = res.budget.forward_evals;
    rec.p_hat = tail_probability(free_energy_from_bias(bias, p_ref, cfg.grid), query.threshold).value;

    const bool is_grid = std::holds_alternative<GridBias>(bias);
    std::optional<GridFunction> kde;
    if (is_grid || cfg.record_kl) {
      try {
        kde = kde_gaussian(s, cfg.grid);
      } catch (const EstimationError& e) {
        if (is_grid) throw TrainingError(std::string("density estimate failed: ") + e.what(), res.trace);
      }
    }
    rec.kl = (cfg.record_kl && kde) ? estimate_kl(p_ref, *kde) : nan;

    bool stop = false;
    rec.ksd = nan;
    if (ksd_stop || cfg.stopping.monitor_ksd) {
      const bool degenerate = sample_variance(s) < 1e-12;
      if (!all_in_support(s, p_ref)) {
        rec.ksd = std::numeric_limits<double>::infinity();
      } else if (!degenerate) {
        if (ksd_stop && it >= cfg.stopping.min_steps) {
          const KsdTestResult t = wild_bootstrap_test(s, p_ref, cfg.stopping.kernel, cfg.stopping.test, ksd_rng);
          rec.ksd = std::sqrt(std::max(0.0, t.statistic));
          stop = !t.reject;
        } else {
          rec.ksd = ksd_statistic(s, p_ref, cfg.stopping.kernel);
        }
      }
    }
    res.trace.push_back(rec);
    if (stop) {
      res.stop_reason = StopReason::KsdAccepted;
      break;
    }

    const double lr = cfg.schedule.at(opt.step);
    if (auto* rbf = std::get_if<RbfBias>(&bias)) {
      const std::vector<double> r = p_ref.sample(ref_rng, s.size());
      const std::vector<double> g = kl_gradient_rbf(*rbf, r, s);
      const std::vector<double> delta = sgdm_step(opt, g, lr);
      for (std::size_t j = 0; j < delta.size(); ++j) rbf->weights[j] += delta[j];
    } else {
      auto& gb = std::get<GridBias>(bias);
      const GridFunction dir = kl_gradient_grid(p_ref_grid, *kde);
      const std::vector<double> delta = sgdm_step(opt, dir.values(), lr);
      std::vector<double> v(gb.values.values().begin(), gb.values.values().end());
      for (std::size_t i = 0; i < v.size(); ++i) v[i] += delta[i];
      for (double x : v)
        if (!std::isfinite(x)) throw TrainingError("bias potential became non-finite", res.trace);
      gb.values = GridFunction(cfg.grid, std::move(v));
    }
    ++res.steps;
    if (!(bias_magnitude(bias) <= cfg.abort_magnitude))
      throw TrainingError("bias potential exceeded the divergence bound", res.trace);

    if (cfg.sampler.adapt_rate > 0.0) {
      const double f = std::exp(cfg.sampler.adapt_rate * (chain.acceptance_rate - target_acc));
      if (auto* rw = std::get_if<RandomWalk>(&proposal)) {
        for (double& h : rw->steps) h = std::max(cfg.sampler.tune.floor, h * f);
      } else {
        double& b = std::get<Pcn>(proposal).beta;
        b = std::clamp(b * f, 1e-4, 1.0);
      }
    }
  }
  return res;
}

void write_trace_csv(std::ostream& os, std::span<const TrainRecord> trace) {
  os << "iteration,kl,ksd,p_hat,budget,acceptance\n";
  char buf[192];
  for (const TrainRecord& r : trace) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%llu,%.17g\n", r.iteration, r.kl, r.ksd, r.p_hat,
                  static_cast<unsigned long long>(r.budget), r.acceptance);
    os << buf;
  }
}

}  // namespace rareebm
