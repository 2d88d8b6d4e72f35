#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "bias.hpp"
#include "problems.hpp"
#include "rng.hpp"

namespace rareebm {

// Forward-evaluation counter: one unit per (qoi, likelihood) evaluation at a
// fresh parameter value.
struct Budget {
  std::uint64_t forward_evals = 0;
};

// Cached evaluation of one parameter value.
struct ChainState {
  std::vector<double> theta;
  std::vector<double> u;  // standard-normal coordinates; filled when the problem has a map
  double log_prior = 0.0;
  double log_lik = 0.0;
  double r = 0.0;
};

// exp(log_prior + log_lik - V(qoi)) restricted to {qoi >= r_floor}. Holds
// non-owning pointers; the problem and bias must outlive the target.
class BiasedTarget {
 public:
  explicit BiasedTarget(const TargetProblem& problem, const BiasPotential* bias = nullptr,
                        double r_floor = -std::numeric_limits<double>::infinity());

  const TargetProblem& problem() const { return *problem_; }
  double r_floor() const { return r_floor_; }
  double bias_at(double r) const { return bias_ ? bias_eval(*bias_, r) : 0.0; }

  // Evaluates a parameter value. Does not touch the budget.
  ChainState evaluate(std::span<const double> theta) const;
  ChainState evaluate_standard(std::span<const double> u) const;

  bool admissible(const ChainState& s) const;
  // Full log density in theta space, -inf when inadmissible.
  double log_density(const ChainState& s) const;
  // The part of the log density that pCN sees (prior excluded).
  double log_density_pcn(const ChainState& s) const;

 private:
  const TargetProblem* problem_;
  const BiasPotential* bias_;
  double r_floor_;
};

// Evaluates the starting point and charges one unit of budget.
ChainState init_chain_state(const BiasedTarget& target, std::span<const double> theta, Budget& budget);

struct RandomWalk {
  std::vector<double> steps;  // per-coordinate Gaussian proposal sd
};
struct Pcn {
  double beta = 0.3;
};
using ProposalKind = std::variant<RandomWalk, Pcn>;

struct ChainConfig {
  std::size_t burn_in = 0;
  std::size_t thin = 1;
  std::size_t n_keep = 1;
  bool keep_theta = false;
  std::ostream* trace = nullptr;  // CSV rows step,r,accepted when set
};

struct ChainResult {
  std::vector<double> kept_r;
  std::vector<double> kept_theta;  // n_keep x dim, row major, when keep_theta
  std::size_t proposals = 0;       // after burn-in
  std::size_t accepted = 0;        // after burn-in
  std::size_t burn_in_accepted = 0;
  double acceptance_rate = 0.0;
};

// Advances `state` by burn_in + thin * n_keep proposals; every proposal costs
// one unit of budget. The acceptance rate covers post-burn-in proposals.
ChainResult mh_run(const BiasedTarget& target, const ProposalKind& proposal, ChainState& state,
                   const ChainConfig& cfg, RngStream& rng, Budget& budget);

struct TuneConfig {
  double target_accept = 0.30;
  std::size_t pilot_steps = 200;
  std::size_t batch = 25;
  // Coordinates tuned together; empty means one group holding every coordinate.
  std::vector<std::vector<std::size_t>> groups;
  double initial_step = 0.5;
  double floor = 1e-12;
};

// Per-group stochastic approximation of random-walk step sizes: each pilot
// batch proposes moves in one group only and rescales that group's steps by
// exp(eta (acc - target)), eta = 1/sqrt(batch index). A second phase applies
// the same recursion to a common factor for joint moves. Consumes
// pilot_steps proposals in total (advancing `state`).
std::vector<double> tune_step_sizes(const BiasedTarget& target, ChainState& state, const TuneConfig& cfg,
                                    RngStream& rng, Budget& budget,
                                    std::optional<std::vector<double>> start = std::nullopt);

// Same recursion for the pCN parameter, clamped to [1e-4, 1].
double tune_pcn_beta(const BiasedTarget& target, ChainState& state, const TuneConfig& cfg, RngStream& rng,
                     Budget& budget, double start = 0.3);

// Pearson correlation of consecutive pairs; empty for fewer than 3 values or
// zero variance.
std::optional<double> lag1_correlation(std::span<const double> r);

}  // namespace rareebm
