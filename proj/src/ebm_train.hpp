#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bias.hpp"
#include "densities.hpp"
#include "errors.hpp"
#include "estimator.hpp"
#include "ksd.hpp"
#include "mcmc.hpp"
#include "problems.hpp"

namespace rareebm {

struct LrSchedule {
  enum class Kind { Constant, ExpDecay };
  Kind kind = Kind::Constant;
  double gamma0 = 1.0;
  double factor = 0.0;  // ExpDecay only, < 0

  static LrSchedule constant(double gamma) { return {Kind::Constant, gamma, 0.0}; }
  static LrSchedule exp_decay(double gamma0, double factor) { return {Kind::ExpDecay, gamma0, factor}; }

  double at(std::size_t n) const;
  void validate() const;
};

struct SgdmState {
  std::vector<double> momentum;
  std::size_t step = 0;
  double momentum_weight = 0.5;
};

// m = beta m + (1 - beta) grad; returns the parameter increment -lr * m.
std::vector<double> sgdm_step(SgdmState& state, std::span<const double> grad, double lr);

// mean_i dV/dw(r_i) - mean_i dV/dw(s_i) with r_i ~ p_ref and s_i ~ p_V.
std::vector<double> kl_gradient_rbf(const RbfBias& v, std::span<const double> ref_samples,
                                    std::span<const double> biased_samples);

// The same quantity assembled as the negative gradient of the average
// log-likelihood (1/n) sum log p_V(r_i), with the gradient of the log
// normaliser replaced by its sample average over s_i.
std::vector<double> mle_gradient_rbf(const RbfBias& v, std::span<const double> ref_samples,
                                     std::span<const double> biased_samples);

// Nodewise p_ref - p_V.
GridFunction kl_gradient_grid(const GridFunction& p_ref, const GridFunction& p_v);

// Tabulates p_ref on the nodes of a grid.
GridFunction tabulate(const ReferenceDensity& p_ref, const GridDomain& grid);

// Trapezoid integral of p_ref log(p_ref / p_V); p_V is clamped below at 1e-12.
double estimate_kl(const ReferenceDensity& p_ref, const GridFunction& p_v);

struct SamplerConfig {
  enum class Kind { RandomWalk, Pcn };
  Kind kind = Kind::RandomWalk;
  TuneConfig tune;            // pilot_steps == 0 skips the pilot run
  double initial_step = 0.5;  // random walk, before tuning
  double pcn_beta = 0.3;      // before tuning
  // After every iteration the proposal scale is multiplied by
  // exp(adapt_rate (acc - target_accept)); 0 disables.
  double adapt_rate = 0.0;
};

struct StoppingConfig {
  enum class Kind { None, Ksd };
  Kind kind = Kind::None;
  KsdTestConfig test;
  SteinKernelConfig kernel;
  std::size_t min_steps = 5;
  bool monitor_ksd = true;  // record KSD values even without the stopping rule
};

struct TrainConfig {
  std::size_t max_steps = 200;
  ChainConfig chain;  // n_keep is the gradient sample size n
  SamplerConfig sampler;
  LrSchedule schedule;
  double momentum_weight = 0.5;
  StoppingConfig stopping;
  GridDomain grid{-10.0, 10.0, 0.1};  // working grid for KDE, F and p_R
  bool record_kl = true;
  double abort_magnitude = 1e6;

  void validate() const;
};

struct TrainRecord {
  std::size_t iteration = 0;
  double kl = 0.0;       // NaN when not recorded
  double ksd = 0.0;      // NaN when not computed, +inf when samples leave the p_ref support
  double p_hat = 0.0;    // estimate from the potential used to draw this iteration's samples
  std::uint64_t budget = 0;
  double acceptance = 0.0;
};

enum class StopReason { MaxSteps, KsdAccepted };
std::string to_string(StopReason r);

struct TrainResult {
  BiasPotential bias;
  std::vector<TrainRecord> trace;
  Budget budget;
  StopReason stop_reason = StopReason::MaxSteps;
  std::size_t steps = 0;  // SGDM updates applied
};

// Raised when the potential diverges; keeps the trace up to the failure.
class TrainingError : public NumericError {
 public:
  TrainingError(const std::string& what, std::vector<TrainRecord> trace)
      : NumericError(what), trace_(std::move(trace)) {}
  const std::vector<TrainRecord>& trace() const { return trace_; }

 private:
  std::vector<TrainRecord> trace_;
};

TrainResult train_bias_potential(const TargetProblem& problem, const RareEventQuery& query,
                                 const ReferenceDensity& p_ref, const BiasPotential& bias_init,
                                 const TrainConfig& cfg, RngStream& rng);

// Columns iteration,kl,ksd,p_hat,budget,acceptance.
void write_trace_csv(std::ostream& os, std::span<const TrainRecord> trace);

}  // namespace rareebm
