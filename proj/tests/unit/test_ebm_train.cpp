#include <cmath>
#include <sstream>
#include <vector>

#include "bias.hpp"
#include "densities.hpp"
#include "doctest.h"
#include "ebm_train.hpp"
#include "estimator.hpp"
#include "problems.hpp"

using namespace rareebm;

TEST_CASE("SGDM algebra") {
  SUBCASE("zero momentum is plain gradient descent") {
    SgdmState s;
    s.momentum_weight = 0.0;
    std::vector<double> g{0.5, -2.0};
    auto d = sgdm_step(s, g, 1.0);
    CHECK(d[0] == doctest::Approx(-0.5));
    CHECK(d[1] == doctest::Approx(2.0));
    CHECK(s.step == 1);
  }
  SUBCASE("first step with beta = 0.5") {
    SgdmState s;
    s.momentum_weight = 0.5;
    std::vector<double> g{2.0};
    auto d = sgdm_step(s, g, 1.0);
    CHECK(s.momentum[0] == doctest::Approx(1.0));
    CHECK(d[0] == doctest::Approx(-1.0));
  }
  SUBCASE("constant gradient: the momentum error halves every step") {
    SgdmState s;
    s.momentum_weight = 0.5;
    std::vector<double> g{3.0};
    for (int n = 1; n <= 10; ++n) {
      sgdm_step(s, g, 0.1);
      CHECK(3.0 - s.momentum[0] == doctest::Approx(3.0 * std::pow(0.5, n)).epsilon(1e-12));
    }
  }
  SUBCASE("invalid input") {
    SgdmState s;
    std::vector<double> bad{std::nan("")};
    CHECK_THROWS_AS(sgdm_step(s, bad, 1.0), NumericError);
    SgdmState t;
    std::vector<double> one{1.0}, two{1.0, 2.0};
    sgdm_step(t, one, 1.0);
    CHECK_THROWS_AS(sgdm_step(t, two, 1.0), ConfigError);
  }
}

TEST_CASE("learning-rate schedules") {
  CHECK(LrSchedule::constant(15.0).at(100) == 15.0);
  CHECK(LrSchedule::exp_decay(19.0, -0.005).at(10) == doctest::Approx(19.0 * std::exp(-0.05)));
  CHECK_THROWS_AS(LrSchedule::exp_decay(1.0, 0.1).validate(), ConfigError);
  CHECK_THROWS_AS(LrSchedule::constant(-1.0).validate(), ConfigError);
}

TEST_CASE("KL and MLE gradients coincide") {
  RbfBias v = RbfBias::equispaced(40, -5.0, 5.0, 1.0);
  for (std::size_t j = 0; j < v.weights.size(); ++j) v.weights[j] = std::cos(0.3 * j);
  RngStream rng(17);
  auto r = ReferenceDensity::gaussian(0.5, 1.5).sample(rng, 500);
  auto s = ReferenceDensity::gaussian(-0.2, 1.0).sample(rng, 350);
  auto a = kl_gradient_rbf(v, r, s);
  auto b = mle_gradient_rbf(v, r, s);
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) worst = std::max(worst, std::abs(a[j] - b[j]));
  CHECK(worst <= 1e-12);
}

TEST_CASE("sampled RBF gradient agrees with quadrature") {
  // p_R = N(0,1), V >= 0 so that p_V is reachable by rejection from p_R.
  RbfBias v = RbfBias::equispaced(5, -2.0, 2.0, 0.5);
  v.weights = {0.2, 1.0, 0.4, 0.0, 0.8};
  const auto p_ref = ReferenceDensity::gaussian(2.0, 1.0);
  const std::size_t n = 100000;
  RngStream rng(99);
  auto ref = p_ref.sample(rng, n);
  std::vector<double> biased;
  while (biased.size() < n) {
    const double x = rng.normal();
    if (rng.uniform() < std::exp(-bias_eval(v, x))) biased.push_back(x);
  }
  auto g = kl_gradient_rbf(v, ref, biased);

  const double lo = -12.0, h = 1e-3;
  const int m = 24000;
  std::vector<double> eref(5, 0.0), ev(5, 0.0);
  double z = 0.0;
  for (int i = 0; i <= m; ++i) {
    const double x = lo + i * h, w = (i == 0 || i == m) ? 0.5 : 1.0;
    const double pv = std::exp(-0.5 * x * x - bias_eval(v, x));
    z += w * pv;
    auto phi = bias_weight_gradient(v, x);
    for (int j = 0; j < 5; ++j) {
      eref[j] += w * p_ref.pdf(x) * phi[j] * h;
      ev[j] += w * pv * phi[j];
    }
  }
  double num = 0.0, den = 0.0;
  for (int j = 0; j < 5; ++j) {
    const double q = eref[j] - ev[j] / z;
    num += (g[j] - q) * (g[j] - q);
    den += q * q;
  }
  CHECK(std::sqrt(num / den) <= 0.01);
}

TEST_CASE("grid direction and KL diagnostic") {
  GridDomain g(-8.0, 8.0, 0.01);
  const auto p = ReferenceDensity::gaussian(0.0, 1.0);
  const auto pr = tabulate(p, g);
  auto d = kl_gradient_grid(pr, GridFunction::constant(g, 0.0));
  CHECK(d[g.nearest(0.0)] == doctest::Approx(p.pdf(0.0)));
  // Where p_V exceeds p_ref the direction is negative, so V grows there.
  std::vector<double> peaked;
  for (double r : g.nodes()) peaked.push_back(ReferenceDensity::gaussian(0.0, 0.5).pdf(r));
  GridFunction pv(g, peaked);
  auto d2 = kl_gradient_grid(pr, pv);
  CHECK(d2[g.nearest(0.0)] < 0.0);
  GridBias updated = bias_update_grid(GridBias{GridFunction::constant(g, 0.0)}, d2, 1.0);
  CHECK(updated.values[g.nearest(0.0)] > 0.0);

  CHECK(estimate_kl(p, pr) == doctest::Approx(0.0).epsilon(1e-6));
  // KL(N(0,1) || N(0, 0.8^2)) = log 0.8 + (1 / 0.64 - 1) / 2.
  std::vector<double> wide;
  for (double r : g.nodes()) wide.push_back(ReferenceDensity::gaussian(0.0, 0.8).pdf(r));
  CHECK(estimate_kl(p, GridFunction(g, wide)) == doctest::Approx(std::log(0.8) + 0.28125).epsilon(1e-4));
}

namespace {

TrainConfig line_config() {
  TrainConfig c;
  c.grid = GridDomain(-8.0, 8.0, 0.05);
  c.max_steps = 40;
  c.chain.burn_in = 20;
  c.chain.thin = 3;
  c.chain.n_keep = 200;
  c.sampler.initial_step = 2.4;
  c.sampler.tune.pilot_steps = 0;
  c.schedule = LrSchedule::constant(2.0);
  c.stopping.monitor_ksd = true;
  return c;
}

}  // namespace

TEST_CASE("training on the normal line") {
  const auto p = standard_normal_line_problem();
  const auto p_ref = ReferenceDensity::gaussian(0.0, 2.0);
  auto cfg = line_config();
  const BiasPotential v0 = GridBias{GridFunction::constant(cfg.grid, 0.0)};
  RngStream rng(5);
  auto res = train_bias_potential(p, RareEventQuery(1.959964), p_ref, v0, cfg, rng);
  CHECK(res.steps == 40);
  CHECK(res.trace.size() == 40);
  CHECK(res.budget.forward_evals == 1 + 40 * (20 + 3 * 200));
  CHECK(res.trace.back().budget == res.budget.forward_evals);
  CHECK(res.trace.front().p_hat == doctest::Approx(1.0 - p_ref.cdf(1.959964)).epsilon(1e-3));
  const double p_hat = tail_probability(free_energy_from_bias(res.bias, p_ref, cfg.grid), 1.959964).value;
  CHECK(p_hat == doctest::Approx(0.025).epsilon(0.4));

  std::ostringstream os;
  write_trace_csv(os, res.trace);
  CHECK(os.str().rfind("iteration,kl,ksd,p_hat,budget,acceptance\n", 0) == 0);

  RngStream again(5);
  auto res2 = train_bias_potential(p, RareEventQuery(1.959964), p_ref, v0, cfg, again);
  CHECK(std::get<GridBias>(res2.bias).values[10] == std::get<GridBias>(res.bias).values[10]);
}

TEST_CASE("KSD stopping returns the potential that produced the accepted samples") {
  const auto p = standard_normal_line_problem();
  // p_ref equal to the target: the very first admissible test accepts.
  const auto p_ref = ReferenceDensity::gaussian(0.0, 1.0);
  auto cfg = line_config();
  cfg.stopping.kind = StoppingConfig::Kind::Ksd;
  cfg.stopping.test.a_bs = 0.2;
  cfg.stopping.min_steps = 3;
  const BiasPotential v0 = GridBias{GridFunction::constant(cfg.grid, 0.0)};
  RngStream rng(8);
  auto res = train_bias_potential(p, RareEventQuery(1.0), p_ref, v0, cfg, rng);
  CHECK(res.stop_reason == StopReason::KsdAccepted);
  CHECK(res.trace.size() == res.steps + 1);
  CHECK(res.trace.size() <= 10);
}

TEST_CASE("RBF training moves towards the target") {
  const auto p = standard_normal_line_problem();
  const auto p_ref = ReferenceDensity::gaussian(0.0, 2.0);
  auto cfg = line_config();
  cfg.max_steps = 150;
  cfg.schedule = LrSchedule::constant(1.0);
  cfg.record_kl = false;
  cfg.stopping.monitor_ksd = false;
  const BiasPotential v0 = RbfBias::equispaced(40, -8.0, 8.0, 1.0);
  RngStream rng(2);
  auto res = train_bias_potential(p, RareEventQuery(1.959964), p_ref, v0, cfg, rng);
  const double p_hat = tail_probability(free_energy_from_bias(res.bias, p_ref, cfg.grid), 1.959964).value;
  CHECK(p_hat < 0.08);
  CHECK(p_hat > 0.005);
  CHECK(std::isnan(res.trace.back().kl));
}

TEST_CASE("training configuration errors") {
  const auto p = standard_normal_line_problem();
  const auto p_ref = ReferenceDensity::gaussian(0.0, 2.0);
  auto cfg = line_config();
  const BiasPotential v0 = GridBias{GridFunction::constant(cfg.grid, 0.0)};
  RngStream rng(1);
  CHECK_THROWS_AS(train_bias_potential(p, RareEventQuery(9.0), p_ref, v0, cfg, rng), ConfigError);
  const BiasPotential wrong = GridBias{GridFunction::constant(GridDomain(-4.0, 4.0, 0.05), 0.0)};
  CHECK_THROWS_AS(train_bias_potential(p, RareEventQuery(1.0), p_ref, wrong, cfg, rng), ConfigError);
  cfg.chain.n_keep = 1;
  CHECK_THROWS_AS(train_bias_potential(p, RareEventQuery(1.0), p_ref, v0, cfg, rng), ConfigError);
  cfg = line_config();
  cfg.momentum_weight = 1.0;
  CHECK_THROWS_AS(train_bias_potential(p, RareEventQuery(1.0), p_ref, v0, cfg, rng), ConfigError);
}

TEST_CASE("divergence raises a training error with the partial trace") {
  const auto p = standard_normal_line_problem();
  const auto p_ref = ReferenceDensity::gaussian(0.0, 2.0);
  auto cfg = line_config();
  cfg.schedule = LrSchedule::constant(1e9);
  cfg.abort_magnitude = 1e3;
  const BiasPotential v0 = GridBias{GridFunction::constant(cfg.grid, 0.0)};
  RngStream rng(1);
  try {
    train_bias_potential(p, RareEventQuery(1.0), p_ref, v0, cfg, rng);
    FAIL("expected a training error");
  } catch (const TrainingError& e) {
    CHECK(e.trace().size() >= 1);
  }
}
