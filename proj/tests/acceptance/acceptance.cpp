// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "bias.hpp"
#include "densities.hpp"
#include "ebm_train.hpp"
#include "estimator.hpp"
#include "gchisq.hpp"
#include "harness/config.hpp"
#include "harness/experiment.hpp"
#include "harness/statistics.hpp"
#include "ksd.hpp"
#include "problems.hpp"

using namespace rareebm;
using namespace rareebm::harness;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  failures += !pass;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

ExperimentConfig shipped(const std::string& table, const std::string& file) {
  return load_config_file((fs::path(default_config_dir()) / table / file).string());
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

// ---------------------------------------------------------------------------

void synthetic_recovery() {
  const ExperimentConfig cfg = parse_config(Json::parse(R"({"problem": {"kind": "normal_line"}})"));
  const TrainConfig& tc = cfg.ebm.train;
  const auto problem = standard_normal_line_problem();
  const auto truth = ReferenceDensity::gaussian(0.0, 1.0);
  const double t = 1.959964;
  std::vector<double> tails;
  double worst_pdf = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    RngStream rng(seed);
    const BiasPotential v0 = GridBias{GridFunction::constant(tc.grid, 0.0)};
    const auto res = train_bias_potential(problem, RareEventQuery(t), *cfg.ebm.p_ref, v0, tc, rng);
    const auto est = free_energy_from_bias(res.bias, *cfg.ebm.p_ref, tc.grid);
    for (std::size_t i = 0; i < tc.grid.size(); ++i) {
      const double r = tc.grid.node(i);
      if (r < -3.0 - 1e-9 || r > 3.0 + 1e-9) continue;
      worst_pdf = std::max(worst_pdf, std::abs(est.density[i] - truth.pdf(r)));
    }
    tails.push_back(tail_probability(est, t).value);
  }
  const double m = mean_of(tails);
  const bool pass = worst_pdf <= 0.01 && std::abs(m - 0.025) <= 0.004;
  report(1, pass, fmt("max |p_R - pdf| on [-3,3] = %.4f (<= 0.01), mean tail = %.5f (0.025 +- 0.004), "
                      "tail range [%.5f, %.5f]",
                      worst_pdf, m, *std::min_element(tails.begin(), tails.end()),
                      *std::max_element(tails.begin(), tails.end())));
}

// ---------------------------------------------------------------------------

struct FourBranchOutcome {
  double ebm_cov_t2 = 0.0;
};

FourBranchOutcome four_branch() {
  const ExperimentConfig cfg = shipped("table2", "ebm_gumbel.json");
  const ExperimentResult r = run_experiment(cfg);
  const RunStatistics& s1 = *r.stats;
  const RunStatistics& s2 = *r.extra_stats.at(0);
  report(2, s1.mean >= 3.8e-3 && s1.mean <= 6.0e-3 && *s1.cov <= 0.55,
         fmt("mean T* = %.3e (in [3.8e-3, 6.0e-3]), COV = %.3f (<= 0.55), mean budget %.0f, %zu runs", s1.mean,
             *s1.cov, s1.budget_mean, s1.n));

  std::vector<double> ts{2.0};
  const auto mc = four_branch_tail_mc(ts, 100000000ULL, 20240101);
  const double ratio = s2.mean / mc[0].estimate;
  report(3, ratio >= 0.5 && ratio <= 2.0 && *s2.cov <= 0.9,
         fmt("mean T** = %.3e, crude MC (1e8) = %.3e +- %.1e, ratio %.2f (in [0.5, 2]), COV = %.3f (<= 0.9)",
             s2.mean, mc[0].estimate, mc[0].std_error, ratio, *s2.cov));
  return {*s2.cov};
}

void subset_baseline(double ebm_cov_t2) {
  ExperimentConfig cfg = shipped("table2", "subset.json");
  const ProblemInstance inst = build_problem(cfg.problem);
  const int batches = 10;
  int larger = 0;
  std::vector<double> t1_means, covs;
  double budget = 0.0;
  for (int b = 0; b < batches; ++b) {
    cfg.base_seed = 1 + 1000 * static_cast<std::uint64_t>(b);
    const ExperimentResult r = run_experiment(cfg);
    t1_means.push_back(r.stats->mean);
    covs.push_back(*r.extra_stats.at(0)->cov);
    larger += covs.back() > ebm_cov_t2;
    budget = r.stats->budget_mean;
  }
  const double first = t1_means.front();
  const double share = static_cast<double>(larger) / batches;
  report(4, first >= 3.5e-3 && first <= 6.5e-3 && share >= 0.6,
         fmt("mean T* = %.3e (in [3.5e-3, 6.5e-3]), budget %.0f; subset T** COV > EBM %.3f in %d/%d batches "
             "(>= 60%%), batch COVs %.2f..%.2f",
             first, budget, ebm_cov_t2, larger, batches, *std::min_element(covs.begin(), covs.end()),
             *std::max_element(covs.begin(), covs.end())));
}

// ---------------------------------------------------------------------------

void contamination() {
  const ExperimentConfig ksd_cfg = shipped("table1", "ebm_ksd.json");
  const ExperimentResult ksd = run_experiment(ksd_cfg);
  const RunStatistics& s = *ksd.stats;
  const double ref = *ksd.reference;
  const double rel = s.mean / ref - 1.0;
  report(5, std::abs(rel) <= 0.35 && *s.cov <= 0.55 && s.budget_mean >= 30000 && s.budget_mean <= 150000,
         fmt("oracle %.4e, mean %.4e (%+.1f%%, within 35%%), COV %.3f (<= 0.55), mean budget %.0f (in [30k, 150k])",
             ref, s.mean, 100.0 * rel, *s.cov, s.budget_mean));

  const ExperimentConfig fixed_cfg = shipped("table1", "ebm_fixed200.json");
  const ExperimentResult fixed = run_experiment(fixed_cfg);
  const RunStatistics& f = *fixed.stats;
  const double rmse_ratio = *s.rmse / *f.rmse;
  const double budget_ratio = s.budget_mean / f.budget_mean;
  report(6, rmse_ratio <= 1.15 && budget_ratio <= 0.5,
         fmt("RMSE KSD stop %.3e vs fixed 200 %.3e, ratio %.3f (<= 1.15); budget %.0f vs %.0f, ratio %.3f (<= 0.5)",
             *s.rmse, *f.rmse, rmse_ratio, s.budget_mean, f.budget_mean, budget_ratio));
}

// ---------------------------------------------------------------------------

void load_capacity() {
  {
    const ExperimentResult r = run_experiment(shipped("table3", "nc10_grid.json"));
    const RunStatistics& s = *r.stats;
    const double width = s.ci_high - s.ci_low;
    report(7, s.ci_low <= 6.8e-5 && 6.8e-5 <= s.ci_high && width <= 33e-5,
           fmt("95%% CI [%.3e, %.3e] contains 6.8e-5, width %.3e (<= 3.3e-4); mean %.3e, analytic %.3e, "
               "budget %.0f",
               s.ci_low, s.ci_high, width, s.mean, *r.reference, s.budget_mean));
  }
  {
    const ExperimentResult r = run_experiment(shipped("table3", "nc100_grid.json"));
    const RunStatistics& s = *r.stats;
    report(8, s.ci_low <= 2.1e-5 && 2.1e-5 <= s.ci_high,
           fmt("95%% CI [%.3e, %.3e] contains 2.1e-5; mean %.3e, analytic %.3e, budget %.0f", s.ci_low, s.ci_high,
               s.mean, *r.reference, s.budget_mean));
  }
}

// ---------------------------------------------------------------------------

void ksd_calibration() {
  const auto p = ReferenceDensity::gaussian(20.0, 7.0);
  KsdTestConfig test;
  test.alpha = 0.95;
  test.a_bs = 0.5;  // independent signs for iid samples
  test.n_boot = 1000;
  const SteinKernelConfig kernel;
  RngStream rng(77);
  const int trials = 500;
  int rejected = 0;
  for (int i = 0; i < trials; ++i) {
    RngStream tr = rng.split(static_cast<std::uint64_t>(i));
    const auto s = p.sample(tr, 125);
    rejected += wild_bootstrap_test(s, p, kernel, test, tr).reject;
  }
  const double rate = static_cast<double>(rejected) / trials;

  double worst = 0.0;
  SteinKernelConfig se;
  se.base = SquaredExponential{5.0};
  se.median_heuristic = false;
  for (const auto& d : {p, ReferenceDensity::gev(2.0, 3.0, 0.0), ReferenceDensity::gev(0.0, 7.0, 0.0)}) {
    const double lo = d.quantile(1e-14), hi = d.quantile(1.0 - 1e-14);
    const int n = 200000;
    const double h = (hi - lo) / n;
    for (double s : {d.quantile(0.1), d.quantile(0.5), d.quantile(0.99)}) {
      double acc = 0.0;
      for (int i = 0; i <= n; ++i) {
        const double x = lo + i * h;
        acc += (i == 0 || i == n ? 0.5 : 1.0) * d.pdf(x) * stein_kernel(x, s, d, se);
      }
      worst = std::max(worst, std::abs(acc * h));
    }
  }
  report(9, rate >= 0.025 && rate <= 0.10 && worst <= 1e-3,
         fmt("rejection rate %.3f over %d trials (in [0.025, 0.10]); max |E_p k_p(., s)| = %.2e (<= 1e-3)", rate,
             trials, worst));
}

// ---------------------------------------------------------------------------

bool sgdm_algebra() {
  SgdmState a;
  a.momentum_weight = 0.0;
  std::vector<double> g{0.7, -1.2};
  auto d = sgdm_step(a, g, 1.0);
  bool ok = d[0] == -0.7 && d[1] == 1.2;
  SgdmState b;
  b.momentum_weight = 0.5;
  std::vector<double> two{2.0};
  ok = ok && sgdm_step(b, two, 1.0)[0] == -1.0;
  SgdmState c;
  c.momentum_weight = 0.5;
  for (int n = 1; n <= 20; ++n) {
    sgdm_step(c, two, 1.0);
    ok = ok && std::abs((2.0 - c.momentum[0]) - 2.0 * std::pow(0.5, n)) < 1e-12;
  }
  return ok;
}

double gauge_gap() {
  const auto p_ref = ReferenceDensity::gaussian(20.0, 7.0);
  GridDomain g(-80.0, 120.0, 0.1);
  std::vector<double> v;
  for (double r : g.nodes()) v.push_back(std::sin(0.1 * r) * 5.0 + 0.01 * r * r);
  const BiasPotential bias = GridBias{GridFunction(g, v)};
  RbfBias rbf = RbfBias::equispaced(50, -80.0, 120.0, 0.2);
  for (std::size_t j = 0; j < 50; ++j) rbf.weights[j] = std::cos(0.4 * j);
  double worst = 0.0;
  for (const BiasPotential& b : {bias, BiasPotential{rbf}}) {
    const double base = tail_probability(free_energy_from_bias(b, p_ref, g), 20.0).value;
    for (double c : {-100.0, 7.5, 300.0}) {
      const double shifted = tail_probability(free_energy_from_bias(bias_shift(b, c), p_ref, g), 20.0).value;
      worst = std::max(worst, std::abs(shifted / base - 1.0));
    }
  }
  return worst;
}

double gradient_vs_quadrature() {
  RbfBias v = RbfBias::equispaced(5, -2.0, 2.0, 0.5);
  v.weights = {0.2, 1.0, 0.4, 0.0, 0.8};
  const auto p_ref = ReferenceDensity::gaussian(2.0, 1.0);
  const std::size_t n = 100000;
  RngStream rng(31);
  const auto ref = p_ref.sample(rng, n);
  std::vector<double> biased;
  while (biased.size() < n) {
    const double x = rng.normal();
    if (rng.uniform() < std::exp(-bias_eval(v, x))) biased.push_back(x);
  }
  const auto g = kl_gradient_rbf(v, ref, biased);
  const double lo = -12.0, h = 1e-3;
  const int m = 24000;
  std::vector<double> eref(5, 0.0), ev(5, 0.0);
  double z = 0.0;
  for (int i = 0; i <= m; ++i) {
    const double x = lo + i * h, w = (i == 0 || i == m) ? 0.5 : 1.0;
    const double pv = std::exp(-0.5 * x * x - bias_eval(v, x));
    z += w * pv;
    const auto phi = bias_weight_gradient(v, x);
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
  return std::sqrt(num / den);
}

double conjugate_gap() {
  double worst = 0.0;
  const auto c = contamination_problem(ContaminationSpec{});
  const double pv = 0.09, nv = 0.0025, post = 1.0 / (1.0 / pv + 1.0 / nv);
  for (int i = 0; i < 9; ++i) {
    const auto it = std::find(c.spec.measured_cells.begin(), c.spec.measured_cells.end(), i);
    double mean = 1.0, var = pv;
    if (it != c.spec.measured_cells.end()) {
      var = post;
      mean = post * (1.0 / pv + c.data[it - c.spec.measured_cells.begin()] / nv);
    }
    worst = std::max({worst, std::abs(c.posterior.mean(i) - mean), std::abs(c.posterior.cov(i, i) - var)});
  }
  for (int nc : {10, 100}) {
    LoadCapacitySpec spec;
    spec.n_components = nc;
    const auto lc = load_capacity_problem(spec);
    const double v = std::log(1.0 + 1.0 / 36.0);
    const double prior_var = v / nc, prior_mean = (std::log(12.0) - 0.5 * v) / nc;
    const double var = 1.0 / (1.0 / prior_var + 1.0 / nv);
    const double mean = var * (prior_mean / prior_var + std::log(8.0) / nc / nv);
    worst = std::max({worst, std::abs(lc.posterior_component_log_var - var),
                      std::abs(lc.posterior_component_log_mean - mean)});
  }
  return worst;
}

double gchisq_vs_mc() {
  Eigen::VectorXd m(3);
  m << 0.5, -0.2, 1.0;
  Eigen::MatrixXd a(3, 3);
  a << 1.0, 0.3, -0.2, 0.3, 0.5, 0.1, -0.2, 0.1, 0.2;
  const Eigen::MatrixXd c = a * a.transpose() + 0.05 * Eigen::MatrixXd::Identity(3, 3);
  const double t = 6.0;
  const double p = gaussian_quadratic_tail(m, c, t);
  const Eigen::MatrixXd l = c.llt().matrixL();
  RngStream rng(2025);
  const std::size_t n = 10000000;
  std::size_t hits = 0;
  Eigen::VectorXd z(3);
  for (std::size_t i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) z(j) = rng.normal();
    hits += (m + l * z).squaredNorm() >= t;
  }
  const double mc = static_cast<double>(hits) / n;
  return std::abs(p - mc) / std::sqrt(mc * (1.0 - mc) / n);
}

double kl_mle_gap() {
  RbfBias v = RbfBias::equispaced(500, -80.0, 120.0, 1.0);
  for (std::size_t j = 0; j < v.weights.size(); ++j) v.weights[j] = std::sin(0.05 * j);
  RngStream rng(4);
  const auto r = ReferenceDensity::gaussian(20.0, 7.0).sample(rng, 125);
  const auto s = ReferenceDensity::gaussian(8.0, 3.0).sample(rng, 125);
  const auto a = kl_gradient_rbf(v, r, s);
  const auto b = mle_gradient_rbf(v, r, s);
  double worst = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) worst = std::max(worst, std::abs(a[j] - b[j]));
  return worst;
}

void unit_invariants() {
  const bool sgdm = sgdm_algebra();
  const double gauge = gauge_gap();
  const double grad = gradient_vs_quadrature();
  const double conj = conjugate_gap();
  const double gcs = gchisq_vs_mc();
  const double klmle = kl_mle_gap();
  const bool pass = sgdm && gauge <= 1e-12 && grad <= 0.01 && conj <= 1e-10 && gcs <= 3.0 && klmle <= 1e-12;
  report(10, pass,
         fmt("SGDM %s; gauge rel. gap %.1e; sampled gradient rel. error %.2e (<= 1e-2); conjugate gap %.1e "
             "(<= 1e-10); gen. chi-square vs MC %.2f sd (<= 3); KL-MLE gap %.1e (<= 1e-12)",
             sgdm ? "ok" : "wrong", gauge, grad, conj, gcs, klmle));
}

template <class F>
void timed(const char* what, F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  try {
    f();
  } catch (const std::exception& e) {
    std::printf("%s aborted: %s\n", what, e.what());
    ++failures;
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("  (%s: %.1f s)\n", what, s);
}

}  // namespace

int main() {
  timed("synthetic recovery", synthetic_recovery);
  FourBranchOutcome fb;
  timed("four-branch EBM", [&] { fb = four_branch(); });
  timed("four-branch subset", [&] { subset_baseline(fb.ebm_cov_t2); });
  timed("contamination", contamination);
  timed("load capacity", load_capacity);
  timed("KSD calibration", ksd_calibration);
  timed("unit invariants", unit_invariants);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
