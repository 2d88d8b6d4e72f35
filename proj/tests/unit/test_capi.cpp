#include <cmath>
#include <cstring>
#include <string>

#include "doctest.h"
#include "rareebm.h"

namespace {

const char* kLine = R"({"problem": {"kind": "normal_line"},
  "method": {"ebm": {"max_steps": 10, "n_samples": 100}}, "runs": {"n_runs": 2}})";

std::string take(char* s) {
  std::string out = s ? s : "";
  rareebm_string_free(s);
  return out;
}

}  // namespace

TEST_CASE("experiment lifecycle") {
  rareebm_experiment* e = nullptr;
  REQUIRE(rareebm_experiment_from_json(kLine, &e) == RAREEBM_OK);
  CHECK(rareebm_experiment_set_seed(e, 7) == RAREEBM_OK);
  CHECK(rareebm_experiment_set_runs(e, 3) == RAREEBM_OK);
  CHECK(rareebm_experiment_set_jobs(e, 1) == RAREEBM_OK);
  char* cfg = nullptr;
  REQUIRE(rareebm_experiment_config_json(e, &cfg) == RAREEBM_OK);
  const std::string text = take(cfg);
  CHECK(text.find("\"base_seed\": 7") != std::string::npos);

  rareebm_result* r = nullptr;
  REQUIRE(rareebm_experiment_run(e, &r) == RAREEBM_OK);
  size_t n = 0;
  CHECK(rareebm_result_run_count(r, &n) == RAREEBM_OK);
  CHECK(n == 3);
  double p = 0.0;
  uint64_t budget = 0;
  int ok = 0;
  CHECK(rareebm_result_run(r, 0, &p, &budget, &ok) == RAREEBM_OK);
  CHECK(ok == 1);
  CHECK(p > 0.0);
  CHECK(budget > 0);
  CHECK(rareebm_result_run(r, 5, &p, &budget, &ok) == RAREEBM_ERR_ARGUMENT);
  char* csv = nullptr;
  CHECK(rareebm_result_trace_csv(r, 0, &csv) == RAREEBM_OK);
  CHECK(take(csv).rfind("iteration,", 0) == 0);
  char* summary = nullptr;
  CHECK(rareebm_result_summary_json(r, &summary) == RAREEBM_OK);
  CHECK(take(summary).find("statistics") != std::string::npos);
  rareebm_result_free(r);
  rareebm_experiment_free(e);
}

TEST_CASE("error codes") {
  rareebm_experiment* e = nullptr;
  CHECK(rareebm_experiment_from_json("{not json", &e) == RAREEBM_ERR_CONFIG);
  CHECK(e == nullptr);
  CHECK(std::strlen(rareebm_last_error()) > 0);
  CHECK(rareebm_experiment_from_json(R"({"problem": {"kind": "x"}})", &e) == RAREEBM_ERR_CONFIG);
  CHECK(std::string(rareebm_last_error()).find("x") != std::string::npos);
  CHECK(rareebm_experiment_from_json(nullptr, &e) == RAREEBM_ERR_ARGUMENT);
  CHECK(rareebm_experiment_from_file("/nonexistent/file.json", &e) != RAREEBM_OK);
  CHECK(rareebm_experiment_set_seed(nullptr, 1) == RAREEBM_ERR_ARGUMENT);
  CHECK(rareebm_oracle_json("nothing", nullptr, nullptr) == RAREEBM_ERR_ARGUMENT);
  char* out = nullptr;
  CHECK(rareebm_oracle_json("nothing", nullptr, &out) == RAREEBM_ERR_CONFIG);
}

TEST_CASE("densities through the C interface") {
  rareebm_density* d = nullptr;
  REQUIRE(rareebm_density_gaussian(0.0, 1.0, &d) == RAREEBM_OK);
  double v = 0.0;
  CHECK(rareebm_density_pdf(d, 0.0, &v) == RAREEBM_OK);
  CHECK(v == doctest::Approx(1.0 / std::sqrt(2.0 * M_PI)));
  CHECK(rareebm_density_score(d, 1.5, &v) == RAREEBM_OK);
  CHECK(v == doctest::Approx(-1.5));
  rareebm_density_free(d);

  CHECK(rareebm_density_gaussian(0.0, -1.0, &d) == RAREEBM_ERR_CONFIG);
  REQUIRE(rareebm_density_gev(2.0, 2.0, 0.33, &d) == RAREEBM_OK);
  CHECK(rareebm_density_score(d, -10.0, &v) == RAREEBM_ERR_NUMERIC);
  rareebm_density_free(d);

  CHECK(rareebm_four_branch(0.0, 0.0) == doctest::Approx(3.0));
  CHECK(std::string(rareebm_version()).size() > 0);
}

TEST_CASE("oracle json") {
  char* out = nullptr;
  REQUIRE(rareebm_oracle_json("load_capacity", R"({"n_components": [10]})", &out) == RAREEBM_OK);
  CHECK(take(out).find("probability") != std::string::npos);
}
