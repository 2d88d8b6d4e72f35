#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "densities.hpp"
#include "ebm_train.hpp"
#include "problems.hpp"
#include "subset.hpp"

namespace rareebm::harness {

using Json = nlohmann::ordered_json;

struct ProblemConfig {
  enum class Kind { Contamination, FourBranch, LoadCapacity, NormalLine };
  Kind kind = Kind::Contamination;
  ContaminationSpec contamination;
  LoadCapacitySpec load_capacity;
};

struct RbfLayout {
  std::size_t count = 500;
  double lo = -80.0;
  double hi = 120.0;
  double kappa = 1.0;
};

struct EbmMethod {
  bool parametric = false;  // RBF when true, grid otherwise
  RbfLayout rbf;
  std::optional<ReferenceDensity> p_ref;
  TrainConfig train;
  bool group_measured_cells = false;  // tune measured and unmeasured cells separately
};

struct SubsetMethod {
  SubsetConfig config;
};

// Either a literal value or "oracle" (computed from the problem's closed form).
struct ReferenceSpec {
  std::optional<double> value;
  bool oracle = false;
};

struct ExperimentConfig {
  Json resolved;  // the full configuration after defaults were applied
  std::string name;
  ProblemConfig problem;
  double threshold = 0.0;
  std::vector<double> also_report;
  ReferenceSpec reference;
  std::vector<ReferenceSpec> also_report_reference;
  enum class Method { Ebm, Subset };
  Method method = Method::Ebm;
  EbmMethod ebm;
  SubsetMethod subset;
  std::size_t n_runs = 50;
  std::uint64_t base_seed = 1;
  unsigned jobs = 1;
  std::string out_dir;
  bool traces = false;
  Json published;  // printed values carried into the summary, free form
};

// Defaults for a problem kind ("contamination", "four_branch",
// "load_capacity", "normal_line") with the given method ("ebm" or "subset").
Json default_config(const std::string& problem_kind, const std::string& method = "ebm");

// Overlays `patch` on `base`. Objects merge key by key, except that an object
// whose "kind" differs from the base replaces it wholesale.
Json overlay(const Json& base, const Json& patch);

// Applies defaults, rejects unknown keys and builds the typed configuration.
ExperimentConfig parse_config(const Json& user);
ExperimentConfig load_config_file(const std::string& path);

}  // namespace rareebm::harness
