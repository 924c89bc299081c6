#pragma once

// Operator harness: run configuration, subcommands and the oracle suites
// exposed as a user-visible check.

#include "rcppo/algo.hpp"
#include "rcppo/baselines.hpp"

#include "json.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace rcppo::cli {

using Json = nlohmann::ordered_json;

/// Raised for configuration and schema violations; the message names the field.
class ConfigError : public ContractError {
 public:
  using ContractError::ContractError;
};

struct EnvironmentConfig {
  std::string id = "pendulum";  ///< pendulum | windfield | grid
  envkit::PendulumParams pendulum{};
  envkit::WindFieldParams windfield{};
  // grid fixture
  int grid_width = 5, grid_height = 5;
  std::vector<envkit::GridCell> grid_hazards{{1, 1}, {2, 2}, {3, 3}};
  envkit::GridCell grid_goal{4, 4};
  double grid_step_cost = 1.0;
  envkit::NoiseWrapperConfig noise{};
};

struct EvaluationConfig {
  int episodes = 256;
  std::uint64_t seed = 1234;
  std::string z_source = "bisection";  ///< bisection | regressor | fixed
  double fixed_z = 0.0;
  double tol = 1e-2;                   ///< bisection tolerance and budget-soundness slack
  int trajectories = 0;                ///< number of episodes exported as trajectory CSV
};

struct GridSearchSettings {
  bool full_grid = false;
  std::vector<double> r_goal{2.0, 200.0, 20000.0};
  std::vector<double> p_goal{1.0, 100.0, 10000.0};
  std::vector<double> beta{0.1, 1.0, 10.0};
  long steps_per_cell = 200'000;
  int eval_episodes = 256;
};

struct RunConfig {
  EnvironmentConfig environment;
  std::string algorithm = "rcppo";  ///< rcppo | ppo_lagrangian
  std::uint64_t seed = 0;
  std::string output_dir;           ///< empty: <output root>/<env>-<algorithm>-seed<seed>
  algo::Phase1Config phase1;        ///< phase1.ppo also configures the baseline trainer
  algo::Phase2Config phase2;
  baselines::LagrangianRewardConfig reward;
  algo::ZFitConfig zfit;
  EvaluationConfig evaluation;
  GridSearchSettings gridsearch;
};

/// Parses a JSON document; unknown keys and wrong types are errors naming the
/// field.  "environment.id" and "algorithm" are required.
RunConfig parse_config(const Json& doc);
RunConfig load_config(const std::filesystem::path& path);
/// The fully resolved configuration, defaults included.
Json to_json(const RunConfig& cfg);
/// Hash of the model-defining sections (environment, algorithm, seed, ppo,
/// phase1, reward); evaluation-only settings do not change it.
std::string config_hash(const RunConfig& cfg);

envkit::ProblemPtr make_problem(const EnvironmentConfig& env);
/// Trainer settings for the Lagrangian baseline derived from the run config.
baselines::BaselineConfig baseline_config(const RunConfig& cfg);

/// Default output root: $RCPPO_OUT_ROOT, else "runs".
std::filesystem::path output_root();
std::filesystem::path resolve_output_dir(const RunConfig& cfg);

// ---------------------------------------------------------------------------

struct Verdict {
  std::string fixture;
  std::string property;
  bool passed = false;
  std::string detail;
};

/// Fixtures: appendix_f, theorem1, contraction, bisection, theorem3, all.
std::vector<Verdict> oracle_check(const std::string& fixture, std::uint64_t seed);
std::vector<std::string> oracle_fixtures();

/// Grid fixtures shared by the bisection and discount-bound suites.
struct GridFixture {
  std::string name;
  envkit::TabularMDP mdp;
};
std::vector<GridFixture> standard_grid_fixtures();

/// Minimal cumulative cost of a path from `start` into the goal that never
/// visits an avoid state (Dijkstra); nullopt when none exists.
std::optional<double> min_safe_path_cost(const envkit::TabularMDP& mdp, int start);

// ---------------------------------------------------------------------------

/// Entry point used by the executable; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace rcppo::cli
