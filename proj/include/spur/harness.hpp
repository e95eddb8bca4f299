#pragma once

// Experiment orchestration behind the spurlab CLI: configuration loading,
// the five experiment runners, file emission and SVG trajectory plots.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "spur/estimators.hpp"
#include "spur/mask_policy_sim.hpp"
#include "spur/nnet.hpp"
#include "spur/pretrain_ft.hpp"

namespace spur::harness {

inline constexpr const char* kToolVersion = "0.1.0";

enum class ExperimentKind { kTable1, kTrajectories, kTheoryCheck, kRates, kMasksim };

std::string_view to_string(ExperimentKind kind);
// Accepts the CLI spellings (table1, trajectories, theory-check, rates, masksim).
ExperimentKind parse_experiment_kind(std::string_view name);

struct Grid {
  std::vector<std::size_t> depths;
  std::vector<bool> pretrained;
  std::vector<std::size_t> d2;
  std::vector<double> nu;
};

struct GridCell {
  std::size_t depth;
  bool pretrained;
  std::size_t d2;
  double nu;
};

struct TheorySettings {
  std::size_t trials = 1000;
  double concentration = 1.0;
  std::size_t search_draws = 10000;
};

struct RateSettings {
  std::size_t d2 = 50;
  double nu = 0.25;
  std::vector<std::size_t> n_grid{100, 1000, 10000, 100000};
  std::size_t seeds_per_n = 50;
  PriorMode prior_mode = PriorMode::kEstimated;
};

struct MasksimSettings {
  SeqConfig seq;
  std::size_t seeds = 10;
  std::vector<MaskPolicy> policies{std::begin(kAllPolicies), std::end(kAllPolicies)};
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kTable1;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::string out = "results";
  Grid grid;
  std::size_t seeds = 10;
  TrainConfig training;
  PretrainConfig pretraining;
  TheorySettings theory;
  RateSettings rates;
  MasksimSettings masksim;

  // Cross product of the grid, skipping pretrained cells of depth 1.
  std::vector<GridCell> cells() const;
  void validate() const;
  // Effective configuration (worker count omitted: it never changes results).
  nlohmann::json to_json() const;
  std::string hash() const;
};

ExperimentConfig default_config(ExperimentKind kind);
// Overlays a JSON document on the defaults for `kind`. Unknown keys, wrong
// types and invariant violations throw ConfigError.
ExperimentConfig load_config(ExperimentKind kind, const nlohmann::json& doc);
ExperimentConfig load_config_file(ExperimentKind kind, const std::filesystem::path& path);

// --- output ------------------------------------------------------------------

class OutputDir {
 public:
  OutputDir(std::filesystem::path root, std::string config_hash);

  // Writes the file and its <name>.manifest.json sidecar.
  void write_text(const std::string& name, const std::string& content, double wall_seconds);
  void write_json(const std::string& name, const nlohmann::json& doc, double wall_seconds);
  const std::filesystem::path& root() const { return root_; }
  const std::vector<std::string>& written() const { return written_; }

 private:
  std::filesystem::path root_;
  std::string config_hash_;
  std::vector<std::string> written_;
};

std::string fnv1a_hex(std::string_view bytes);

// --- plots ---------------------------------------------------------------------

// 800x500 polyline chart of avg_w_x1, avg_w_x2, avg_w_zone and accuracy.
std::string trajectory_svg(std::span<const TrajectoryPoint> rows, const std::string& title);
// Parses the iter,acc,avg_w_x1,avg_w_x2,avg_w_zone format. Throws ConfigError.
std::vector<TrajectoryPoint> parse_trajectory_csv(const std::string& text);

// --- runners -------------------------------------------------------------------

struct Assertion {
  std::string name;
  bool pass;
  std::string detail;
};

struct RunResult {
  nlohmann::json summary;
  std::vector<Assertion> assertions;

  bool all_passed() const;
};

nlohmann::json assertions_json(std::span<const Assertion> assertions);

struct Table1Cell {
  GridCell cell;
  std::size_t seeds = 0;
  double mean_iters = 0.0;
  double sd_iters = 0.0;
  std::size_t n_converged = 0;
};

std::vector<Table1Cell> table1_cells(const ExperimentConfig& config);
std::string table1_csv(std::span<const Table1Cell> cells);
std::vector<Assertion> table1_assertions(std::span<const Table1Cell> cells);

RunResult run_table1(const ExperimentConfig& config, OutputDir& out);
RunResult run_trajectories(const ExperimentConfig& config, OutputDir& out);
RunResult run_theory_checks(const ExperimentConfig& config, OutputDir& out);
RunResult run_rates(const ExperimentConfig& config, OutputDir& out);
RunResult run_masksim(const ExperimentConfig& config, OutputDir& out);
RunResult run_experiment(const ExperimentConfig& config, OutputDir& out);

// Trajectories of one toy cell (depth 2) for a seed, with and without
// pretraining.
struct TrajectoryPair {
  TrainReport plain;
  TrainReport pretrained;
};
TrajectoryPair trajectory_pair(const ExperimentConfig& config, std::size_t d2, double nu, std::size_t seed_index);

struct TrajectoryShapeCounts {
  std::size_t plateau_then_crossing = 0;
  std::size_t pretrained_peak_below = 0;
  std::size_t seeds = 0;
};
TrajectoryShapeCounts trajectory_shape_counts(std::span<const TrajectoryPair> runs, double nu);

// Sampled masked-token count per sequence for a policy (n sequences).
double empirical_masked_tokens(const SeqConfig& config, MaskPolicy policy, std::size_t n, std::uint64_t seed);

}  // namespace spur::harness
