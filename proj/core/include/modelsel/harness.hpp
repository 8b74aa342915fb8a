#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "modelsel/dnn_proxy.hpp"
#include "modelsel/policy.hpp"
#include "modelsel/serialization.hpp"

namespace modelsel::harness {

using io::json;

inline constexpr int kSchemaVersion = 1;

enum class Suite : std::uint8_t { Linreg, Dnn, Rover };

std::string_view suite_id(Suite s) noexcept;
/// Throws std::invalid_argument on unknown names.
Suite parse_suite(std::string_view id);

struct LinregSettings {
  Eigen::Index n = 4;
  Eigen::Index m = 4;
  double epsilon = 0.1;
  double input_scale = 0.95;
  double bias_share = 0.1;
};

/// One output and one cosine feature: the arcsine-shaped output spread puts
/// ||y||^2 on both sides of the threshold, which is what makes selection pay.
struct DnnSettings {
  Eigen::Index n = 4;
  Eigen::Index m = 1;
  dnn::ProbabilisticBound bound{0.006, 1e-4, 0.01};
  Eigen::Index n_features = 1;
  double y_lo = 0.01;
  double y_hi = 1.0;
};

struct RoverSettings {
  std::vector<std::filesystem::path> scenarios;
  /// Scenario name -> calibration artifact; missing entries are calibrated inline.
  std::map<std::string, std::filesystem::path> calibrations;
  bool record_reach_sets = true;
};

struct ExperimentConfig {
  Suite suite = Suite::Linreg;
  std::uint64_t seed = 1;
  /// Explicit per-trial seeds; when non-empty they replace derived seeds and
  /// fix the trial count.
  std::vector<std::uint64_t> seeds;
  std::size_t trials = 1;
  /// Steps per episode (linreg, dnn). Rover episodes run to the goal or cap.
  std::size_t n_steps = 1000;
  RewardWeights weights{1.0, 0.003};
  CostSchedule costs{1.0, 2.5};
  LinregSettings linreg;
  DnnSettings dnn;
  RoverSettings rover;
  std::filesystem::path output_dir = "out";
  unsigned threads = 1;

  std::size_t trial_count() const noexcept { return seeds.empty() ? trials : seeds.size(); }
  /// seeds[i] when given, else derive_seed(seed, {i}).
  std::uint64_t trial_seed(std::size_t trial) const;
  /// Throws io::ConfigError with the offending field path.
  void validate() const;
};

/// Relative paths resolve against `base_dir`. Throws io::ConfigError.
ExperimentConfig config_from_json(const json& j, const std::filesystem::path& base_dir = ".");
ExperimentConfig load_config(const std::filesystem::path& file);
json to_json(const ExperimentConfig& cfg);

// --- reports -----------------------------------------------------------------

/// Mean and sample standard deviation; an infinite member makes the mean
/// infinite and the deviation NaN (serialized as null).
struct Stat {
  double mean = 0.0;
  double std = 0.0;
};

struct RoverTrialInfo {
  bool reached_goal = false;
  bool flagged_unsafe = false;
  bool step_cap_hit = false;
  std::size_t posthoc_checks = 0;
  std::size_t posthoc_violations = 0;
};

struct TrialRow {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  PolicyKind policy = PolicyKind::Fast;
  Reward cumulative_reward;
  double total_cost = 0.0;
  Loss mean_loss;
  double slow_query_fraction = 0.0;
  std::size_t n_steps = 0;
  std::optional<RoverTrialInfo> rover;
};

struct PolicyAggregate {
  PolicyKind policy = PolicyKind::Fast;
  std::size_t n_trials = 0;
  Stat cumulative_reward;
  Stat total_cost;
  Stat mean_loss;
  Stat slow_query_fraction;
};

struct ComparisonReport {
  std::string suite;
  std::string label;
  bool complete = true;
  /// One entry per policy, in kAllPolicies order.
  std::vector<PolicyAggregate> policies;
  std::vector<TrialRow> trials;
  json config = json::object();

  const PolicyAggregate& get(PolicyKind p) const;
};

/// Recomputes the per-policy aggregates from trial rows.
std::vector<PolicyAggregate> aggregate(const std::vector<TrialRow>& rows);

json to_json(const ComparisonReport& r);
/// Throws io::ConfigError on a schema-version mismatch or malformed document.
ComparisonReport report_from_json(const json& j, const std::string& source = "summary.json");

// --- suites ------------------------------------------------------------------

struct SuiteOutput {
  ComparisonReport report;
  std::filesystem::path dir;
};

struct SuiteResult {
  /// One per rover map, otherwise exactly one.
  std::vector<SuiteOutput> outputs;
  bool interrupted = false;
};

/// Runs every (policy x trial) with paired streams: within a trial all five
/// policies see the same model pair and input sequence. Writes steps.csv,
/// summary.json and the two SVG charts (plus trajectory and reach-set CSVs
/// for rover maps, one subdirectory per map). When `cancel` becomes true,
/// completed trials are flushed and the summary is marked incomplete.
SuiteResult run_suite(const ExperimentConfig& cfg, const std::atomic<bool>* cancel = nullptr);

/// Calibrates every configured rover scenario and writes
/// calibration_<name>.json into the output directory.
std::vector<io::CalibrationArtifact> calibrate(const ExperimentConfig& cfg);

/// Merges summaries (and their sibling steps.csv files), renumbers trials,
/// recomputes aggregates, and writes summary.json, steps.csv and charts into
/// `out_dir`. Throws io::ConfigError on schema or suite mismatch.
ComparisonReport report(const std::vector<std::filesystem::path>& summaries,
                        const std::filesystem::path& out_dir);

/// Regenerates reward_curve.svg and cost_vs_loss.svg in `dir` purely from
/// its steps.csv and summary.json.
void render_charts(const std::filesystem::path& dir);

struct CheckResult {
  bool ok = true;
  std::vector<std::string> failures;
};

/// Oracle >= Our Selector >= every realizable benchmark in mean cumulative
/// reward; for rover reports also zero post-hoc violations and goal reached
/// on every Our Selector trial.
CheckResult check_report(const ComparisonReport& r);

}  // namespace modelsel::harness
