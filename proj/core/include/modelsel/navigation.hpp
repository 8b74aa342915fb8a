#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "modelsel/mpc.hpp"
#include "modelsel/policy.hpp"
#include "modelsel/reachability.hpp"
#include "modelsel/rover.hpp"
#include "modelsel/spline.hpp"

namespace modelsel::rover {

/// One reachability model: confidence p, type-I error delta, and the cost
/// charged per drawn sample.
struct ReachModelSpec {
  double confidence = 0.9;
  double type1 = 0.05;
  double cost_per_sample = 1e-4;
};

struct RoverScenario {
  std::string name = "scenario";
  std::vector<Eigen::Vector2d> waypoints;
  reach::UnsafeSet obstacles{{}, {0, 1}};
  /// Defaults to the first waypoint, heading along the path, at rest.
  std::optional<RoverState> initial_state;
  /// Half-widths of the initial set around the current state.
  Eigen::Vector4d initial_radius{0.05, 0.05, 0.01, 0.05};
  double goal_tolerance = 0.5;
  std::size_t horizon = 5;
  ReachModelSpec fast{0.9, 0.05, 1e-4};
  ReachModelSpec slow{0.99, 0.01, 1e-4};
  RewardWeights weights{0.7, 0.3};
  RoverParams params;
  MpcSettings mpc;
  YawRowMask yaw_mask;
  double ds = 0.1;
  std::size_t step_cap = 600;
  std::size_t calibration_runs = 20;
  /// Route whose nominal rollout supplies calibration states; empty means the
  /// scenario's own waypoints.
  std::vector<Eigen::Vector2d> calibration_waypoints;
  std::uint64_t calibration_seed = 7;

  /// Throws std::invalid_argument on fewer than two waypoints, a
  /// non-positive goal tolerance, or any invalid nested block.
  void validate() const;

  /// Sample counts use the physical state dimension (4), not the augmented one.
  reach::StatReachConfig fast_config() const;
  reach::StatReachConfig slow_config() const;
  CostSchedule costs() const;
  ReferenceTrajectory reference() const;
  RoverState start(const ReferenceTrajectory& ref) const;
};

/// Uncertain augmented system for one decision step.
struct StepReach {
  reach::IntervalMatrix lambda;
  reach::Box x0;
  std::vector<RoverControl> planned;
};

StepReach build_step_reach(const RoverScenario& scn, const ReferenceTrajectory& ref,
                           const RoverState& s, std::size_t hint);

/// Sub-stream tags for derive_seed(seed, {step, tag}).
enum class Stream : std::uint64_t {
  Fast = 1,
  Slow = 2,
  Posthoc = 3,
  Truth = 4,
  Random = 5,
  Calibration = 6,
};

/// Memoizes reach results by (step, model, exact state bits). Paired policy
/// runs under one seed visit identical states until they diverge, so the
/// cache returns exactly what a fresh computation would.
class ReachCache {
 public:
  using Key = std::tuple<std::size_t, std::uint64_t, std::array<std::uint64_t, 4>>;
  const reach::ReachResult* find(const Key& k) const;
  const reach::ReachResult& insert(const Key& k, reach::ReachResult r);
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::map<Key, reach::ReachResult> entries_;
};

struct TrajectoryRow {
  std::size_t t = 0;
  /// State at which decision t was taken.
  RoverState state;
  Action action = Action::UseFast;
  Loss loss;
  Reward reward;
};

struct ReachLogEntry {
  std::size_t step = 0;
  Action model = Action::UseFast;
  /// Physical-state projections (x, y, yaw, v) at timesteps 1..t.
  std::vector<reach::Box> boxes;
};

struct NavigationOptions {
  /// Evaluate an independent slow reach set at every executed state.
  bool posthoc = false;
  bool record_reach_sets = false;
  unsigned threads = 1;
  ReachCache* cache = nullptr;
};

struct NavigationResult {
  std::vector<TrajectoryRow> trajectory;
  std::vector<StepRecord> records;
  EpisodeSummary summary;
  RoverState final_state;
  bool reached_goal = false;
  bool flagged_unsafe = false;
  bool step_cap_hit = false;
  std::size_t posthoc_checks = 0;
  std::size_t posthoc_violations = 0;
  std::vector<ReachLogEntry> reach_log;
};

/// One navigation episode under `policy` with calibrated bloat radius `mu`.
///
/// Per step: MPC plans, the bicycle is linearized, the fast reach set is
/// computed, and the policy picks a model. Using the fast model means
/// trusting its set bloated by mu; the realized loss is loss_nav of the
/// consulted set. An infinite loss stops the rover (full braking) and flags
/// the episode, which then ends. Otherwise the first planned control is
/// applied to the nonlinear bicycle with a per-step yaw-rate multiplier drawn
/// in [1 - eta, 1 + eta]. Hitting the step cap ends the run unconverged.
NavigationResult run_navigation(const RoverScenario& scn, PolicyKind policy, std::uint64_t seed,
                                double mu, const NavigationOptions& opts = {});

/// Fast/slow result pairs at `calibration_runs` states spread along a nominal
/// rollout of the scenario. `stream` selects the sampling seeds so disjoint
/// sets can be drawn for calibration and held-out checks.
std::vector<std::pair<reach::ReachResult, reach::ReachResult>> calibration_pairs(
    const RoverScenario& scn, std::uint64_t seed, std::uint64_t stream = 0,
    unsigned threads = 1);

/// calibrate_bloat over calibration_pairs, measured on the position coordinates.
reach::BloatCalibration calibrate_scenario(const RoverScenario& scn, std::uint64_t seed,
                                           unsigned threads = 1);

/// States visited by MPC tracking with nominal dynamics, no safety checks.
std::vector<RoverState> nominal_rollout(const RoverScenario& scn);

}  // namespace modelsel::rover
