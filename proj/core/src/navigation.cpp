#include "modelsel/navigation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

namespace modelsel::rover {

void RoverScenario::validate() const {
  if (waypoints.size() < 2) throw std::invalid_argument("scenario needs at least two waypoints");
  if (!(goal_tolerance > 0.0)) throw std::invalid_argument("goal tolerance must be positive");
  if (horizon < 1) throw std::invalid_argument("reach horizon must be positive");
  if (!(ds > 0.0)) throw std::invalid_argument("reference sampling step must be positive");
  if (step_cap < 1) throw std::invalid_argument("step cap must be positive");
  if (calibration_runs < 1) throw std::invalid_argument("calibration needs at least one run");
  if (calibration_waypoints.size() == 1)
    throw std::invalid_argument("calibration route needs at least two waypoints");
  if ((initial_radius.array() < 0.0).any())
    throw std::invalid_argument("initial radius must be non-negative");
  if (!(fast.cost_per_sample >= 0.0 && slow.cost_per_sample >= 0.0))
    throw std::invalid_argument("cost per sample must be non-negative");
  params.validate();
  mpc.validate();
  weights.validate();
  obstacles.validate();
  (void)fast_config();
  (void)slow_config();
}

reach::StatReachConfig RoverScenario::fast_config() const {
  return reach::StatReachConfig::from_confidence(fast.confidence, fast.type1, kStateDim, horizon,
                                                 fast.cost_per_sample);
}

reach::StatReachConfig RoverScenario::slow_config() const {
  return reach::StatReachConfig::from_confidence(slow.confidence, slow.type1, kStateDim, horizon,
                                                 slow.cost_per_sample);
}

CostSchedule RoverScenario::costs() const { return {fast_config().cost, slow_config().cost}; }

ReferenceTrajectory RoverScenario::reference() const { return cubic_spline_plan(waypoints, ds); }

RoverState RoverScenario::start(const ReferenceTrajectory& ref) const {
  if (initial_state) return *initial_state;
  const ReferencePoint& p0 = ref.points.front();
  return {p0.x, p0.y, normalize_angle(p0.yaw), 0.0};
}

StepReach build_step_reach(const RoverScenario& scn, const ReferenceTrajectory& ref,
                           const RoverState& s, std::size_t hint) {
  StepReach out;
  out.planned =
      mpc_track(ref, s, std::max(scn.horizon, scn.mpc.horizon), scn.params, scn.mpc, hint);
  const Linearization lin = linearize(s, out.planned.front(), scn.params);
  out.lambda = build_uncertain_dynamics(lin, out.planned, scn.horizon,
                                        scn.params.yaw_uncertainty, scn.yaw_mask);
  const reach::Box state_box = reach::Box::around(s.vec(), scn.initial_radius);
  out.x0 = augment_initial_set(state_box, out.planned, scn.horizon);
  return out;
}

const reach::ReachResult* ReachCache::find(const Key& k) const {
  const auto it = entries_.find(k);
  return it == entries_.end() ? nullptr : &it->second;
}

const reach::ReachResult& ReachCache::insert(const Key& k, reach::ReachResult r) {
  return entries_.insert_or_assign(k, std::move(r)).first->second;
}

namespace {

ReachCache::Key cache_key(std::size_t step, Stream stream, const RoverState& s) {
  return {step, static_cast<std::uint64_t>(stream),
          {std::bit_cast<std::uint64_t>(s.x), std::bit_cast<std::uint64_t>(s.y),
           std::bit_cast<std::uint64_t>(s.yaw), std::bit_cast<std::uint64_t>(s.v)}};
}

std::vector<reach::Box> state_projection(const std::vector<reach::Box>& boxes) {
  std::vector<reach::Box> out;
  out.reserve(boxes.size());
  for (const auto& b : boxes) out.emplace_back(b.lo().head(kStateDim), b.hi().head(kStateDim));
  return out;
}

double yaw_rate_scale(std::uint64_t seed, std::size_t step, double eta) {
  Rng rng(derive_seed(seed, {step, static_cast<std::uint64_t>(Stream::Truth)}));
  return rng.uniform(1.0 - eta, 1.0 + eta);
}

bool at_goal(const RoverState& s, const RoverScenario& scn) {
  const Eigen::Vector2d& g = scn.waypoints.back();
  return std::hypot(s.x - g.x(), s.y - g.y()) <= scn.goal_tolerance;
}

RoverState brake_to_stop(RoverState s, const RoverParams& p) {
  // Each step removes accel_max * dt of speed, so this terminates.
  while (s.v > 0.0) s = bicycle_step(s, {-p.accel_max, 0.0}, p);
  return s;
}

}  // namespace

NavigationResult run_navigation(const RoverScenario& scn, PolicyKind policy, std::uint64_t seed,
                                double mu, const NavigationOptions& opts) {
  scn.validate();
  if (!(mu >= 0.0) || !std::isfinite(mu)) throw std::invalid_argument("mu must be finite and >= 0");

  const ReferenceTrajectory ref = scn.reference();
  const reach::StatReachConfig fast_cfg = scn.fast_config();
  const reach::StatReachConfig slow_cfg = scn.slow_config();
  const CostSchedule costs{fast_cfg.cost, slow_cfg.cost};
  const double eta = scn.params.yaw_uncertainty;
  Rng policy_rng(derive_seed(seed, {static_cast<std::uint64_t>(Stream::Random)}));

  auto compute = [&](std::size_t step, Stream stream, const RoverState& s, const StepReach& sr,
                     const reach::StatReachConfig& cfg) -> reach::ReachResult {
    const auto key = cache_key(step, stream, s);
    if (opts.cache)
      if (const auto* hit = opts.cache->find(key)) return *hit;
    reach::ReachResult r = reach::reach_sampled(
        sr.lambda, sr.x0, cfg, derive_seed(seed, {step, static_cast<std::uint64_t>(stream)}),
        opts.threads);
    if (opts.cache) opts.cache->insert(key, r);
    return r;
  };

  NavigationResult out;
  RoverState s = scn.start(ref);
  std::size_t hint = 0;

  for (std::size_t step = 0;; ++step) {
    if (at_goal(s, scn)) {
      out.reached_goal = true;
      break;
    }
    if (step >= scn.step_cap) {
      out.step_cap_hit = true;
      break;
    }
    hint = ref.nearest_index(s.x, s.y, hint);
    const StepReach sr = build_step_reach(scn, ref, s, hint);

    const reach::ReachResult fast = compute(step, Stream::Fast, s, sr, fast_cfg);
    const std::vector<reach::Box> fast_bloated = reach::bloat(fast.boxes, mu);
    const Loss loss_fast = reach::loss_nav(fast_bloated, scn.obstacles);

    std::optional<reach::ReachResult> slow;
    auto need_slow = [&]() -> const reach::ReachResult& {
      if (!slow) slow = compute(step, Stream::Slow, s, sr, slow_cfg);
      return *slow;
    };

    Action action = Action::UseFast;
    switch (policy) {
      case PolicyKind::Fast: action = policy_fast(); break;
      case PolicyKind::Slow: action = policy_slow(); break;
      case PolicyKind::Random: action = policy_random(policy_rng); break;
      case PolicyKind::Selector: action = reach::select_rs(fast, mu, scn.obstacles); break;
      case PolicyKind::Oracle: {
        const Loss loss_slow = reach::loss_nav(need_slow().boxes, scn.obstacles);
        action = policy_oracle(loss_fast, loss_slow, scn.weights, costs);
        break;
      }
    }

    const Loss realized = action == Action::UseFast
                              ? loss_fast
                              : reach::loss_nav(need_slow().boxes, scn.obstacles);
    const StepRecord rec = make_step_record(step, action, realized, loss_fast, scn.weights, costs);
    out.records.push_back(rec);
    out.trajectory.push_back({step, s, action, realized, rec.reward});
    if (opts.record_reach_sets) {
      const auto& consulted = action == Action::UseFast ? fast.boxes : need_slow().boxes;
      out.reach_log.push_back({step, action, state_projection(consulted)});
    }

    if (opts.posthoc) {
      const reach::ReachResult check = compute(step, Stream::Posthoc, s, sr, slow_cfg);
      ++out.posthoc_checks;
      if (reach::loss_nav(check.boxes, scn.obstacles).is_infinite()) ++out.posthoc_violations;
    }

    if (realized.is_infinite()) {
      out.flagged_unsafe = true;
      s = brake_to_stop(s, scn.params);
      break;
    }
    s = bicycle_step(s, sr.planned.front(), scn.params, yaw_rate_scale(seed, step, eta));
  }

  out.final_state = s;
  out.summary = summarize(out.records);
  return out;
}

std::vector<RoverState> nominal_rollout(const RoverScenario& scn) {
  scn.validate();
  const ReferenceTrajectory ref = scn.reference();
  std::vector<RoverState> states;
  RoverState s = scn.start(ref);
  std::size_t hint = 0;
  for (std::size_t step = 0; step < scn.step_cap && !at_goal(s, scn); ++step) {
    states.push_back(s);
    hint = ref.nearest_index(s.x, s.y, hint);
    const auto u = mpc_track(ref, s, scn.mpc.horizon, scn.params, scn.mpc, hint);
    s = bicycle_step(s, u.front(), scn.params);
  }
  return states;
}

std::vector<std::pair<reach::ReachResult, reach::ReachResult>> calibration_pairs(
    const RoverScenario& scenario, std::uint64_t seed, std::uint64_t stream, unsigned threads) {
  RoverScenario scn = scenario;
  if (!scn.calibration_waypoints.empty()) {
    scn.waypoints = scn.calibration_waypoints;
    scn.initial_state.reset();
  }
  const std::vector<RoverState> states = nominal_rollout(scn);
  if (states.empty()) throw std::invalid_argument("nominal rollout is empty; nothing to calibrate");
  const ReferenceTrajectory ref = scn.reference();
  const auto fast_cfg = scn.fast_config();
  const auto slow_cfg = scn.slow_config();

  std::vector<std::pair<reach::ReachResult, reach::ReachResult>> pairs;
  const std::size_t n = scn.calibration_runs;
  const auto tag = static_cast<std::uint64_t>(Stream::Calibration);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t idx = (i * states.size()) / n;
    const RoverState& s = states[idx];
    const StepReach sr = build_step_reach(scn, ref, s, ref.nearest_index(s.x, s.y, 0, ref.points.size()));
    pairs.emplace_back(
        reach::reach_sampled(sr.lambda, sr.x0, fast_cfg,
                             derive_seed(seed, {tag, stream, i, 1}), threads),
        reach::reach_sampled(sr.lambda, sr.x0, slow_cfg,
                             derive_seed(seed, {tag, stream, i, 2}), threads));
  }
  return pairs;
}

reach::BloatCalibration calibrate_scenario(const RoverScenario& scn, std::uint64_t seed,
                                           unsigned threads) {
  const auto pairs = calibration_pairs(scn, seed, 0, threads);
  const std::vector<reach::Index> coords = scn.obstacles.coords;
  return reach::calibrate_bloat(pairs, coords);
}

}  // namespace modelsel::rover
