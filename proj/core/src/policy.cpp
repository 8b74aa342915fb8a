#include "modelsel/policy.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace modelsel {

void RewardWeights::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw std::invalid_argument("reward weight alpha must be finite and > 0");
  if (!(beta >= 0.0) || !std::isfinite(beta))
    throw std::invalid_argument("reward weight beta must be finite and >= 0");
}

bool CostSchedule::validate() const {
  if (!(c_fast >= 0.0) || !std::isfinite(c_fast))
    throw std::invalid_argument("c_fast must be finite and >= 0");
  if (!(c_slow >= 0.0) || !std::isfinite(c_slow))
    throw std::invalid_argument("c_slow must be finite and >= 0");
  return c_slow > c_fast;
}

Loss::Loss(double value) : value_(value) {
  if (!(value >= 0.0) || !std::isfinite(value))
    throw std::invalid_argument("loss must be finite and non-negative, got " +
                                std::to_string(value));
}

Reward::Reward(double value) : value_(value) {
  if (!std::isfinite(value)) throw std::invalid_argument("reward must be finite");
}

double step_cost(Action action, const CostSchedule& costs) noexcept {
  return action == Action::UseFast ? costs.c_fast : costs.c_fast + costs.c_slow;
}

Reward step_reward(Action action, Loss loss, const RewardWeights& weights,
                   const CostSchedule& costs) noexcept {
  if (loss.is_infinite()) return Reward::negative_infinity();
  Reward r;
  r += Reward(-weights.alpha * loss.value() - weights.beta * step_cost(action, costs));
  return r;
}

double decision_threshold(const RewardWeights& weights, const CostSchedule& costs) {
  if (!(weights.alpha > 0.0))
    throw std::invalid_argument("decision threshold undefined for alpha <= 0");
  return weights.beta / weights.alpha * costs.c_slow;
}

StepRecord make_step_record(std::size_t t, Action action, Loss loss, Loss bound_used,
                            const RewardWeights& weights, const CostSchedule& costs) noexcept {
  StepRecord rec;
  rec.t = t;
  rec.action = action;
  rec.loss_realized = loss;
  rec.cost_incurred = step_cost(action, costs);
  rec.reward = step_reward(action, loss, weights, costs);
  rec.bound_used = bound_used;
  return rec;
}

EpisodeSummary summarize(std::span<const StepRecord> records) noexcept {
  EpisodeSummary s;
  s.n_steps = records.size();
  if (records.empty()) return s;

  double loss_sum = 0.0;
  bool loss_infinite = false;
  std::size_t n_slow = 0;
  for (const auto& r : records) {
    s.cumulative_reward += r.reward;
    s.total_cost += r.cost_incurred;
    if (r.loss_realized.is_infinite())
      loss_infinite = true;
    else
      loss_sum += r.loss_realized.value();
    if (r.action == Action::InvokeSlow) ++n_slow;
  }
  const double n = static_cast<double>(records.size());
  s.mean_loss = loss_infinite ? Loss::infinite() : Loss(loss_sum / n);
  s.slow_query_fraction = static_cast<double>(n_slow) / n;
  return s;
}

Action select_generic(double expected_gain, double threshold) noexcept {
  return threshold < expected_gain ? Action::InvokeSlow : Action::UseFast;
}

Action select_generic(Loss expected_gain, double threshold) noexcept {
  if (expected_gain.is_infinite()) return Action::InvokeSlow;
  return select_generic(expected_gain.value(), threshold);
}

Action policy_random(Rng& rng) noexcept {
  return rng.coin() ? Action::InvokeSlow : Action::UseFast;
}

Action policy_oracle(Loss loss_fast, Loss loss_slow, const RewardWeights& weights,
                     const CostSchedule& costs) noexcept {
  // Comparing the rewards themselves keeps the per-step optimality exact in
  // floating point: the oracle's recorded reward is never below the other arm.
  const Reward slow = step_reward(Action::InvokeSlow, loss_slow, weights, costs);
  const Reward fast = step_reward(Action::UseFast, loss_fast, weights, costs);
  return slow > fast ? Action::InvokeSlow : Action::UseFast;
}

std::string_view policy_id(PolicyKind kind) noexcept {
  switch (kind) {
    case PolicyKind::Fast: return "fast";
    case PolicyKind::Slow: return "slow";
    case PolicyKind::Random: return "random";
    case PolicyKind::Selector: return "selector";
    case PolicyKind::Oracle: return "oracle";
  }
  return "?";
}

std::string_view policy_label(PolicyKind kind) noexcept {
  switch (kind) {
    case PolicyKind::Fast: return "Fast";
    case PolicyKind::Slow: return "Slow";
    case PolicyKind::Random: return "Random";
    case PolicyKind::Selector: return "Our Selector";
    case PolicyKind::Oracle: return "Oracle";
  }
  return "?";
}

PolicyKind parse_policy(std::string_view id) {
  for (PolicyKind k : kAllPolicies)
    if (policy_id(k) == id) return k;
  throw std::invalid_argument("unknown policy '" + std::string(id) + "'");
}

}  // namespace modelsel
