#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "modelsel/rng.hpp"

namespace modelsel {

/// Weights on accuracy (alpha) and compute cost (beta) in the per-step reward.
struct RewardWeights {
  double alpha = 1.0;
  double beta = 0.0;

  /// Throws std::invalid_argument unless alpha > 0 and beta >= 0.
  void validate() const;
};

/// Per-invocation cost of each compute model.
struct CostSchedule {
  double c_fast = 0.0;
  double c_slow = 0.0;

  /// Throws on negative or non-finite costs. Returns false (without throwing)
  /// when c_slow <= c_fast, i.e. the trade-off is degenerate.
  bool validate() const;
};

enum class Action : std::uint8_t { UseFast = 0, InvokeSlow = 1 };

/// Non-negative loss with a symbolic +infinity marker.
class Loss {
 public:
  constexpr Loss() noexcept = default;
  /// Throws std::invalid_argument on negative, NaN or infinite input;
  /// use Loss::infinite() for the marker.
  explicit Loss(double value);

  static constexpr Loss infinite() noexcept {
    Loss l;
    l.infinite_ = true;
    return l;
  }

  constexpr bool is_infinite() const noexcept { return infinite_; }
  /// The finite value, or IEEE +inf for the marker.
  constexpr double value() const noexcept {
    return infinite_ ? std::numeric_limits<double>::infinity() : value_;
  }

  friend constexpr bool operator==(const Loss&, const Loss&) = default;
  friend constexpr std::partial_ordering operator<=>(const Loss& a, const Loss& b) noexcept {
    if (a.infinite_ || b.infinite_) return a.infinite_ <=> b.infinite_;
    return a.value_ <=> b.value_;
  }

 private:
  double value_ = 0.0;
  bool infinite_ = false;
};

/// Real-valued reward with a symbolic -infinity marker. Sums involving the
/// marker stay at the marker.
class Reward {
 public:
  constexpr Reward() noexcept = default;
  /// Throws std::invalid_argument on NaN or infinite input.
  explicit Reward(double value);

  static constexpr Reward negative_infinity() noexcept {
    Reward r;
    r.neg_infinite_ = true;
    return r;
  }

  constexpr bool is_negative_infinity() const noexcept { return neg_infinite_; }
  constexpr double value() const noexcept {
    return neg_infinite_ ? -std::numeric_limits<double>::infinity() : value_;
  }

  Reward& operator+=(const Reward& other) noexcept {
    if (other.neg_infinite_) neg_infinite_ = true;
    if (!neg_infinite_) value_ += other.value_;
    return *this;
  }
  friend Reward operator+(Reward a, const Reward& b) noexcept { return a += b; }

  friend constexpr bool operator==(const Reward& a, const Reward& b) noexcept {
    if (a.neg_infinite_ || b.neg_infinite_) return a.neg_infinite_ == b.neg_infinite_;
    return a.value_ == b.value_;
  }
  friend constexpr std::partial_ordering operator<=>(const Reward& a, const Reward& b) noexcept {
    if (a.neg_infinite_ || b.neg_infinite_) return b.neg_infinite_ <=> a.neg_infinite_;
    return a.value_ <=> b.value_;
  }

 private:
  double value_ = 0.0;
  bool neg_infinite_ = false;
};

struct StepRecord {
  std::size_t t = 0;
  Action action = Action::UseFast;
  Loss loss_realized;
  double cost_incurred = 0.0;
  Reward reward;
  /// Expected-loss estimate the policy compared against the threshold.
  Loss bound_used;
};

struct EpisodeSummary {
  Reward cumulative_reward;
  double total_cost = 0.0;
  Loss mean_loss;
  double slow_query_fraction = 0.0;
  std::size_t n_steps = 0;
};

// --- reward accounting -----------------------------------------------------

double step_cost(Action action, const CostSchedule& costs) noexcept;

/// -alpha * loss - beta * step_cost(action). Infinite loss gives the -inf marker.
Reward step_reward(Action action, Loss loss, const RewardWeights& weights,
                   const CostSchedule& costs) noexcept;

/// (beta / alpha) * c_slow. Throws std::invalid_argument when alpha <= 0.
double decision_threshold(const RewardWeights& weights, const CostSchedule& costs);

/// Builds a record whose cost and reward follow from the action and loss.
StepRecord make_step_record(std::size_t t, Action action, Loss loss, Loss bound_used,
                            const RewardWeights& weights, const CostSchedule& costs) noexcept;

EpisodeSummary summarize(std::span<const StepRecord> records) noexcept;

// --- selection policies ----------------------------------------------------

/// InvokeSlow iff threshold < expected_gain. Ties keep the fast model.
Action select_generic(double expected_gain, double threshold) noexcept;
Action select_generic(Loss expected_gain, double threshold) noexcept;

constexpr Action policy_fast() noexcept { return Action::UseFast; }
constexpr Action policy_slow() noexcept { return Action::InvokeSlow; }
Action policy_random(Rng& rng) noexcept;

/// Privileged benchmark: InvokeSlow iff the slow model's step reward is
/// strictly greater than the fast model's.
Action policy_oracle(Loss loss_fast, Loss loss_slow, const RewardWeights& weights,
                     const CostSchedule& costs) noexcept;

enum class PolicyKind : std::uint8_t { Fast, Slow, Random, Selector, Oracle };

inline constexpr std::array<PolicyKind, 5> kAllPolicies = {
    PolicyKind::Fast, PolicyKind::Slow, PolicyKind::Random, PolicyKind::Selector,
    PolicyKind::Oracle};

/// Machine-friendly identifier ("fast", "selector", ...).
std::string_view policy_id(PolicyKind kind) noexcept;
/// Display name ("Fast", "Our Selector", ...).
std::string_view policy_label(PolicyKind kind) noexcept;
/// Throws std::invalid_argument on unknown identifiers.
PolicyKind parse_policy(std::string_view id);

}  // namespace modelsel
