#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "modelsel/policy.hpp"

namespace modelsel {

/// Raised when a model throws during an episode; carries the failing step.
class EpisodeError : public std::runtime_error {
 public:
  EpisodeError(std::size_t step, const std::string& what)
      : std::runtime_error("step " + std::to_string(step) + ": " + what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// Fast/slow models, the loss, and the selector's estimate of
/// E[L(y_fast, y_slow)] computed from (x, y_fast) alone.
template <typename Input, typename Output>
struct EpisodeModels {
  std::function<Output(const Input&)> fast;
  std::function<Output(const Input&)> slow;
  std::function<Loss(const Output&, const Output&)> loss;
  std::function<Loss(const Input&, const Output&)> gain_bound;
};

struct EpisodeResult {
  std::vector<StepRecord> records;
  EpisodeSummary summary;
};

/// Runs one finite-horizon episode under `policy`.
///
/// The fast model runs at every step, so c_fast is always charged. The slow
/// output doubles as ground truth: the realized loss is L(y_fast, y_slow)
/// under UseFast and exactly 0 under InvokeSlow. Only the Oracle policy sees
/// the slow output before deciding. `policy_rng` is consumed only by Random.
template <typename Input, typename Output>
EpisodeResult run_episode(std::span<const Input> inputs,
                          const EpisodeModels<Input, Output>& models, PolicyKind policy,
                          Rng& policy_rng, const RewardWeights& weights,
                          const CostSchedule& costs) {
  const double threshold = decision_threshold(weights, costs);
  EpisodeResult out;
  out.records.reserve(inputs.size());

  for (std::size_t t = 0; t < inputs.size(); ++t) {
    try {
      const Input& x = inputs[t];
      const Output y_fast = models.fast(x);
      const Output y_ground = models.slow(x);
      const Loss loss_fast = models.loss(y_fast, y_ground);
      const Loss loss_slow{};
      Loss bound = models.gain_bound(x, y_fast);

      Action action = Action::UseFast;
      switch (policy) {
        case PolicyKind::Fast: action = policy_fast(); break;
        case PolicyKind::Slow: action = policy_slow(); break;
        case PolicyKind::Random: action = policy_random(policy_rng); break;
        case PolicyKind::Selector: action = select_generic(bound, threshold); break;
        case PolicyKind::Oracle:
          action = policy_oracle(loss_fast, loss_slow, weights, costs);
          bound = loss_fast;
          break;
      }
      const Loss realized = action == Action::UseFast ? loss_fast : loss_slow;
      out.records.push_back(make_step_record(t, action, realized, bound, weights, costs));
    } catch (const EpisodeError&) {
      throw;
    } catch (const std::exception& e) {
      throw EpisodeError(t, e.what());
    }
  }
  out.summary = summarize(out.records);
  return out;
}

}  // namespace modelsel
