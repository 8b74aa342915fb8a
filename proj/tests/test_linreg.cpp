#include <doctest.h>

#include <cmath>

#include "modelsel/coreset_linreg.hpp"

using namespace modelsel;
using namespace modelsel::linreg;

namespace {

// Selection indicator written out longhand: offload iff beta/alpha*c_slow < eps^2 |y|^2 / (1+eps)^2.
Action lr_indicator(const Eigen::VectorXd& y, double eps, double alpha, double beta, double c_slow) {
  double sq = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) sq += y[i] * y[i];
  const double bound = eps * eps * sq / ((1.0 + eps) * (1.0 + eps));
  return (beta / alpha) * c_slow < bound ? Action::InvokeSlow : Action::UseFast;
}

}  // namespace

TEST_CASE("loss_l2") {
  const Eigen::VectorXd v = Eigen::Vector3d(0.3, -1.0, 2.0);
  CHECK(loss_l2(v, v) == 0.0);
  CHECK(loss_l2(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)) == 2.0);
  CHECK(loss_l2(Eigen::Vector2d(3, 4), Eigen::Vector2d(0, 0)) == 25.0);
  CHECK_THROWS_AS((void)loss_l2(Eigen::Vector2d(1, 0), Eigen::Vector3d(1, 0, 0)),
                  std::invalid_argument);
}

TEST_CASE("loss_bound_lr") {
  CHECK(loss_bound_lr(Eigen::Vector3d::Zero(), 0.1) == 0.0);
  CHECK(loss_bound_lr(Eigen::Vector2d(1, 0), 0.1) == doctest::Approx(0.01 / 1.21).epsilon(1e-14));
  CHECK(loss_bound_lr(Eigen::Vector2d(0.6, 0.8), 0.1) == doctest::Approx(0.008264).epsilon(1e-4));
}

TEST_CASE("select_lr") {
  const RewardWeights w{1.0, 0.003};
  const CostSchedule c{1.0, 2.5};
  CHECK(select_lr(Eigen::Vector2d(1, 0), 0.1, w, c) == Action::InvokeSlow);
  CHECK(select_lr(Eigen::Vector2d(0, 0), 0.1, w, c) == Action::UseFast);
  CHECK(select_lr(Eigen::Vector2d(1e-3, 0), 0.1, {1.0, 0.0}, c) == Action::InvokeSlow);

  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    Eigen::VectorXd y(4);
    for (Eigen::Index k = 0; k < 4; ++k) y[k] = rng.uniform(0.0, 1.0);
    CHECK(select_lr(y, 0.1, w, c) == lr_indicator(y, 0.1, 1.0, 0.003, 2.5));
  }
}

TEST_CASE("generate_coreset_pair satisfies the coupling per coordinate") {
  Rng rng(3);
  const CoresetPair pair = generate_coreset_pair(rng, 4, 3, 0.1);
  REQUIRE(pair.per_coord_scales.size() == 3);
  for (Eigen::Index i = 0; i < 3; ++i) {
    CHECK(pair.per_coord_scales[i] >= 1.0);
    CHECK(pair.per_coord_scales[i] <= 1.1);
  }
  CHECK((pair.slow.A.array() >= 0.0).all());
  CHECK((pair.slow.b.array() >= 0.0).all());
  CHECK(pair.fast.A.isApprox(pair.per_coord_scales.asDiagonal() * pair.slow.A));

  // Outputs land in [0, 1] on the unit cube.
  CHECK(((pair.slow.A.rowwise().sum() + pair.slow.b).array() <= 1.0 + 1e-12).all());

  const InputDistribution dist{4, 0.95, 17};
  for (const auto& x : dist.sample(10000)) {
    CHECK((x.array() >= 0.0).all());
    const Eigen::VectorXd ys = pair.slow(x), yf = pair.fast(x);
    for (Eigen::Index i = 0; i < ys.size(); ++i) {
      CHECK(ys[i] <= yf[i]);
      CHECK(yf[i] <= 1.1 * ys[i] * (1.0 + 1e-15));
      CHECK(ys[i] >= yf[i] / 1.1 * (1.0 - 1e-15));
    }
    CHECK(loss_l2(yf, ys) <= loss_bound_lr(yf, 0.1) * (1.0 + 1e-12));
  }
}

TEST_CASE("forced scales") {
  Rng rng(4);
  const CoresetPair base = generate_coreset_pair(rng, 3, 3, 0.1);
  const Eigen::VectorXd x = Eigen::Vector3d(0.2, 0.7, 0.4);

  const CoresetPair same = make_coreset_pair(base.slow, Eigen::VectorXd::Ones(3), 0.1);
  CHECK(loss_l2(same.fast(x), same.slow(x)) == 0.0);

  const CoresetPair top = make_coreset_pair(base.slow, Eigen::VectorXd::Constant(3, 1.1), 0.1);
  const Eigen::VectorXd yf = top.fast(x);
  CHECK(loss_l2(yf, top.slow(x)) == doctest::Approx(loss_bound_lr(yf, 0.1)).epsilon(1e-9));

  CHECK_THROWS_AS((void)make_coreset_pair(base.slow, Eigen::VectorXd::Constant(3, 1.2), 0.1),
                  std::invalid_argument);
}

TEST_CASE("generate_coreset_pair rejects bad epsilon") {
  Rng rng(1);
  CHECK_THROWS_AS((void)generate_coreset_pair(rng, 2, 2, 0.0), std::invalid_argument);
  CHECK_THROWS_AS((void)generate_coreset_pair(rng, 2, 2, 1.0), std::invalid_argument);
  CHECK_THROWS_AS((void)generate_coreset_pair(rng, 0, 2, 0.1), std::invalid_argument);
}

TEST_CASE("selector offloads at least as often as a bound-fed oracle") {
  // Feeding the bound to the oracle in place of the true loss yields the same
  // decision as select_lr; the true loss never exceeds the bound, so the
  // true-loss oracle offloads no more often.
  Rng rng(8);
  const CoresetPair pair = generate_coreset_pair(rng, 4, 4, 0.1);
  const RewardWeights w{1.0, 0.003};
  const CostSchedule c{1.0, 2.5};
  for (const auto& x : InputDistribution{4, 0.95, 2}.sample(2000)) {
    const Eigen::VectorXd yf = pair.fast(x);
    const Action sel = select_lr(yf, 0.1, w, c);
    CHECK(sel == policy_oracle(Loss(loss_bound_lr(yf, 0.1)), Loss(0.0), w, c));
    if (policy_oracle(Loss(loss_l2(yf, pair.slow(x))), Loss(0.0), w, c) == Action::InvokeSlow)
      CHECK(sel == Action::InvokeSlow);
  }
}
