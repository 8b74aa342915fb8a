#include "modelsel/dnn_proxy.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace modelsel::dnn {

void ProbabilisticBound::validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw std::invalid_argument("dnn epsilon must lie in (0, 1)");
  if (!(delta >= 0.0 && delta <= 1.0))
    throw std::invalid_argument("dnn delta must lie in [0, 1]");
  if (!(m_loss_cap > 0.0) || !std::isfinite(m_loss_cap))
    throw std::invalid_argument("loss cap M must be positive and finite");
}

Eigen::VectorXd SlowPredictor::operator()(const Eigen::VectorXd& x) const {
  if (x.size() != frequencies.cols())
    throw std::invalid_argument("proxy predictor input has wrong dimension");
  const Eigen::VectorXd features = (frequencies * x + phases).array().cos().matrix();
  const Eigen::VectorXd mixed = mixing * features;  // in [-1, 1]
  return (y_lo + (y_hi - y_lo) * 0.5 * (mixed.array() + 1.0)).matrix();
}

double ProxyPair::tail_half_width() const {
  return std::sqrt(bound.m_loss_cap / static_cast<double>(slow_predictor.output_dim()));
}

FastOutput ProxyPair::corrupt(const Eigen::VectorXd& y_slow, std::uint64_t input_index) const {
  Rng rng(derive_seed(corruption_seed, {input_index}));
  FastOutput out;
  out.tail = rng.bernoulli(bound.delta);
  out.y.resize(y_slow.size());
  if (out.tail) {
    const double h = tail_half_width();
    for (Eigen::Index k = 0; k < y_slow.size(); ++k) out.y(k) = y_slow(k) + rng.uniform(-h, h);
  } else {
    for (Eigen::Index k = 0; k < y_slow.size(); ++k)
      out.y(k) = y_slow(k) * rng.uniform(1.0 - bound.epsilon, 1.0 + bound.epsilon);
  }
  return out;
}

FastOutput ProxyPair::fast(const Eigen::VectorXd& x, std::uint64_t input_index) const {
  return corrupt(slow(x), input_index);
}

ProxyPair make_proxy_pair(Rng& rng, Eigen::Index n, Eigen::Index m,
                          const ProbabilisticBound& bound, const ProxyOptions& options) {
  bound.validate();
  if (n < 1 || m < 1 || options.n_features < 1)
    throw std::invalid_argument("proxy dimensions must be positive");
  if (!(options.y_lo > 0.0 && options.y_hi > options.y_lo))
    throw std::invalid_argument("proxy output range must satisfy 0 < y_lo < y_hi");

  const Eigen::Index F = options.n_features;
  ProxyPair pair;
  pair.bound = bound;
  auto& p = pair.slow_predictor;
  p.frequencies.resize(F, n);
  p.phases.resize(F);
  p.mixing.resize(m, F);
  p.y_lo = options.y_lo;
  p.y_hi = options.y_hi;
  for (Eigen::Index f = 0; f < F; ++f) {
    for (Eigen::Index j = 0; j < n; ++j) p.frequencies(f, j) = rng.normal();
    p.phases(f) = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }
  for (Eigen::Index k = 0; k < m; ++k) {
    for (Eigen::Index f = 0; f < F; ++f) p.mixing(k, f) = rng.normal();
    p.mixing.row(k) /= p.mixing.row(k).lpNorm<1>();
  }
  pair.corruption_seed = rng();
  return pair;
}

double expected_loss_bound_dnn(const Eigen::VectorXd& y_fast, const ProbabilisticBound& bound) {
  const double ratio = bound.epsilon / (1.0 - bound.epsilon);
  return bound.delta * bound.m_loss_cap +
         (1.0 - bound.delta) * ratio * ratio * y_fast.squaredNorm();
}

Action select_dnn(const Eigen::VectorXd& y_fast, const ProbabilisticBound& bound,
                  const RewardWeights& weights, const CostSchedule& costs) {
  return select_generic(expected_loss_bound_dnn(y_fast, bound),
                        decision_threshold(weights, costs));
}

std::vector<IndexedInput> sample_inputs(Eigen::Index n, std::size_t count, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("input dimension must be positive");
  Rng rng(seed);
  std::vector<IndexedInput> xs(count);
  for (std::size_t i = 0; i < count; ++i) {
    xs[i].index = i;
    xs[i].x.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) xs[i].x(j) = rng.normal();
  }
  return xs;
}

}  // namespace modelsel::dnn
