#include "modelsel/coreset_linreg.hpp"

#include <cmath>
#include <stdexcept>

namespace modelsel::linreg {
namespace {

void check_epsilon(double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw std::invalid_argument("coreset epsilon must lie in (0, 1)");
}

}  // namespace

Eigen::VectorXd LinearModel::operator()(const Eigen::VectorXd& x) const {
  if (x.size() != A.cols())
    throw std::invalid_argument("linear model input has wrong dimension");
  return A * x + b;
}

void LinearModel::validate() const {
  if (A.rows() != b.size()) throw std::invalid_argument("A and b row counts differ");
  if (A.size() == 0) throw std::invalid_argument("empty linear model");
  if (!A.allFinite() || !b.allFinite())
    throw std::invalid_argument("linear model has non-finite entries");
}

CoresetPair make_coreset_pair(LinearModel slow, Eigen::VectorXd scales, double epsilon) {
  check_epsilon(epsilon);
  slow.validate();
  if (scales.size() != slow.A.rows())
    throw std::invalid_argument("one scale per output coordinate is required");
  for (Eigen::Index i = 0; i < scales.size(); ++i)
    if (!(scales(i) >= 1.0 && scales(i) <= 1.0 + epsilon))
      throw std::invalid_argument("per-coordinate scale outside [1, 1 + epsilon]");

  CoresetPair pair;
  pair.fast.A = scales.asDiagonal() * slow.A;
  pair.fast.b = scales.asDiagonal() * slow.b;
  pair.slow = std::move(slow);
  pair.epsilon = epsilon;
  pair.per_coord_scales = std::move(scales);
  return pair;
}

CoresetPair generate_coreset_pair(Rng& rng, Eigen::Index n, Eigen::Index m, double epsilon,
                                  const CoresetOptions& options) {
  check_epsilon(epsilon);
  if (n < 1 || m < 1) throw std::invalid_argument("model dimensions must be positive");
  if (!(options.bias_share >= 0.0)) throw std::invalid_argument("bias_share must be >= 0");

  LinearModel slow{Eigen::MatrixXd(m, n), Eigen::VectorXd(m)};
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) slow.A(i, j) = std::abs(rng.normal());
    slow.b(i) = options.bias_share * std::abs(rng.normal());
    const double row_max = slow.A.row(i).sum() + slow.b(i);
    slow.A.row(i) /= row_max;
    slow.b(i) /= row_max;
  }

  Eigen::VectorXd scales(m);
  for (Eigen::Index i = 0; i < m; ++i) scales(i) = rng.uniform(1.0, 1.0 + epsilon);
  return make_coreset_pair(std::move(slow), std::move(scales), epsilon);
}

Eigen::VectorXd InputDistribution::draw(Rng& rng) const {
  Eigen::VectorXd x(n);
  for (Eigen::Index j = 0; j < n; ++j) x(j) = scale * std::abs(rng.normal());
  return x;
}

std::vector<Eigen::VectorXd> InputDistribution::sample(std::size_t count) const {
  if (n < 1 || !(scale > 0.0)) throw std::invalid_argument("invalid input distribution");
  Rng rng(seed);
  std::vector<Eigen::VectorXd> xs;
  xs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) xs.push_back(draw(rng));
  return xs;
}

double loss_l2(const Eigen::VectorXd& y1, const Eigen::VectorXd& y2) {
  if (y1.size() != y2.size()) throw std::invalid_argument("loss_l2: dimension mismatch");
  return (y1 - y2).squaredNorm();
}

double loss_bound_lr(const Eigen::VectorXd& y_fast, double epsilon) {
  const double ratio = epsilon / (1.0 + epsilon);
  return ratio * ratio * y_fast.squaredNorm();
}

Action select_lr(const Eigen::VectorXd& y_fast, double epsilon, const RewardWeights& weights,
                 const CostSchedule& costs) {
  return select_generic(loss_bound_lr(y_fast, epsilon), decision_threshold(weights, costs));
}

}  // namespace modelsel::linreg
