#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "modelsel/policy.hpp"
#include "modelsel/rng.hpp"

namespace modelsel::linreg {

/// y = A x + b.
struct LinearModel {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;

  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const;
  /// Throws std::invalid_argument on inconsistent dimensions or non-finite entries.
  void validate() const;
};

/// Slow model plus a compressed fast model with
/// fast = diag(scales) * slow, scales in [1, 1 + epsilon].
struct CoresetPair {
  LinearModel slow;
  LinearModel fast;
  double epsilon = 0.1;
  Eigen::VectorXd per_coord_scales;
  std::uint64_t seed = 0;
};

struct CoresetOptions {
  /// Bias magnitude relative to the weight magnitudes before row normalization.
  double bias_share = 0.1;
};

/// Draws a non-negative slow model whose rows are normalized so outputs land
/// in [0, 1] for x in [0, 1]^n, then couples a fast model through per-output
/// scales drawn uniformly from [1, 1 + epsilon].
/// Throws std::invalid_argument unless 0 < epsilon < 1 and n, m >= 1.
CoresetPair generate_coreset_pair(Rng& rng, Eigen::Index n, Eigen::Index m, double epsilon,
                                  const CoresetOptions& options = {});

/// Builds a pair from an explicit slow model and scale vector. Each scale
/// must lie in [1, 1 + epsilon].
CoresetPair make_coreset_pair(LinearModel slow, Eigen::VectorXd scales, double epsilon);

/// Inputs with independent |N(0, scale^2)| coordinates.
struct InputDistribution {
  Eigen::Index n = 4;
  double scale = 0.95;
  std::uint64_t seed = 0;

  Eigen::VectorXd draw(Rng& rng) const;
  /// `count` inputs from a stream seeded by `seed`.
  std::vector<Eigen::VectorXd> sample(std::size_t count) const;
};

/// Squared Euclidean distance. Throws std::invalid_argument on size mismatch.
double loss_l2(const Eigen::VectorXd& y1, const Eigen::VectorXd& y2);

/// eps^2 * |y_fast|^2 / (1 + eps)^2, an upper bound on |y_fast - y_slow|^2.
double loss_bound_lr(const Eigen::VectorXd& y_fast, double epsilon);

Action select_lr(const Eigen::VectorXd& y_fast, double epsilon, const RewardWeights& weights,
                 const CostSchedule& costs);

}  // namespace modelsel::linreg
