#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "modelsel/policy.hpp"
#include "modelsel/rng.hpp"

namespace modelsel::dnn {

/// (epsilon, delta, M): with probability 1 - delta the fast output is within
/// a multiplicative (1 +/- epsilon) band of the slow output; otherwise the
/// squared-L2 gap is capped by M.
struct ProbabilisticBound {
  double epsilon = 0.1;
  double delta = 0.05;
  double m_loss_cap = 1.0;

  /// Throws std::invalid_argument unless 0 < epsilon < 1, 0 <= delta <= 1
  /// and 0 < m_loss_cap < inf.
  void validate() const;
};

/// Fixed smooth map R^n -> [y_lo, y_hi]^m built from random cosine features.
struct SlowPredictor {
  Eigen::MatrixXd frequencies;  // F x n
  Eigen::VectorXd phases;       // F
  Eigen::MatrixXd mixing;       // m x F, each row has unit L1 norm
  double y_lo = 0.1;
  double y_hi = 1.0;

  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const;
  Eigen::Index input_dim() const noexcept { return frequencies.cols(); }
  Eigen::Index output_dim() const noexcept { return mixing.rows(); }
};

struct ProxyOptions {
  Eigen::Index n_features = 32;
  double y_lo = 0.1;
  double y_hi = 1.0;
};

struct FastOutput {
  Eigen::VectorXd y;
  /// True when the tail (additive) branch fired for this input.
  bool tail = false;
};

struct ProxyPair {
  SlowPredictor slow_predictor;
  ProbabilisticBound bound;
  std::uint64_t corruption_seed = 0;

  Eigen::VectorXd slow(const Eigen::VectorXd& x) const { return slow_predictor(x); }

  /// Fast output for the input at position `input_index` of a stream. The
  /// branch and the perturbation are a pure function of
  /// (corruption_seed, input_index), so episodes replay exactly.
  FastOutput fast(const Eigen::VectorXd& x, std::uint64_t input_index) const;
  FastOutput corrupt(const Eigen::VectorXd& y_slow, std::uint64_t input_index) const;

  /// Per-coordinate half-width of the tail band, sqrt(M / m), so the
  /// worst-case squared gap equals M.
  double tail_half_width() const;
};

/// Throws std::invalid_argument on an invalid bound or dimensions.
ProxyPair make_proxy_pair(Rng& rng, Eigen::Index n, Eigen::Index m,
                          const ProbabilisticBound& bound, const ProxyOptions& options = {});

/// delta * M + (1 - delta) * eps^2 |y_fast|^2 / (1 - eps)^2.
double expected_loss_bound_dnn(const Eigen::VectorXd& y_fast, const ProbabilisticBound& bound);

Action select_dnn(const Eigen::VectorXd& y_fast, const ProbabilisticBound& bound,
                  const RewardWeights& weights, const CostSchedule& costs);

/// Standard normal inputs for the proxy predictor.
struct IndexedInput {
  std::uint64_t index = 0;
  Eigen::VectorXd x;
};
std::vector<IndexedInput> sample_inputs(Eigen::Index n, std::size_t count, std::uint64_t seed);

}  // namespace modelsel::dnn
