#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "modelsel/policy.hpp"
#include "modelsel/rng.hpp"

namespace modelsel::reach {

using Index = Eigen::Index;

/// Axis-aligned box. Emptiness is an explicit flag, never crossed bounds.
class Box {
 public:
  Box() = default;
  /// Throws std::invalid_argument if sizes differ, any bound is NaN, or lo > hi.
  Box(Eigen::VectorXd lo, Eigen::VectorXd hi);

  static Box empty(Index dim);
  static Box point(const Eigen::VectorXd& x);
  /// [center - radius, center + radius] per coordinate.
  static Box around(const Eigen::VectorXd& center, const Eigen::VectorXd& radius);

  Index dim() const noexcept { return lo_.size(); }
  bool is_empty() const noexcept { return empty_; }
  const Eigen::VectorXd& lo() const noexcept { return lo_; }
  const Eigen::VectorXd& hi() const noexcept { return hi_; }
  Eigen::VectorXd width() const { return hi_ - lo_; }

  bool contains(const Eigen::VectorXd& x) const;
  bool contains(const Box& other) const;
  /// Grows this box to cover `other` (componentwise min/max).
  void expand_to(const Box& other);

  friend bool operator==(const Box& a, const Box& b);

 private:
  Eigen::VectorXd lo_;
  Eigen::VectorXd hi_;
  bool empty_ = true;
};

/// Entrywise-bounded matrix; each entry lies in [lo(i, j), hi(i, j)].
struct IntervalMatrix {
  Eigen::MatrixXd lo;
  Eigen::MatrixXd hi;

  static IntervalMatrix degenerate(const Eigen::MatrixXd& m) { return {m, m}; }
  Index rows() const noexcept { return lo.rows(); }
  Index cols() const noexcept { return lo.cols(); }
  bool contains(const Eigen::MatrixXd& m) const;
  /// Throws std::invalid_argument unless square, same shape, finite, lo <= hi.
  void validate() const;
};

/// Smallest N with (1 - q)^N <= delta / (2 n t), q = (1 - p) / (2 n t).
///
/// Each of the 2n facets at each of t timesteps is an order statistic of the
/// N samples; the bound makes every facet's exceedance probability at most q
/// with confidence 1 - delta, so by a union bound a fresh sampled trajectory
/// stays inside the hull with probability at least p.
/// Throws std::invalid_argument unless 0 < p, delta < 1 and n, t >= 1.
std::size_t required_samples(double p, double delta, Index n, std::size_t t);

struct StatReachConfig {
  double confidence = 0.9;  // p
  double type1 = 0.05;      // delta
  std::size_t horizon = 1;  // t
  double cost = 0.0;
  std::size_t n_samples = 1;

  /// N from required_samples(p, delta, n, t); cost = cost_per_sample * N.
  static StatReachConfig from_confidence(double p, double delta, Index n, std::size_t t,
                                         double cost_per_sample = 0.0);
};

struct ReachResult {
  /// Hull at timesteps 1..t.
  std::vector<Box> boxes;
  std::size_t samples_used = 0;
  double cost = 0.0;
};

/// Obstacles living in the subspace spanned by `coords`.
struct UnsafeSet {
  std::vector<Box> obstacles;
  std::vector<Index> coords;

  /// Throws std::invalid_argument on an empty coordinate list or obstacles of
  /// the wrong dimension.
  void validate() const;
};

/// Each entry independently uniform on [lo, hi]. Degenerate entries are
/// copied and consume no randomness.
Eigen::MatrixXd sample_matrix(const IntervalMatrix& lambda, Rng& rng);

/// Tightest box containing {A x : x in S}, by interval arithmetic.
/// Throws std::invalid_argument on dimension mismatch.
Box step_box(const Eigen::MatrixXd& A, const Box& S);

/// Samples cfg.n_samples matrices from lambda and returns, per timestep, the
/// hull of the propagated boxes. Sample k draws from a stream derived from
/// (seed, k), and partial hulls are merged with exact min/max, so any
/// `threads` value yields bit-identical output.
ReachResult reach_sampled(const IntervalMatrix& lambda, const Box& x0,
                          const StatReachConfig& cfg, std::uint64_t seed,
                          unsigned threads = 1);

/// Minkowski sum with the infinity-norm ball of radius mu.
Box bloat(const Box& S, double mu);
std::vector<Box> bloat(std::span<const Box> boxes, double mu);

struct BloatCalibration {
  double mu = 0.0;
  /// 1 - 1/mu when mu > 1, otherwise not applicable.
  std::optional<double> epsilon;
  std::size_t n_runs = 0;
};

/// Smallest mu >= 0 with slow ⊆ bloat(fast, mu) for every pair and timestep,
/// measured over `coords` (all coordinates when empty).
/// Throws std::invalid_argument on an empty set or mismatched pairs.
BloatCalibration calibrate_bloat(std::span<const std::pair<ReachResult, ReachResult>> runs,
                                 std::span<const Index> coords = {});

/// Closed overlap of the projection of S with any obstacle.
/// Throws std::out_of_range if a coordinate index exceeds S's dimension.
bool intersects(const Box& S, const UnsafeSet& U);

/// +inf if any box meets U, else 0.
Loss loss_nav(std::span<const Box> boxes, const UnsafeSet& U);

/// InvokeSlow iff some fast box, bloated by mu, meets U.
Action select_rs(const ReachResult& fast, double mu, const UnsafeSet& U);

}  // namespace modelsel::reach
