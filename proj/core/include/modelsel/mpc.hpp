#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "modelsel/rover.hpp"
#include "modelsel/spline.hpp"

namespace modelsel::rover {

struct MpcSettings {
  std::size_t horizon = 5;
  Eigen::Vector4d q_diag{1.0, 1.0, 0.5, 0.5};
  Eigen::Vector2d r_diag{0.01, 0.01};
  /// Cruise speed of the reference profile, m/s.
  double target_speed = 1.5;
  /// Reference speed never drops below this, so the goal is always approached.
  double min_speed = 0.3;
  /// The profile slows down as if braking at this fraction of accel_max.
  double brake_fraction = 0.5;

  /// Throws std::invalid_argument on a zero horizon, negative weights or
  /// non-positive speeds.
  void validate() const;
};

/// Time-varying affine LQ problem:
///   x_{k+1} = A_k x_k + B_k u_k + c_k,  k = 0 .. H-1
///   J = sum_{k=1..H} (x_k - r_k)' Q (x_k - r_k) + sum_{k=0..H-1} u_k' R u_k
struct MpcProblem {
  std::vector<Eigen::Matrix4d> A;
  std::vector<Eigen::Matrix<double, 4, 2>> B;
  std::vector<Eigen::Vector4d> c;
  /// r_1 .. r_H.
  std::vector<Eigen::Vector4d> targets;
  Eigen::Matrix4d Q = Eigen::Matrix4d::Identity();
  Eigen::Matrix2d R = Eigen::Matrix2d::Identity();

  std::size_t horizon() const noexcept { return A.size(); }
};

/// Exact minimizer of J from x0 (backward Riccati recursion, forward rollout).
std::vector<Eigen::Vector2d> solve_lq(const MpcProblem& prob, const Eigen::Vector4d& x0);

/// J evaluated for the control sequence `u` on the problem's affine model.
double mpc_objective(const MpcProblem& prob, const Eigen::Vector4d& x0,
                     const std::vector<Eigen::Vector2d>& u);

/// Reference speed at arc length s.
double reference_speed(const ReferenceTrajectory& ref, double s, const MpcSettings& mpc,
                       const RoverParams& p);

/// Linearizes the bicycle at the current state (k = 0) and at reference
/// points advanced along the path by the reference speed (k >= 1). The state
/// yaw in `x0_out` is unwrapped onto the reference yaw branch.
MpcProblem build_mpc_problem(const ReferenceTrajectory& ref, const RoverState& s,
                             const MpcSettings& mpc, const RoverParams& p,
                             Eigen::Vector4d& x0_out, std::size_t hint = 0);

/// LQ tracking controls for `horizon` steps, each clamped to the rover's
/// bounds. Throws std::invalid_argument on an empty reference or horizon 0.
std::vector<RoverControl> mpc_track(const ReferenceTrajectory& ref, const RoverState& s,
                                    std::size_t horizon, const RoverParams& p,
                                    const MpcSettings& mpc = {}, std::size_t hint = 0);

}  // namespace modelsel::rover
