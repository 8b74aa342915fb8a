#pragma once

#include <array>
#include <cstddef>
#include <span>

#include <Eigen/Dense>

#include "modelsel/reachability.hpp"

namespace modelsel::rover {

inline constexpr Eigen::Index kStateDim = 4;    // x, y, yaw, v
inline constexpr Eigen::Index kControlDim = 2;  // accel, steer
inline constexpr Eigen::Index kYawRow = 2;

struct RoverState {
  double x = 0.0;    // m
  double y = 0.0;    // m
  double yaw = 0.0;  // rad
  double v = 0.0;    // m/s

  Eigen::Vector4d vec() const { return {x, y, yaw, v}; }
  static RoverState from(const Eigen::Vector4d& s) { return {s(0), s(1), s(2), s(3)}; }
};

struct RoverControl {
  double accel = 0.0;  // m/s^2
  double steer = 0.0;  // rad

  Eigen::Vector2d vec() const { return {accel, steer}; }
};

struct RoverParams {
  double wheelbase = 2.0;
  double dt = 0.1;
  double v_max = 2.0;
  double steer_max = 0.6;
  double accel_max = 1.0;
  /// Relative half-width of the yaw-row perturbation.
  double yaw_uncertainty = 0.05;

  void validate() const;
  RoverControl clamp(RoverControl u) const;
};

/// Wraps to (-pi, pi].
double normalize_angle(double a);

/// Kinematic bicycle Euler step with control clamping, speed clamping to
/// [0, v_max] and yaw normalization. `yaw_rate_scale` multiplies the yaw
/// rate and models the perturbation the uncertain dynamics account for.
RoverState bicycle_step(const RoverState& s, const RoverControl& u, const RoverParams& p,
                        double yaw_rate_scale = 1.0);

/// Unclamped, unwrapped Euler map; the function the Jacobians differentiate.
Eigen::Vector4d bicycle_map(const Eigen::Vector4d& s, const Eigen::Vector2d& u,
                            const RoverParams& p);

/// x+ ≈ A x + B u + offset around an operating point.
struct Linearization {
  Eigen::Matrix4d A;
  Eigen::Matrix<double, 4, 2> B;
  Eigen::Vector4d offset;
};

Linearization linearize(const RoverState& s, const RoverControl& u, const RoverParams& p);

/// Which yaw-row entries of the augmented matrix receive the ±eta widening.
struct YawRowMask {
  std::array<bool, 4> state{true, true, true, true};
  bool control = true;
  bool offset = true;
};

/// Dimension of the augmented vector [state; u_0 .. u_{t-1}; 1].
constexpr Eigen::Index augmented_dim(std::size_t horizon) {
  return kStateDim + kControlDim * static_cast<Eigen::Index>(horizon) + 1;
}

/// Uncertain linear dynamics over the augmented vector z = [x; u_0; ...;
/// u_{t-1}; 1]. The state block applies A, B (on the u_0 slot) and the
/// affine offset; the control slots shift up by one each step (the last one
/// holds), so t steps replay the planned open-loop sequence. Yaw-row entries
/// selected by `mask` are widened to [a(1-eta), a(1+eta)] (ordered for a < 0);
/// every other entry is exact.
/// Throws std::invalid_argument if fewer than `horizon` controls are given.
reach::IntervalMatrix build_uncertain_dynamics(const Linearization& lin,
                                               std::span<const RoverControl> planned,
                                               std::size_t horizon, double eta,
                                               const YawRowMask& mask = {});

/// Initial augmented box: the state box followed by the exact planned
/// controls and the constant 1.
reach::Box augment_initial_set(const reach::Box& state_box,
                               std::span<const RoverControl> planned, std::size_t horizon);

}  // namespace modelsel::rover
