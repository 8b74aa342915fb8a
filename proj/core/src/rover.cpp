#include "modelsel/rover.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace modelsel::rover {

void RoverParams::validate() const {
  if (!(wheelbase > 0.0 && dt > 0.0 && v_max > 0.0 && steer_max > 0.0 && accel_max > 0.0))
    throw std::invalid_argument("rover parameters must be positive");
  if (!(steer_max < std::numbers::pi / 2)) throw std::invalid_argument("steer_max must be < pi/2");
  if (!(yaw_uncertainty > 0.0 && yaw_uncertainty < 1.0))
    throw std::invalid_argument("yaw uncertainty must lie in (0, 1)");
}

RoverControl RoverParams::clamp(RoverControl u) const {
  u.accel = std::clamp(u.accel, -accel_max, accel_max);
  u.steer = std::clamp(u.steer, -steer_max, steer_max);
  return u;
}

double normalize_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

Eigen::Vector4d bicycle_map(const Eigen::Vector4d& s, const Eigen::Vector2d& u,
                            const RoverParams& p) {
  const double yaw = s(2), v = s(3);
  return {s(0) + v * std::cos(yaw) * p.dt,
          s(1) + v * std::sin(yaw) * p.dt,
          yaw + v / p.wheelbase * std::tan(u(1)) * p.dt,
          v + u(0) * p.dt};
}

RoverState bicycle_step(const RoverState& s, const RoverControl& u_in, const RoverParams& p,
                        double yaw_rate_scale) {
  const RoverControl u = p.clamp(u_in);
  RoverState n;
  n.x = s.x + s.v * std::cos(s.yaw) * p.dt;
  n.y = s.y + s.v * std::sin(s.yaw) * p.dt;
  n.yaw = normalize_angle(s.yaw + yaw_rate_scale * s.v / p.wheelbase * std::tan(u.steer) * p.dt);
  n.v = std::clamp(s.v + u.accel * p.dt, 0.0, p.v_max);
  return n;
}

Linearization linearize(const RoverState& s, const RoverControl& u, const RoverParams& p) {
  const double c = std::cos(s.yaw), sn = std::sin(s.yaw);
  const double t = std::tan(u.steer);
  const double sec2 = 1.0 / (std::cos(u.steer) * std::cos(u.steer));

  Linearization lin;
  lin.A << 1.0, 0.0, -s.v * sn * p.dt, c * p.dt,
           0.0, 1.0,  s.v * c * p.dt,  sn * p.dt,
           0.0, 0.0,  1.0,             t / p.wheelbase * p.dt,
           0.0, 0.0,  0.0,             1.0;
  lin.B << 0.0, 0.0,
           0.0, 0.0,
           0.0, s.v / p.wheelbase * sec2 * p.dt,
           p.dt, 0.0;
  const Eigen::Vector4d x = s.vec();
  const Eigen::Vector2d uv = u.vec();
  lin.offset = bicycle_map(x, uv, p) - lin.A * x - lin.B * uv;
  return lin;
}

reach::IntervalMatrix build_uncertain_dynamics(const Linearization& lin,
                                               std::span<const RoverControl> planned,
                                               std::size_t horizon, double eta,
                                               const YawRowMask& mask) {
  if (horizon < 1) throw std::invalid_argument("reach horizon must be positive");
  if (planned.size() < horizon)
    throw std::invalid_argument("planned controls do not cover the reach horizon");
  if (!(eta >= 0.0 && eta < 1.0)) throw std::invalid_argument("eta must lie in [0, 1)");

  const Eigen::Index d = augmented_dim(horizon);
  const Eigen::Index one = d - 1;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(d, d);
  M.topLeftCorner<kStateDim, kStateDim>() = lin.A;
  M.block<kStateDim, kControlDim>(0, kStateDim) = lin.B;
  M.block<kStateDim, 1>(0, one) = lin.offset;
  for (std::size_t k = 0; k < horizon; ++k) {
    const Eigen::Index row = kStateDim + kControlDim * static_cast<Eigen::Index>(k);
    const Eigen::Index src = k + 1 < horizon ? row + kControlDim : row;
    M.block<kControlDim, kControlDim>(row, src).setIdentity();
  }
  M(one, one) = 1.0;

  reach::IntervalMatrix lambda = reach::IntervalMatrix::degenerate(M);
  auto widen = [&](Eigen::Index col) {
    const double a = M(kYawRow, col);
    const double l = a * (1.0 - eta), h = a * (1.0 + eta);
    lambda.lo(kYawRow, col) = std::min(l, h);
    lambda.hi(kYawRow, col) = std::max(l, h);
  };
  for (Eigen::Index c = 0; c < kStateDim; ++c)
    if (mask.state[static_cast<std::size_t>(c)]) widen(c);
  if (mask.control)
    for (Eigen::Index c = kStateDim; c < kStateDim + kControlDim; ++c) widen(c);
  if (mask.offset) widen(one);
  return lambda;
}

reach::Box augment_initial_set(const reach::Box& state_box,
                               std::span<const RoverControl> planned, std::size_t horizon) {
  if (state_box.dim() != kStateDim) throw std::invalid_argument("state box must be 4-dimensional");
  if (planned.size() < horizon)
    throw std::invalid_argument("planned controls do not cover the reach horizon");
  const Eigen::Index d = augmented_dim(horizon);
  Eigen::VectorXd lo(d), hi(d);
  lo.head<kStateDim>() = state_box.lo();
  hi.head<kStateDim>() = state_box.hi();
  for (std::size_t k = 0; k < horizon; ++k) {
    const Eigen::Index row = kStateDim + kControlDim * static_cast<Eigen::Index>(k);
    lo.segment<kControlDim>(row) = planned[k].vec();
    hi.segment<kControlDim>(row) = planned[k].vec();
  }
  lo(d - 1) = hi(d - 1) = 1.0;
  return reach::Box(std::move(lo), std::move(hi));
}

}  // namespace modelsel::rover
