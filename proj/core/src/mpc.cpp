#include "modelsel/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace modelsel::rover {

void MpcSettings::validate() const {
  if (horizon < 1) throw std::invalid_argument("mpc horizon must be positive");
  if ((q_diag.array() < 0.0).any() || !(r_diag.array() > 0.0).all())
    throw std::invalid_argument("mpc weights: Q must be >= 0 and R > 0");
  if (!(target_speed > 0.0 && min_speed > 0.0 && brake_fraction > 0.0))
    throw std::invalid_argument("mpc speed profile parameters must be positive");
}

std::vector<Eigen::Vector2d> solve_lq(const MpcProblem& prob, const Eigen::Vector4d& x0) {
  const std::size_t H = prob.horizon();
  if (H == 0 || prob.B.size() != H || prob.c.size() != H || prob.targets.size() != H)
    throw std::invalid_argument("inconsistent LQ problem");

  std::vector<Eigen::Matrix<double, 2, 4>> K(H);
  std::vector<Eigen::Vector2d> kff(H);
  Eigen::Matrix4d P = prob.Q;
  Eigen::Vector4d p = -prob.Q * prob.targets[H - 1];

  for (std::size_t k = H; k-- > 0;) {
    const auto& A = prob.A[k];
    const auto& B = prob.B[k];
    const auto& c = prob.c[k];
    const Eigen::Matrix2d S = prob.R + B.transpose() * P * B;
    const Eigen::LDLT<Eigen::Matrix2d> solver(S);
    K[k] = solver.solve(B.transpose() * P * A);
    kff[k] = solver.solve(B.transpose() * (P * c + p));
    if (k == 0) break;

    const Eigen::Matrix4d M = A - B * K[k];
    const Eigen::Vector4d d = c - B * kff[k];
    const Eigen::Matrix4d P_next =
        prob.Q + K[k].transpose() * prob.R * K[k] + M.transpose() * P * M;
    const Eigen::Vector4d p_next = -prob.Q * prob.targets[k - 1] +
                                   K[k].transpose() * prob.R * kff[k] +
                                   M.transpose() * (P * d + p);
    P = 0.5 * (P_next + P_next.transpose());
    p = p_next;
  }

  std::vector<Eigen::Vector2d> u(H);
  Eigen::Vector4d x = x0;
  for (std::size_t k = 0; k < H; ++k) {
    u[k] = -K[k] * x - kff[k];
    x = prob.A[k] * x + prob.B[k] * u[k] + prob.c[k];
  }
  return u;
}

double mpc_objective(const MpcProblem& prob, const Eigen::Vector4d& x0,
                     const std::vector<Eigen::Vector2d>& u) {
  if (u.size() != prob.horizon()) throw std::invalid_argument("control sequence length mismatch");
  double J = 0.0;
  Eigen::Vector4d x = x0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    J += u[k].dot(prob.R * u[k]);
    x = prob.A[k] * x + prob.B[k] * u[k] + prob.c[k];
    const Eigen::Vector4d e = x - prob.targets[k];
    J += e.dot(prob.Q * e);
  }
  return J;
}

double reference_speed(const ReferenceTrajectory& ref, double s, const MpcSettings& mpc,
                       const RoverParams& p) {
  const double remaining = std::max(0.0, ref.length() - s);
  const double braking = std::sqrt(2.0 * mpc.brake_fraction * p.accel_max * remaining);
  return std::clamp(std::min(mpc.target_speed, braking), std::min(mpc.min_speed, p.v_max),
                    p.v_max);
}

MpcProblem build_mpc_problem(const ReferenceTrajectory& ref, const RoverState& s,
                             const MpcSettings& mpc, const RoverParams& p,
                             Eigen::Vector4d& x0_out, std::size_t hint) {
  if (ref.points.empty()) throw std::invalid_argument("empty reference trajectory");
  const std::size_t H = mpc.horizon;

  MpcProblem prob;
  prob.Q = mpc.q_diag.asDiagonal();
  prob.R = mpc.r_diag.asDiagonal();

  double s_ref = ref.project(s.x, s.y, hint);
  const ReferencePoint here = ref.at(s_ref);
  constexpr double two_pi = 2.0 * std::numbers::pi;
  RoverState cur = s;
  cur.yaw = here.yaw + std::remainder(s.yaw - here.yaw, two_pi);
  x0_out = cur.vec();

  auto nominal_steer = [&](double kappa) {
    return std::clamp(std::atan(p.wheelbase * kappa), -p.steer_max, p.steer_max);
  };

  RoverState lin_state = cur;
  RoverControl lin_u{0.0, nominal_steer(here.curvature)};
  for (std::size_t k = 0; k < H; ++k) {
    const Linearization lin = linearize(lin_state, lin_u, p);
    prob.A.push_back(lin.A);
    prob.B.push_back(lin.B);
    prob.c.push_back(lin.offset);

    const double v_ref = reference_speed(ref, s_ref, mpc, p);
    s_ref += v_ref * p.dt;
    const ReferencePoint r = ref.at(s_ref);
    const double v_target = reference_speed(ref, s_ref, mpc, p);
    prob.targets.emplace_back(r.x, r.y, r.yaw, v_target);

    lin_state = {r.x, r.y, r.yaw, v_target};
    lin_u = {0.0, nominal_steer(r.curvature)};
  }
  return prob;
}

std::vector<RoverControl> mpc_track(const ReferenceTrajectory& ref, const RoverState& s,
                                    std::size_t horizon, const RoverParams& p,
                                    const MpcSettings& mpc, std::size_t hint) {
  if (ref.points.empty()) throw std::invalid_argument("empty reference trajectory");
  if (horizon < 1) throw std::invalid_argument("mpc horizon must be positive");
  MpcSettings settings = mpc;
  settings.horizon = horizon;
  Eigen::Vector4d x0;
  const MpcProblem prob = build_mpc_problem(ref, s, settings, p, x0, hint);
  const auto u = solve_lq(prob, x0);
  std::vector<RoverControl> out;
  out.reserve(u.size());
  for (const auto& uk : u) out.push_back(p.clamp({uk(0), uk(1)}));
  return out;
}

}  // namespace modelsel::rover
