#include "modelsel/spline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace modelsel::rover {

CubicSpline::CubicSpline(std::vector<double> t, std::vector<double> v) : t_(std::move(t)) {
  const std::size_t n = t_.size();
  if (n < 2 || v.size() != n) throw std::invalid_argument("spline needs >= 2 matching knots");
  std::vector<double> h(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = t_[i + 1] - t_[i];
    if (!(h[i] > 0.0)) throw std::invalid_argument("spline knots must be strictly increasing");
  }

  // Natural end conditions: c_0 = c_{n-1} = 0. Tridiagonal solve (Thomas).
  std::vector<double> c(n, 0.0);
  if (n > 2) {
    const std::size_t m = n - 2;
    std::vector<double> diag(m), upper(m), rhs(m);
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t i = k + 1;
      diag[k] = 2.0 * (h[i - 1] + h[i]);
      upper[k] = h[i];
      rhs[k] = 3.0 * ((v[i + 1] - v[i]) / h[i] - (v[i] - v[i - 1]) / h[i - 1]);
    }
    for (std::size_t k = 1; k < m; ++k) {
      const double w = h[k] / diag[k - 1];
      diag[k] -= w * upper[k - 1];
      rhs[k] -= w * rhs[k - 1];
    }
    c[m] = rhs[m - 1] / diag[m - 1];
    for (std::size_t k = m - 1; k-- > 0;) c[k + 1] = (rhs[k] - upper[k] * c[k + 2]) / diag[k];
  }

  a_ = v;
  c_ = c;
  b_.resize(n - 1);
  d_.resize(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    d_[i] = (c[i + 1] - c[i]) / (3.0 * h[i]);
    b_[i] = (v[i + 1] - v[i]) / h[i] - h[i] * (c[i + 1] + 2.0 * c[i]) / 3.0;
  }
}

std::size_t CubicSpline::segment(double t) const {
  const auto it = std::upper_bound(t_.begin(), t_.end(), t);
  const auto idx = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, it - t_.begin() - 1));
  return std::min(idx, t_.size() - 2);
}

double CubicSpline::value(double t) const {
  const std::size_t i = segment(t);
  const double dx = t - t_[i];
  return a_[i] + dx * (b_[i] + dx * (c_[i] + dx * d_[i]));
}

double CubicSpline::first_derivative(double t) const {
  const std::size_t i = segment(t);
  const double dx = t - t_[i];
  return b_[i] + dx * (2.0 * c_[i] + 3.0 * d_[i] * dx);
}

double CubicSpline::second_derivative(double t) const {
  const std::size_t i = segment(t);
  const double dx = t - t_[i];
  return 2.0 * c_[i] + 6.0 * d_[i] * dx;
}

CubicSpline2D::CubicSpline2D(std::span<const Eigen::Vector2d> waypoints) {
  if (waypoints.size() < 2) throw std::invalid_argument("need at least two waypoints");
  std::vector<double> xs, ys;
  s_.push_back(0.0);
  for (std::size_t i = 0; i < waypoints.size(); ++i) {
    xs.push_back(waypoints[i].x());
    ys.push_back(waypoints[i].y());
    if (i > 0) {
      const double d = (waypoints[i] - waypoints[i - 1]).norm();
      if (!(d > 0.0)) throw std::invalid_argument("duplicate consecutive waypoints");
      s_.push_back(s_.back() + d);
    }
  }
  sx_ = CubicSpline(s_, xs);
  sy_ = CubicSpline(s_, ys);
}

Eigen::Vector2d CubicSpline2D::position(double s) const { return {sx_.value(s), sy_.value(s)}; }

double CubicSpline2D::yaw(double s) const {
  return std::atan2(sy_.first_derivative(s), sx_.first_derivative(s));
}

double CubicSpline2D::curvature(double s) const {
  const double dx = sx_.first_derivative(s), dy = sy_.first_derivative(s);
  const double ddx = sx_.second_derivative(s), ddy = sy_.second_derivative(s);
  return (dx * ddy - dy * ddx) / std::pow(dx * dx + dy * dy, 1.5);
}

ReferenceTrajectory cubic_spline_plan(std::span<const Eigen::Vector2d> waypoints, double ds) {
  if (!(ds > 0.0)) throw std::invalid_argument("sampling step ds must be positive");
  const CubicSpline2D spline(waypoints);
  ReferenceTrajectory ref;
  ref.ds = ds;

  const double total = spline.length();
  const auto n = static_cast<std::size_t>(std::floor(total / ds));
  std::vector<double> samples;
  for (std::size_t i = 0; i <= n; ++i) samples.push_back(static_cast<double>(i) * ds);
  if (total - samples.back() > 1e-9 * std::max(1.0, total)) samples.push_back(total);
  else samples.back() = total;

  double prev_yaw = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double s = samples[i];
    const Eigen::Vector2d pos = spline.position(s);
    double yaw = spline.yaw(s);
    if (i > 0) {
      constexpr double two_pi = 2.0 * std::numbers::pi;
      yaw = prev_yaw + std::remainder(yaw - prev_yaw, two_pi);
    }
    prev_yaw = yaw;
    ref.points.push_back({s, pos.x(), pos.y(), yaw, spline.curvature(s)});
  }
  return ref;
}

ReferencePoint ReferenceTrajectory::at(double s) const {
  if (points.empty()) throw std::invalid_argument("empty reference trajectory");
  if (points.size() == 1 || s <= points.front().s) return points.front();
  if (s >= points.back().s) return points.back();
  const auto it = std::upper_bound(points.begin(), points.end(), s,
                                   [](double v, const ReferencePoint& p) { return v < p.s; });
  const ReferencePoint& b = *it;
  const ReferencePoint& a = *(it - 1);
  const double w = (s - a.s) / (b.s - a.s);
  return {s, a.x + w * (b.x - a.x), a.y + w * (b.y - a.y), a.yaw + w * (b.yaw - a.yaw),
          a.curvature + w * (b.curvature - a.curvature)};
}

std::size_t ReferenceTrajectory::nearest_index(double x, double y, std::size_t hint,
                                               std::size_t window) const {
  if (points.empty()) throw std::invalid_argument("empty reference trajectory");
  hint = std::min(hint, points.size() - 1);
  const std::size_t end = std::min(points.size(), hint + window);
  std::size_t best = hint;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = hint; i < end; ++i) {
    const double d = std::hypot(points[i].x - x, points[i].y - y);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

double ReferenceTrajectory::project(double x, double y, std::size_t hint) const {
  const std::size_t i = nearest_index(x, y, hint);
  double best_s = points[i].s;
  double best_d = std::hypot(points[i].x - x, points[i].y - y);
  auto try_segment = [&](std::size_t a, std::size_t b) {
    const Eigen::Vector2d pa(points[a].x, points[a].y), pb(points[b].x, points[b].y);
    const Eigen::Vector2d seg = pb - pa;
    const double len2 = seg.squaredNorm();
    if (len2 <= 0.0) return;
    const double w = std::clamp((Eigen::Vector2d(x, y) - pa).dot(seg) / len2, 0.0, 1.0);
    const double d = (pa + w * seg - Eigen::Vector2d(x, y)).norm();
    if (d < best_d) {
      best_d = d;
      best_s = points[a].s + w * (points[b].s - points[a].s);
    }
  };
  if (i > 0) try_segment(i - 1, i);
  if (i + 1 < points.size()) try_segment(i, i + 1);
  return best_s;
}

}  // namespace modelsel::rover
