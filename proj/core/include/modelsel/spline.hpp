#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace modelsel::rover {

/// Natural cubic spline through (t_i, v_i), t strictly increasing.
class CubicSpline {
 public:
  CubicSpline() = default;
  /// Throws std::invalid_argument on fewer than two knots or non-increasing t.
  CubicSpline(std::vector<double> t, std::vector<double> v);

  double value(double t) const;
  double first_derivative(double t) const;
  double second_derivative(double t) const;

 private:
  std::size_t segment(double t) const;

  std::vector<double> t_;
  std::vector<double> a_, b_, c_, d_;
};

/// x(s), y(s) splines parametrized by cumulative chord length.
class CubicSpline2D {
 public:
  /// Throws std::invalid_argument on fewer than two waypoints or duplicate
  /// consecutive waypoints.
  explicit CubicSpline2D(std::span<const Eigen::Vector2d> waypoints);

  double length() const noexcept { return s_.back(); }
  const std::vector<double>& knots() const noexcept { return s_; }
  Eigen::Vector2d position(double s) const;
  double yaw(double s) const;
  double curvature(double s) const;

 private:
  std::vector<double> s_;
  CubicSpline sx_, sy_;
};

struct ReferencePoint {
  double s = 0.0;
  double x = 0.0;
  double y = 0.0;
  /// Unwrapped along the path, so consecutive samples never jump by 2*pi.
  double yaw = 0.0;
  double curvature = 0.0;
};

struct ReferenceTrajectory {
  std::vector<ReferencePoint> points;
  double ds = 0.1;

  double length() const { return points.empty() ? 0.0 : points.back().s; }
  /// Linear interpolation between samples; s is clamped to [0, length].
  ReferencePoint at(double s) const;
  /// Index of the sample closest to (x, y) within [hint, hint + window).
  std::size_t nearest_index(double x, double y, std::size_t hint = 0,
                            std::size_t window = 200) const;
  /// Arc length of the projection of (x, y) onto the reference near `hint`.
  double project(double x, double y, std::size_t hint = 0) const;
};

/// Samples the spline through `waypoints` every `ds` of arc length (the end
/// point is always included). Throws std::invalid_argument on ds <= 0 or
/// invalid waypoints.
ReferenceTrajectory cubic_spline_plan(std::span<const Eigen::Vector2d> waypoints, double ds);

}  // namespace modelsel::rover
