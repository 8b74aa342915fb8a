#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "modelsel/obstacles.hpp"
#include "modelsel/rover.hpp"

using namespace modelsel;
using namespace modelsel::rover;

namespace {

Eigen::Matrix<double, 4, 6> central_jacobian(const Eigen::Vector4d& x, const Eigen::Vector2d& u,
                                             const RoverParams& p, double h) {
  Eigen::Matrix<double, 6, 1> z;
  z << x, u;
  Eigen::Matrix<double, 4, 6> J;
  for (int i = 0; i < 6; ++i) {
    Eigen::Matrix<double, 6, 1> zp = z, zm = z;
    zp[i] += h;
    zm[i] -= h;
    J.col(i) = (bicycle_map(zp.head<4>(), zp.tail<2>(), p) -
                bicycle_map(zm.head<4>(), zm.tail<2>(), p)) /
               (2.0 * h);
  }
  return J;
}

}  // namespace

TEST_CASE("normalize_angle wraps to (-pi, pi]") {
  using std::numbers::pi;
  CHECK(normalize_angle(pi) == doctest::Approx(pi));
  CHECK(normalize_angle(-pi) == doctest::Approx(pi));
  CHECK(normalize_angle(3 * pi / 2) == doctest::Approx(-pi / 2));
  CHECK(normalize_angle(0.25) == 0.25);
  for (double a = -20.0; a < 20.0; a += 0.37) {
    const double w = normalize_angle(a);
    CHECK(w > -pi);
    CHECK(w <= pi);
    CHECK(std::remainder(w - a, 2 * pi) == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("bicycle_step") {
  const RoverParams p;
  const RoverState s{1.0, 2.0, 0.3, 1.2};
  const RoverState straight = bicycle_step(s, {0.0, 0.0}, p);
  CHECK(straight.x == doctest::Approx(1.0 + 1.2 * std::cos(0.3) * 0.1));
  CHECK(straight.y == doctest::Approx(2.0 + 1.2 * std::sin(0.3) * 0.1));
  CHECK(straight.yaw == 0.3);
  CHECK(straight.v == 1.2);

  const RoverState still{3.0, -1.0, 2.0, 0.0};
  const RoverState after = bicycle_step(still, {0.0, 0.4}, p);
  CHECK(after.x == still.x);
  CHECK(after.y == still.y);
  CHECK(after.yaw == still.yaw);
  CHECK(after.v == 0.0);

  RoverParams q;
  q.wheelbase = 1.0;
  q.steer_max = 1.0;
  const RoverState turned = bicycle_step({0, 0, 0, 1.0}, {0.0, std::numbers::pi / 4}, q);
  CHECK(turned.yaw == doctest::Approx(0.1).epsilon(1e-12));

  // Clamping.
  const RoverState fast = bicycle_step({0, 0, 0, 1.95}, {5.0, 0.0}, p);
  CHECK(fast.v == p.v_max);
  const RoverState stop = bicycle_step({0, 0, 0, 0.05}, {-1.0, 0.0}, p);
  CHECK(stop.v == 0.0);
  const RoverState over = bicycle_step({0, 0, 0, 1.0}, {0.0, 2.0}, p);
  CHECK(over.yaw == doctest::Approx(1.0 / 2.0 * std::tan(0.6) * 0.1));
  CHECK(p.clamp({-3.0, -3.0}).accel == -p.accel_max);
  CHECK(p.clamp({-3.0, -3.0}).steer == -p.steer_max);

  // The yaw-rate multiplier only scales the yaw increment.
  const RoverState scaled = bicycle_step({0, 0, 0, 1.0}, {0.0, 0.3}, p, 1.05);
  CHECK(scaled.yaw == doctest::Approx(1.05 * std::tan(0.3) / 2.0 * 0.1));
}

TEST_CASE("RoverParams validation") {
  RoverParams p;
  CHECK_NOTHROW(p.validate());
  p.yaw_uncertainty = 1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = RoverParams{};
  p.dt = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("linearize") {
  const RoverParams p;
  const Linearization at_rest = linearize({0, 0, 0.7, 0.0}, {0.2, 0.1}, p);
  CHECK(at_rest.A(0, 2) == 0.0);
  CHECK(at_rest.A(1, 2) == 0.0);

  const Linearization lin = linearize({1, 2, 0.7, 1.3}, {0.2, 0.1}, p);
  CHECK(lin.A(0, 3) == doctest::Approx(std::cos(0.7) * 0.1));
  CHECK(lin.A(1, 3) == doctest::Approx(std::sin(0.7) * 0.1));

  // The affine form reproduces the map at the operating point.
  const Eigen::Vector4d x(1, 2, 0.7, 1.3);
  const Eigen::Vector2d u(0.2, 0.1);
  CHECK((lin.A * x + lin.B * u + lin.offset - bicycle_map(x, u, p)).norm() <= 1e-12);

  const auto J = central_jacobian(x, u, p, 1e-6);
  CHECK((J.leftCols<4>() - lin.A).cwiseAbs().maxCoeff() <= 1e-4);
  CHECK((J.rightCols<2>() - lin.B).cwiseAbs().maxCoeff() <= 1e-4);
}

TEST_CASE("build_uncertain_dynamics") {
  const RoverParams p;
  const Linearization lin = linearize({0, 0, 0.2, 1.0}, {0.1, 0.05}, p);
  const std::vector<RoverControl> plan{{0.1, 0.05}, {0.2, -0.1}, {0.0, 0.2}};
  const std::size_t t = 3;
  const Eigen::Index d = augmented_dim(t);
  CHECK(d == 4 + 2 * 3 + 1);

  const reach::IntervalMatrix exact = build_uncertain_dynamics(lin, plan, t, 0.0);
  CHECK(exact.lo == exact.hi);

  const reach::IntervalMatrix lam = build_uncertain_dynamics(lin, plan, t, 0.05);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      if (i == kYawRow) {
        const double a = exact.lo(i, j);
        CHECK(lam.lo(i, j) == doctest::Approx(std::min(0.95 * a, 1.05 * a)));
        CHECK(lam.hi(i, j) == doctest::Approx(std::max(0.95 * a, 1.05 * a)));
        CHECK(lam.lo(i, j) <= lam.hi(i, j));
      } else {
        CHECK(lam.lo(i, j) == lam.hi(i, j));
      }
    }
  }
  // A yaw-row entry of 0.1 widens to [0.095, 0.105].
  Linearization unit = lin;
  unit.A(kYawRow, 3) = 0.1;
  const reach::IntervalMatrix w = build_uncertain_dynamics(unit, plan, t, 0.05);
  CHECK(w.lo(kYawRow, 3) == doctest::Approx(0.095));
  CHECK(w.hi(kYawRow, 3) == doctest::Approx(0.105));

  YawRowMask only_state;
  only_state.control = false;
  only_state.offset = false;
  const reach::IntervalMatrix ms = build_uncertain_dynamics(lin, plan, t, 0.05, only_state);
  CHECK(ms.lo(kYawRow, 4 + 1) == ms.hi(kYawRow, 4 + 1));
  CHECK(ms.lo(kYawRow, d - 1) == ms.hi(kYawRow, d - 1));

  CHECK_THROWS_AS((void)build_uncertain_dynamics(lin, plan, 4, 0.05), std::invalid_argument);
  CHECK_THROWS_AS((void)build_uncertain_dynamics(lin, plan, 3, 1.0), std::invalid_argument);
}

TEST_CASE("augmented propagation replays the open-loop plan") {
  const RoverParams p;
  const Linearization lin = linearize({0, 0, 0.2, 1.0}, {0.1, 0.05}, p);
  const std::vector<RoverControl> plan{{0.1, 0.05}, {0.2, -0.1}, {-0.3, 0.2}, {0.0, 0.0}};
  const std::size_t t = 4;
  const reach::IntervalMatrix lam = build_uncertain_dynamics(lin, plan, t, 0.0);
  const Eigen::Vector4d x0(0.0, 0.0, 0.2, 1.0);
  reach::Box z = augment_initial_set(reach::Box::point(x0), plan, t);
  REQUIRE(z.dim() == augmented_dim(t));
  CHECK(z.lo()(z.dim() - 1) == 1.0);

  Eigen::Vector4d x = x0;
  for (std::size_t k = 0; k < t; ++k) {
    z = reach::step_box(lam.lo, z);
    x = lin.A * x + lin.B * plan[k].vec() + lin.offset;
    CHECK((z.lo().head<4>() - x).norm() <= 1e-12);
    CHECK((z.hi().head<4>() - x).norm() <= 1e-12);
  }
}

TEST_CASE("bin_point_cloud") {
  std::istringstream in("x,y,z\n0.1,0.2,5\n0.4,0.3,1\n\n1.2,-0.6,7\n0.2,0.4,9\n");
  const auto boxes = bin_point_cloud(in, {0.5, std::nullopt});
  // Three points share cell (0, 0); the fourth lands in (2, -2).
  REQUIRE(boxes.size() == 2);
  CHECK(boxes[0] == reach::Box(Eigen::Vector2d(0, 0), Eigen::Vector2d(0.5, 0.5)));
  CHECK(boxes[1] == reach::Box(Eigen::Vector2d(1.0, -1.0), Eigen::Vector2d(1.5, -0.5)));

  std::istringstream tall("0.1,0.2,5\n0.4,0.3,1\n1.2,-0.6,7\n");
  const auto high = bin_point_cloud(tall, {0.5, 6.0});
  REQUIRE(high.size() == 1);
  CHECK(high[0].lo()(0) == 1.0);

  std::istringstream bad("0.1,0.2\nfoo,1\n");
  try {
    (void)bin_point_cloud(bad, {});
    FAIL("expected a parse error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::istringstream any("0,0\n");
  CHECK_THROWS_AS((void)bin_point_cloud(any, {0.0, std::nullopt}), std::invalid_argument);
}
