#include <doctest.h>

#include <cmath>
#include <sstream>

#include "modelsel/reachability.hpp"
#include "modelsel/serialization.hpp"

using namespace modelsel;
using namespace modelsel::reach;

namespace {

IntervalMatrix scalar_uncertain() {
  IntervalMatrix m;
  m.lo.resize(2, 2);
  m.hi.resize(2, 2);
  m.lo << 1, -2, 4, 6;
  m.hi << 1, 2, 4, 6;
  return m;
}

Box box2(double lx, double ly, double hx, double hy) {
  return Box(Eigen::Vector2d(lx, ly), Eigen::Vector2d(hx, hy));
}

// Smallest N with (1-q)^N <= delta/(2nt) by linear search.
std::size_t samples_by_search(double p, double delta, int n, int t) {
  const double q = (1.0 - p) / (2.0 * n * t);
  const double target = delta / (2.0 * n * t);
  double tail = 1.0;
  std::size_t N = 0;
  while (tail > target) {
    tail *= 1.0 - q;
    ++N;
  }
  return N;
}

}  // namespace

TEST_CASE("Box basics") {
  const Box e = Box::empty(2);
  CHECK(e.is_empty());
  CHECK(e.dim() == 2);
  CHECK_FALSE(e.contains(Eigen::Vector2d(0, 0)));
  CHECK_THROWS_AS(box2(1, 0, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(Box(Eigen::Vector2d(0, NAN), Eigen::Vector2d(1, 1)), std::invalid_argument);
  Box b = box2(0, 0, 1, 1);
  CHECK(b.contains(Eigen::Vector2d(1, 1)));
  CHECK(b.contains(e));
  b.expand_to(box2(2, -1, 3, 0));
  CHECK(b == box2(0, -1, 3, 1));
  Box grown = Box::empty(2);
  grown.expand_to(box2(0, 0, 1, 1));
  CHECK(grown == box2(0, 0, 1, 1));
}

TEST_CASE("sample_matrix") {
  Rng rng(1);
  const Eigen::Matrix2d fixed = (Eigen::Matrix2d() << 1, 2, 3, 4).finished();
  CHECK(sample_matrix(IntervalMatrix::degenerate(fixed), rng) == fixed);

  const IntervalMatrix lam = scalar_uncertain();
  double sum = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Eigen::MatrixXd a = sample_matrix(lam, rng);
    CHECK(a(0, 0) == 1.0);
    CHECK(a(1, 0) == 4.0);
    CHECK(a(1, 1) == 6.0);
    CHECK(a(0, 1) >= -2.0);
    CHECK(a(0, 1) <= 2.0);
    CHECK(lam.contains(a));
    sum += a(0, 1);
  }
  CHECK(std::abs(sum / 10000) <= 0.07);
}

TEST_CASE("IntervalMatrix validation") {
  IntervalMatrix m = scalar_uncertain();
  CHECK_NOTHROW(m.validate());
  m.hi(0, 1) = -3.0;
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  IntervalMatrix r{Eigen::MatrixXd::Zero(2, 3), Eigen::MatrixXd::Zero(2, 3)};
  CHECK_THROWS_AS(r.validate(), std::invalid_argument);
}

TEST_CASE("step_box") {
  const Box s = box2(-1, 2, 0.5, 3);
  CHECK(step_box(Eigen::Matrix2d::Identity(), s) == s);
  Eigen::Matrix2d a;
  a << 1, 0, 4, 6;
  CHECK(step_box(a, Box::point(Eigen::Vector2d(1, 0))) == Box::point(Eigen::Vector2d(1, 4)));
  a << 1, 2, 4, 6;
  CHECK(step_box(a, Box::point(Eigen::Vector2d(0, 1))) == Box::point(Eigen::Vector2d(2, 6)));
  a << 1, -2, 4, 6;
  CHECK(step_box(a, Box::point(Eigen::Vector2d(0, 1))) == Box::point(Eigen::Vector2d(-2, 6)));
  // Interval arithmetic: -2 * [-1, 0.5] + 1 * [2, 3] = [1, 5].
  a << -2, 1, 0, 1;
  CHECK(step_box(a, s) == box2(1, 2, 5, 3));
  CHECK_THROWS_AS((void)step_box(Eigen::Matrix3d::Identity(), s), std::invalid_argument);
  CHECK(step_box(a, Box::empty(2)).is_empty());

  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Matrix3d m = Eigen::Matrix3d::Random();
    const Eigen::Vector3d x(rng.normal(), rng.normal(), rng.normal());
    const Box out = step_box(m, Box::point(x));
    CHECK((out.lo() - m * x).norm() <= 1e-12);
    CHECK((out.hi() - m * x).norm() <= 1e-12);
  }
}

TEST_CASE("required_samples") {
  CHECK(required_samples(0.9, 0.05, 2, 5) == 1196);
  CHECK(required_samples(0.9, 0.05, 2, 5) == samples_by_search(0.9, 0.05, 2, 5));
  CHECK(required_samples(0.9, 0.05, 4, 5) == samples_by_search(0.9, 0.05, 4, 5));
  CHECK(required_samples(0.99, 0.01, 4, 5) == samples_by_search(0.99, 0.01, 4, 5));
  CHECK(required_samples(0.99, 0.05, 2, 5) > required_samples(0.9, 0.05, 2, 5));
  CHECK(required_samples(0.9, 0.01, 2, 5) > required_samples(0.9, 0.05, 2, 5));
  CHECK(required_samples(0.1, 0.5, 1, 1) < 10);
  CHECK_THROWS_AS((void)required_samples(1.0, 0.05, 2, 5), std::invalid_argument);
  CHECK_THROWS_AS((void)required_samples(0.9, 0.0, 2, 5), std::invalid_argument);
  CHECK_THROWS_AS((void)required_samples(0.9, 0.05, 0, 5), std::invalid_argument);
  CHECK_THROWS_AS((void)required_samples(0.9, 0.05, 2, 0), std::invalid_argument);
}

TEST_CASE("StatReachConfig::from_confidence") {
  const auto cfg = StatReachConfig::from_confidence(0.9, 0.05, 2, 5, 1e-4);
  CHECK(cfg.n_samples == 1196);
  CHECK(cfg.cost == doctest::Approx(0.1196));
  CHECK(cfg.horizon == 5);
}

TEST_CASE("reach_sampled") {
  SUBCASE("zero-width dynamics give the single trajectory") {
    Eigen::Matrix2d a;
    a << 0.9, 0.1, -0.2, 1.0;
    StatReachConfig cfg;
    cfg.horizon = 3;
    cfg.n_samples = 50;
    const Box x0 = box2(0, 0, 1, 1);
    const ReachResult r = reach_sampled(IntervalMatrix::degenerate(a), x0, cfg, 1);
    REQUIRE(r.boxes.size() == 3);
    Box s = x0;
    for (const Box& b : r.boxes) {
      s = step_box(a, s);
      CHECK(b == s);
    }
    CHECK(r.samples_used == 50);
  }
  SUBCASE("scalar-uncertain system from a point with zero second coordinate") {
    StatReachConfig cfg;
    cfg.n_samples = 100;
    const ReachResult r = reach_sampled(scalar_uncertain(), Box::point(Eigen::Vector2d(1, 0)), cfg, 3);
    CHECK(r.boxes.at(0) == Box::point(Eigen::Vector2d(1, 4)));
  }
  SUBCASE("scalar-uncertain system from (0, 1)") {
    const auto cfg = StatReachConfig::from_confidence(0.9, 0.05, 2, 1);
    const ReachResult r = reach_sampled(scalar_uncertain(), Box::point(Eigen::Vector2d(0, 1)), cfg, 7);
    const Box& b = r.boxes.at(0);
    CHECK(b.lo()(0) >= -2.0);
    CHECK(b.hi()(0) <= 2.0);
    CHECK(b.hi()(0) - b.lo()(0) >= 3.8);
    CHECK(b.lo()(1) == 6.0);
    CHECK(b.hi()(1) == 6.0);
  }
  SUBCASE("thread count does not change the result") {
    StatReachConfig cfg;
    cfg.horizon = 4;
    cfg.n_samples = 333;
    const Box x0 = box2(0, 0.9, 0.1, 1);
    const ReachResult a = reach_sampled(scalar_uncertain(), x0, cfg, 5, 1);
    const ReachResult b = reach_sampled(scalar_uncertain(), x0, cfg, 5, 3);
    CHECK(a.boxes == b.boxes);
  }
  SUBCASE("more samples never shrink the hull") {
    StatReachConfig small, large;
    small.horizon = large.horizon = 3;
    small.n_samples = 40;
    large.n_samples = 400;
    const Box x0 = box2(0, 0.5, 0.2, 1);
    const ReachResult a = reach_sampled(scalar_uncertain(), x0, small, 9);
    const ReachResult b = reach_sampled(scalar_uncertain(), x0, large, 9);
    for (std::size_t k = 0; k < 3; ++k) CHECK(b.boxes[k].contains(a.boxes[k]));
  }
}

TEST_CASE("bloat") {
  const Box s = box2(0, 0, 1, 1);
  CHECK(bloat(s, 0.0) == s);
  CHECK(bloat(s, 0.5) == box2(-0.5, -0.5, 1.5, 1.5));
  CHECK(bloat(bloat(s, 0.25), 0.5) == bloat(s, 0.75));
  CHECK(bloat(Box::empty(2), 1.0).is_empty());
  CHECK_THROWS_AS((void)bloat(s, -0.1), std::invalid_argument);
}

TEST_CASE("calibrate_bloat") {
  auto one_dim = [](double lo, double hi) {
    ReachResult r;
    r.boxes = {Box(Eigen::VectorXd::Constant(1, lo), Eigen::VectorXd::Constant(1, hi)),
               Box(Eigen::VectorXd::Constant(1, lo), Eigen::VectorXd::Constant(1, hi))};
    return r;
  };
  std::vector<std::pair<ReachResult, ReachResult>> runs{{one_dim(0, 1), one_dim(0.1, 0.9)}};
  CHECK(calibrate_bloat(runs).mu == 0.0);
  CHECK_FALSE(calibrate_bloat(runs).epsilon.has_value());

  runs = {{one_dim(0, 1), one_dim(-0.2, 1.1)}};
  const BloatCalibration c = calibrate_bloat(runs);
  CHECK(c.mu == doctest::Approx(0.2));
  CHECK(c.n_runs == 1);
  for (const auto& [fast, slow] : runs)
    for (std::size_t k = 0; k < fast.boxes.size(); ++k)
      CHECK(bloat(fast.boxes[k], c.mu).contains(slow.boxes[k]));

  runs = {{one_dim(0, 1), one_dim(-2, 3)}};
  const BloatCalibration big = calibrate_bloat(runs);
  CHECK(big.mu == 2.0);
  REQUIRE(big.epsilon.has_value());
  CHECK(*big.epsilon == doctest::Approx(0.5));

  CHECK_THROWS_AS((void)calibrate_bloat({}), std::invalid_argument);
}

TEST_CASE("calibrate_bloat over a coordinate subset") {
  ReachResult fast, slow;
  fast.boxes = {box2(0, 0, 1, 1)};
  slow.boxes = {box2(-0.1, -5, 1, 5)};
  std::vector<std::pair<ReachResult, ReachResult>> runs{{fast, slow}};
  const std::vector<Index> x_only{0};
  CHECK(calibrate_bloat(runs, x_only).mu == doctest::Approx(0.1));
  CHECK(calibrate_bloat(runs).mu == doctest::Approx(5.0));
}

TEST_CASE("intersects and loss_nav") {
  UnsafeSet u{{box2(0.5, 0.5, 2, 2)}, {0, 1}};
  CHECK(intersects(box2(0, 0, 1, 1), u));
  CHECK_FALSE(intersects(box2(3, 3, 4, 4), u));
  CHECK(intersects(box2(2, 2, 3, 3), u));  // shared corner
  CHECK_FALSE(intersects(Box::empty(2), u));

  // Projection: a 4-D box onto (x, y).
  const Box s4(Eigen::Vector4d(1.9, 0, -3, 0), Eigen::Vector4d(2.5, 0.6, 3, 1));
  CHECK(intersects(s4, u));
  UnsafeSet bad{{box2(0, 0, 1, 1)}, {0, 5}};
  CHECK_THROWS_AS((void)intersects(s4, bad), std::out_of_range);

  std::vector<Box> boxes{box2(-1, -1, 0, 0), box2(0, 0, 0.5, 0.5)};
  const UnsafeSet none{{}, {0, 1}};
  CHECK(loss_nav(boxes, none).value() == 0.0);
  CHECK(loss_nav(boxes, u).is_infinite());  // second box touches the corner (0.5, 0.5)
  boxes[1] = box2(0, 0, 0.4, 0.2);
  CHECK(loss_nav(boxes, u).value() == 0.0);
  const UnsafeSet covering{{box2(-2, -2, 2, 2)}, {0, 1}};
  CHECK(loss_nav(boxes, covering).is_infinite());
}

TEST_CASE("select_rs") {
  ReachResult fast;
  fast.boxes = {box2(0, 0, 1, 1)};
  const UnsafeSet none{{}, {0, 1}};
  CHECK(select_rs(fast, 10.0, none) == Action::UseFast);

  const double mu = 0.2;
  const UnsafeSet near{{box2(1.1, 0, 2, 1)}, {0, 1}};  // gap mu/2
  CHECK(select_rs(fast, 0.0, near) == Action::UseFast);
  CHECK(select_rs(fast, mu, near) == Action::InvokeSlow);
  CHECK(select_rs(fast, 0.0, UnsafeSet{{box2(1, 0, 2, 1)}, {0, 1}}) == Action::InvokeSlow);
}

TEST_CASE("reach CSV rows") {
  ReachResult r;
  r.boxes = {box2(0, 1, 2, 3), box2(-1, 0.5, 4, 5)};
  std::ostringstream out;
  io::write_reach_csv(out, r);
  CHECK(out.str() == "timestep,lo_0,lo_1,hi_0,hi_1\n1,0,1,2,3\n2,-1,0.5,4,5\n");
}
