#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>

#include "modelsel/serialization.hpp"

using namespace modelsel;
using namespace modelsel::io;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = MODELSEL_SOURCE_DIR;

std::string error_field(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<no error>";
}

}  // namespace

TEST_CASE("parse_json reports line and column") {
  const std::string f = error_field([] { (void)parse_json("{\n  \"a\": 1,\n  oops\n}", "cfg.json"); });
  CHECK(f.rfind("cfg.json:3:", 0) == 0);
}

TEST_CASE("number formatting") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(INFINITY) == "inf");
  CHECK(format_double(-INFINITY) == "-inf");
  CHECK(format_double(NAN) == "nan");
  CHECK(number_to_json(-INFINITY) == "-inf");
  CHECK(number_to_json(NAN).is_null());
  CHECK(number_from_json(json("inf"), "x") == INFINITY);
  CHECK(number_from_json(json(2.5), "x") == 2.5);
  CHECK(std::isnan(number_from_json(json(nullptr), "x")));
  CHECK(error_field([] { (void)number_from_json(json("many"), "a.b"); }) == "a.b");
}

TEST_CASE("field accessors name the path") {
  const json j = {{"weights", {{"alpha", "high"}}}, {"n", -3}};
  CHECK(error_field([&] { (void)get_number(j.at("weights"), "alpha", "weights"); }) == "weights.alpha");
  CHECK(error_field([&] { (void)get_u64(j, "n", ""); }) == "n");
  CHECK(error_field([&] { (void)get_string(j, "missing", "root"); }) == "root.missing");
  CHECK(get_number(j, "absent", "", 4.0) == 4.0);
}

TEST_CASE("coreset pair round-trip") {
  Rng rng(1);
  linreg::CoresetPair pair = linreg::generate_coreset_pair(rng, 3, 2, 0.1);
  pair.seed = 77;
  const linreg::CoresetPair back = coreset_pair_from_json(parse_json(to_json(pair).dump()));
  CHECK(back.slow.A == pair.slow.A);
  CHECK(back.slow.b == pair.slow.b);
  CHECK(back.fast.A == pair.fast.A);
  CHECK(back.per_coord_scales == pair.per_coord_scales);
  CHECK(back.epsilon == pair.epsilon);
  CHECK(back.seed == 77);
}

TEST_CASE("proxy pair round-trip") {
  Rng rng(2);
  const dnn::ProxyPair pair = dnn::make_proxy_pair(rng, 3, 2, {0.05, 0.1, 0.02});
  const dnn::ProxyPair back = proxy_pair_from_json(parse_json(to_json(pair).dump()));
  const Eigen::VectorXd x = Eigen::Vector3d(0.3, -0.2, 1.0);
  for (std::uint64_t i = 0; i < 50; ++i) CHECK(back.fast(x, i).y == pair.fast(x, i).y);
  CHECK(back.slow(x) == pair.slow(x));
}

TEST_CASE("reachability types round-trip") {
  reach::IntervalMatrix m{Eigen::Matrix2d::Zero(), Eigen::Matrix2d::Ones()};
  const auto mb = interval_matrix_from_json(to_json(m));
  CHECK(mb.lo == m.lo);
  CHECK(mb.hi == m.hi);
  const reach::Box b(Eigen::Vector2d(-1, 0.25), Eigen::Vector2d(3, 0.5));
  CHECK(box_from_json(to_json(b), "b") == b);
  const reach::Box e = reach::Box::empty(3);
  const reach::Box eb = box_from_json(to_json(e), "e");
  CHECK(eb.is_empty());
  CHECK(eb.dim() == 3);
  CHECK(error_field([] { (void)box_from_json(json{{"lo", {1}}, {"hi", {0}}}, "obstacles[2]"); }) ==
        "obstacles[2]");
}

TEST_CASE("shipped scenarios load and round-trip") {
  for (const char* name : {"rock_corridor.json", "open_route.json"}) {
    const rover::RoverScenario scn = load_scenario(kSource / "scenarios" / name);
    CHECK(scn.waypoints.size() >= 2);
    CHECK_FALSE(scn.calibration_waypoints.empty());
    const rover::RoverScenario back = scenario_from_json(to_json(scn), ".");
    CHECK(to_json(back) == to_json(scn));
    CHECK(back.obstacles.obstacles.size() == scn.obstacles.obstacles.size());
  }
}

TEST_CASE("scenario errors carry field paths") {
  json j = {{"waypoints", {{0, 0}, {1, 0}}}, {"goal_tolerance", -1.0}};
  CHECK_THROWS((void)scenario_from_json(j, "."));
  j = {{"waypoints", {{0, 0}, {1, 0}}}, {"obstacles", {{{"lo", {0, 0, 0}}, {"hi", {1, 1, 1}}}}}};
  CHECK(error_field([&] { (void)scenario_from_json(j, "."); }) == "obstacles[0]");
  j = {{"waypoints", {{0, 0}, {1, 0}}}, {"point_cloud", {{"path", "nowhere.csv"}}}};
  CHECK(error_field([&] { (void)scenario_from_json(j, "."); }) == "point_cloud.path");
  j = {{"waypoints", {{0, 0}}}};
  CHECK_THROWS((void)scenario_from_json(j, "."));
}

TEST_CASE("point-cloud obstacles resolve relative to the scenario file") {
  const fs::path dir = fs::temp_directory_path() / "modelsel_pc_test";
  fs::create_directories(dir);
  {
    std::ofstream(dir / "cloud.csv") << "x,y,z\n4.1,0.9,2\n4.2,0.8,0.1\n";
  }
  const json j = {{"waypoints", {{0, 0}, {10, 0}}},
                  {"point_cloud", {{"path", "cloud.csv"}, {"cell_size", 0.25}, {"min_z", 1.0}}}};
  const rover::RoverScenario scn = scenario_from_json(j, dir);
  REQUIRE(scn.obstacles.obstacles.size() == 1);
  CHECK(scn.obstacles.obstacles[0].lo()(0) == 4.0);
  fs::remove_all(dir);
}

TEST_CASE("calibration artifact reloads mu bit-exactly") {
  CalibrationArtifact a;
  a.scenario = "rock_corridor";
  a.calibration.mu = 0.1 + 0.2;  // not representable as a short decimal
  a.calibration.n_runs = 20;
  a.seed = 7;
  a.fast_samples = 2671;
  a.slow_samples = 33173;
  const CalibrationArtifact back = calibration_from_json(parse_json(to_json(a).dump(2)));
  CHECK(std::memcmp(&back.calibration.mu, &a.calibration.mu, sizeof(double)) == 0);
  CHECK(back.scenario == a.scenario);
  CHECK(back.calibration.n_runs == 20);
  CHECK(back.slow_samples == 33173);

  json wrong = to_json(a);
  wrong["schema_version"] = 42;
  CHECK_THROWS_AS((void)calibration_from_json(wrong), ConfigError);
}
