#include <doctest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "modelsel/harness.hpp"

using namespace modelsel;
using namespace modelsel::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("modelsel_harness_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig quick(Suite suite, const fs::path& out, std::size_t trials = 3,
                       std::size_t steps = 300) {
  ExperimentConfig cfg = config_from_json({{"scenario", suite_id(suite)}});
  cfg.seed = 11;
  cfg.trials = trials;
  cfg.n_steps = steps;
  cfg.output_dir = out;
  return cfg;
}

std::string error_field(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const io::ConfigError& e) {
    return e.field();
  }
  return "<no error>";
}

/// Independent reading of steps.csv: sums rewards and costs per (trial, policy).
struct Totals {
  double reward = 0.0;
  double cost = 0.0;
  std::size_t rows = 0;
};
std::map<std::pair<std::size_t, std::string>, Totals> totals_from_csv(const fs::path& file) {
  std::map<std::pair<std::size_t, std::string>, Totals> out;
  std::ifstream in(file);
  std::string line;
  std::getline(in, line);
  REQUIRE(line == "trial,policy,t,action,loss,cost,reward,bound");
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string f[8];
    for (auto& s : f) std::getline(ss, s, ',');
    Totals& t = out[{std::stoul(f[0]), f[1]}];
    t.cost += std::stod(f[5]);
    t.reward += std::stod(f[6]);
    ++t.rows;
  }
  return out;
}

}  // namespace

TEST_CASE("suite ids") {
  for (Suite s : {Suite::Linreg, Suite::Dnn, Suite::Rover}) CHECK(parse_suite(suite_id(s)) == s);
  CHECK_THROWS_AS((void)parse_suite("cartpole"), std::invalid_argument);
}

TEST_CASE("config parsing reports field paths") {
  CHECK(error_field([] { (void)config_from_json({{"scenario", "cartpole"}}); }) == "scenario");
  CHECK(error_field([] {
          (void)config_from_json({{"scenario", "linreg"}, {"weights", {{"alpha", "high"}}}});
        }) == "weights.alpha");
  CHECK(error_field([] {
          config_from_json({{"scenario", "linreg"}, {"trials", 0}}).validate();
        }) == "trials");
  CHECK(error_field([] {
          config_from_json({{"scenario", "dnn"}, {"dnn", {{"epsilon", 1.5}}}}).validate();
        }).rfind("dnn", 0) == 0);
  CHECK(error_field([] {
          config_from_json({{"scenario", "rover"}, {"rover", {{"scenarios", {"missing.json"}}}}})
              .validate();
        }).rfind("rover.scenarios", 0) == 0);
}

TEST_CASE("suite-specific defaults") {
  const fs::path scenarios = fs::path(MODELSEL_SOURCE_DIR) / "scenarios";
  const ExperimentConfig rover = config_from_json(
      {{"scenario", "rover"}, {"rover", {{"scenarios", {"open_route.json"}}}}}, scenarios);
  CHECK(rover.weights.alpha == 0.7);
  CHECK(rover.weights.beta == 0.3);
  const ExperimentConfig dnn = config_from_json({{"scenario", "dnn"}});
  CHECK(dnn.costs.c_fast == 0.0);
  CHECK(dnn.costs.c_slow == 0.017);
}

TEST_CASE("trial seeds") {
  ExperimentConfig cfg = config_from_json({{"scenario", "linreg"}, {"seed", 5}, {"trials", 3}});
  CHECK(cfg.trial_count() == 3);
  CHECK(cfg.trial_seed(2) == derive_seed(5, {2}));
  cfg = config_from_json({{"scenario", "linreg"}, {"seeds", {40, 41}}, {"trials", 9}});
  CHECK(cfg.trial_count() == 2);
  CHECK(cfg.trial_seed(1) == 41);
}

TEST_CASE("config echo round-trips") {
  const ExperimentConfig cfg = quick(Suite::Dnn, "x");
  const ExperimentConfig back = config_from_json(to_json(cfg));
  CHECK(to_json(back) == to_json(cfg));
}

TEST_CASE("zero-step episodes give an all-zero report") {
  const fs::path out = scratch("zero");
  const SuiteResult res = run_suite(quick(Suite::Linreg, out, 2, 0));
  REQUIRE(res.outputs.size() == 1);
  for (const auto& a : res.outputs[0].report.policies) {
    CHECK(a.cumulative_reward.mean == 0.0);
    CHECK(a.total_cost.mean == 0.0);
    CHECK(a.slow_query_fraction.mean == 0.0);
  }
  fs::remove_all(out);
}

TEST_CASE("paired trials and aggregates agree with steps.csv") {
  for (Suite suite : {Suite::Linreg, Suite::Dnn}) {
    const fs::path out = scratch(std::string("paired_") + std::string(suite_id(suite)));
    const ExperimentConfig cfg = quick(suite, out);
    const SuiteResult res = run_suite(cfg);
    REQUIRE(res.outputs.size() == 1);
    const ComparisonReport& r = res.outputs[0].report;
    CHECK(r.complete);
    CHECK(r.trials.size() == 3 * 5);

    const auto csv = totals_from_csv(out / "steps.csv");
    std::map<std::size_t, double> oracle;
    for (const auto& row : r.trials)
      if (row.policy == PolicyKind::Oracle) oracle[row.trial] = row.cumulative_reward.value();
    for (const auto& row : r.trials) {
      const Totals& t = csv.at({row.trial, std::string(policy_id(row.policy))});
      CHECK(t.rows == cfg.n_steps);
      CHECK(row.cumulative_reward.value() == doctest::Approx(t.reward).epsilon(1e-9));
      CHECK(row.total_cost == doctest::Approx(t.cost).epsilon(1e-9));
      // Paired streams: the oracle sees the same inputs, so no policy beats it.
      CHECK(row.cumulative_reward.value() <= oracle.at(row.trial) + 1e-9);
      if (row.policy == PolicyKind::Slow)
        // The fast model runs every step, so offloading pays both costs.
        CHECK(row.total_cost ==
              doctest::Approx((cfg.costs.c_fast + cfg.costs.c_slow) * cfg.n_steps));
      if (row.policy == PolicyKind::Fast)
        CHECK(row.total_cost == doctest::Approx(cfg.costs.c_fast * cfg.n_steps));
    }
    for (const auto& a : r.policies) {
      double sum = 0.0;
      for (const auto& row : r.trials)
        if (row.policy == a.policy) sum += csv.at({row.trial, std::string(policy_id(a.policy))}).reward;
      CHECK(a.cumulative_reward.mean == doctest::Approx(sum / 3.0).epsilon(1e-9));
    }
    fs::remove_all(out);
  }
}

TEST_CASE("reruns are byte-identical and charts regenerate from files") {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  run_suite(quick(Suite::Linreg, a));
  ExperimentConfig cfg = quick(Suite::Linreg, b);
  cfg.threads = 3;
  run_suite(cfg);
  for (const char* f : {"steps.csv", "summary.json", "reward_curve.svg", "cost_vs_loss.svg"})
    CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);

  const std::string curve = slurp(a / "reward_curve.svg");
  const std::string scatter = slurp(a / "cost_vs_loss.svg");
  fs::remove(a / "reward_curve.svg");
  fs::remove(a / "cost_vs_loss.svg");
  render_charts(a);
  CHECK(slurp(a / "reward_curve.svg") == curve);
  CHECK(slurp(a / "cost_vs_loss.svg") == scatter);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("summary round-trips through JSON") {
  const fs::path out = scratch("roundtrip");
  const SuiteResult res = run_suite(quick(Suite::Dnn, out, 2, 100));
  const ComparisonReport& r = res.outputs[0].report;
  const ComparisonReport back = report_from_json(io::load_json(out / "summary.json"));
  CHECK(to_json(back) == to_json(r));
  json bad = to_json(r);
  bad["schema_version"] = kSchemaVersion + 1;
  CHECK_THROWS_AS((void)report_from_json(bad), io::ConfigError);
  fs::remove_all(out);
}

TEST_CASE("report merges runs and rejects mixed suites") {
  const fs::path a = scratch("merge_a"), b = scratch("merge_b"), d = scratch("merge_d"),
                 m = scratch("merge_out");
  run_suite(quick(Suite::Linreg, a, 2, 50));
  ExperimentConfig cb = quick(Suite::Linreg, b, 3, 50);
  cb.seed = 12;
  run_suite(cb);
  const ComparisonReport merged = report({a / "summary.json", b / "summary.json"}, m);
  CHECK(merged.trials.size() == 25);
  std::map<std::size_t, int> per_trial;
  for (const auto& row : merged.trials) ++per_trial[row.trial];
  CHECK(per_trial.size() == 5);
  for (const auto& [trial, n] : per_trial) CHECK(n == 5);
  const auto csv = totals_from_csv(m / "steps.csv");
  CHECK(csv.size() == 25);
  for (const auto& row : merged.trials)
    CHECK(row.cumulative_reward.value() ==
          doctest::Approx(csv.at({row.trial, std::string(policy_id(row.policy))}).reward));

  run_suite(quick(Suite::Dnn, d, 1, 50));
  CHECK_THROWS_AS((void)report({a / "summary.json", d / "summary.json"}, m / "mixed"),
                  io::ConfigError);
  for (const auto& p : {a, b, d, m}) fs::remove_all(p);
}

TEST_CASE("aggregate handles the -inf marker") {
  std::vector<TrialRow> rows(2);
  rows[0].policy = rows[1].policy = PolicyKind::Fast;
  rows[0].cumulative_reward = Reward(-1.0);
  rows[1].cumulative_reward = Reward::negative_infinity();
  rows[0].mean_loss = Loss(1.0);
  rows[1].mean_loss = Loss::infinite();
  const auto agg = aggregate(rows);
  const PolicyAggregate& fast = agg.front();
  CHECK(fast.policy == PolicyKind::Fast);
  CHECK(fast.n_trials == 2);
  CHECK(fast.cumulative_reward.mean == -INFINITY);
  CHECK(std::isnan(fast.cumulative_reward.std));
  CHECK(fast.mean_loss.mean == INFINITY);
}

TEST_CASE("check_report flags an ordering violation") {
  std::vector<TrialRow> rows;
  const double rewards[5] = {-1.0, -3.0, -2.0, -1.5, -0.5};  // Fast beats Selector
  for (std::size_t i = 0; i < 5; ++i) {
    TrialRow row;
    row.policy = kAllPolicies[i];
    row.cumulative_reward = Reward(rewards[i]);
    rows.push_back(row);
  }
  ComparisonReport r;
  r.suite = "linreg";
  r.trials = rows;
  r.policies = aggregate(rows);
  CHECK_FALSE(check_report(r).ok);

  r.trials[0].cumulative_reward = Reward(-2.5);
  r.policies = aggregate(r.trials);
  CHECK(check_report(r).ok);
}

TEST_CASE("a pre-set cancel flag yields an incomplete, interrupted run") {
  const fs::path out = scratch("cancel");
  std::atomic<bool> cancel{true};
  const SuiteResult res = run_suite(quick(Suite::Linreg, out), &cancel);
  CHECK(res.interrupted);
  REQUIRE(res.outputs.size() == 1);
  CHECK_FALSE(res.outputs[0].report.complete);
  CHECK(fs::exists(out / "summary.json"));
  fs::remove_all(out);
}
