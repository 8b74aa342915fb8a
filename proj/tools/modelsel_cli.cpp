// Command-line front end for the experiment harness.
//
// Exit codes: 0 success, 1 runtime failure, 2 configuration error,
// 3 a --check assertion failed, 130 interrupted.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "modelsel/harness.hpp"

namespace fs = std::filesystem;
namespace h = modelsel::harness;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitCheck = 3;
constexpr int kExitInterrupted = 130;

std::atomic<bool> g_cancel{false};

extern "C" void on_sigint(int) { g_cancel.store(true); }

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> trials;
  std::optional<std::size_t> steps;
  std::optional<unsigned> jobs;
  bool check = false;
};

void add_common(CLI::App* cmd, Overrides& o, bool with_steps) {
  cmd->add_option("--config", o.config, "Experiment config (JSON)");
  cmd->add_option("--seed", o.seed, "Top-level seed; replaces any explicit seed list");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--trials", o.trials, "Number of trials; replaces any explicit seed list")
      ->check(CLI::PositiveNumber);
  if (with_steps) cmd->add_option("--steps", o.steps, "Steps per episode");
  cmd->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
}

h::ExperimentConfig build_config(h::Suite suite, const Overrides& o) {
  h::ExperimentConfig cfg;
  if (!o.config.empty()) {
    cfg = h::load_config(o.config);
    if (cfg.suite != suite)
      throw modelsel::io::ConfigError(
          "scenario", "config is for '" + std::string(h::suite_id(cfg.suite)) +
                          "' but the '" + std::string(h::suite_id(suite)) +
                          "' subcommand was used");
  } else {
    if (suite == h::Suite::Rover)
      throw modelsel::io::ConfigError("--config", "the rover suite needs a config file");
    modelsel::io::json j = {{"scenario", h::suite_id(suite)}};
    cfg = h::config_from_json(j);
    cfg.output_dir = fs::path("out") / h::suite_id(suite);
  }
  if (o.seed) {
    cfg.seed = *o.seed;
    cfg.seeds.clear();
  }
  if (o.trials) {
    cfg.trials = *o.trials;
    cfg.seeds.clear();
  }
  if (o.steps) cfg.n_steps = *o.steps;
  if (o.out) cfg.output_dir = *o.out;
  if (o.jobs) cfg.threads = *o.jobs;
  cfg.validate();
  return cfg;
}

void warn_degenerate(const h::ExperimentConfig& cfg) {
  if (cfg.suite != h::Suite::Rover && !cfg.costs.validate())
    std::cerr << "warning: c_slow <= c_fast; the slow model is never worth avoiding\n";
}

void print_report(const h::ComparisonReport& r) {
  std::printf("%s (%zu trial rows%s)\n", r.label.c_str(), r.trials.size(),
              r.complete ? "" : ", incomplete");
  std::printf("  %-14s %16s %12s %14s %10s\n", "policy", "reward", "cost", "mean loss",
              "slow frac");
  for (const auto& a : r.policies)
    std::printf("  %-14s %16.6g %12.6g %14.6g %10.4f\n",
                std::string(modelsel::policy_label(a.policy)).c_str(), a.cumulative_reward.mean,
                a.total_cost.mean, a.mean_loss.mean, a.slow_query_fraction.mean);
}

bool run_checks(const std::vector<h::ComparisonReport>& reports) {
  bool ok = true;
  for (const auto& r : reports) {
    const h::CheckResult c = h::check_report(r);
    for (const auto& f : c.failures) std::cerr << "check failed: " << f << '\n';
    ok = ok && c.ok;
  }
  if (ok) std::cerr << "checks passed\n";
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fast/slow model selection experiments"};
  app.require_subcommand(1);

  Overrides linreg_o, dnn_o, rover_o, cal_o;
  CLI::App* linreg = app.add_subcommand("linreg", "Coreset linear-regression suite");
  add_common(linreg, linreg_o, true);
  linreg->add_flag("--check", linreg_o.check, "Exit 3 unless the policy ordering holds");
  CLI::App* dnn = app.add_subcommand("dnn", "Proxy fast/slow network suite");
  add_common(dnn, dnn_o, true);
  dnn->add_flag("--check", dnn_o.check, "Exit 3 unless the policy ordering holds");
  CLI::App* rover = app.add_subcommand("rover", "Rover navigation suite");
  add_common(rover, rover_o, false);
  rover->add_flag("--check", rover_o.check,
                  "Exit 3 unless ordering, safety and goal checks hold");
  CLI::App* cal = app.add_subcommand("calibrate", "Calibrate the fast-set bloat for rover maps");
  cal->add_option("--config", cal_o.config, "Rover experiment config (JSON)")->required();
  cal->add_option("--out", cal_o.out, "Output directory");
  cal->add_option("--jobs", cal_o.jobs, "Worker threads")->check(CLI::PositiveNumber);

  std::vector<std::string> summaries;
  std::string report_out = "out/report";
  bool report_check = false;
  CLI::App* rep = app.add_subcommand("report", "Merge summary.json files and redraw charts");
  rep->add_option("summaries", summaries, "summary.json files")->required()->check(CLI::ExistingFile);
  rep->add_option("--out", report_out, "Output directory");
  rep->add_flag("--check", report_check, "Exit 3 unless the policy ordering holds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  std::signal(SIGINT, on_sigint);

  try {
    if (rep->parsed()) {
      std::vector<fs::path> paths(summaries.begin(), summaries.end());
      const h::ComparisonReport r = h::report(paths, report_out);
      print_report(r);
      std::printf("wrote %s\n", report_out.c_str());
      if (report_check && !run_checks({r})) return kExitCheck;
      return 0;
    }
    if (cal->parsed()) {
      h::ExperimentConfig cfg = build_config(h::Suite::Rover, cal_o);
      if (!cal_o.out) cfg.output_dir = cfg.output_dir / "calibration";
      for (const auto& a : h::calibrate(cfg))
        std::printf("%s: mu = %.17g over %zu runs\n", a.scenario.c_str(), a.calibration.mu,
                    a.calibration.n_runs);
      std::printf("wrote %s\n", cfg.output_dir.string().c_str());
      return 0;
    }

    h::Suite suite = h::Suite::Linreg;
    const Overrides* o = &linreg_o;
    if (dnn->parsed()) {
      suite = h::Suite::Dnn;
      o = &dnn_o;
    } else if (rover->parsed()) {
      suite = h::Suite::Rover;
      o = &rover_o;
    }
    const h::ExperimentConfig cfg = build_config(suite, *o);
    warn_degenerate(cfg);
    const h::SuiteResult res = h::run_suite(cfg, &g_cancel);
    std::vector<h::ComparisonReport> reports;
    for (const auto& out : res.outputs) {
      print_report(out.report);
      std::printf("wrote %s\n", out.dir.string().c_str());
      reports.push_back(out.report);
    }
    if (res.interrupted) {
      std::cerr << "interrupted; completed trials were written\n";
      return kExitInterrupted;
    }
    if (o->check && !run_checks(reports)) return kExitCheck;
    return 0;
  } catch (const modelsel::io::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
