// Micro benchmarks for the per-step hot paths.

#include <benchmark/benchmark.h>

#include <span>
#include <vector>

#include "modelsel/coreset_linreg.hpp"
#include "modelsel/episode.hpp"
#include "modelsel/mpc.hpp"
#include "modelsel/navigation.hpp"
#include "modelsel/reachability.hpp"

using namespace modelsel;

namespace {

rover::RoverScenario bench_scenario() {
  rover::RoverScenario scn;
  scn.name = "bench";
  scn.waypoints = {{0, 0}, {5, 0}, {10, 3}, {15, 3}};
  return scn;
}

void reach_for_model(benchmark::State& state, bool slow) {
  const rover::RoverScenario scn = bench_scenario();
  const rover::ReferenceTrajectory ref = scn.reference();
  const rover::RoverState s = scn.start(ref);
  const rover::StepReach sr = rover::build_step_reach(scn, ref, s, 0);
  const reach::StatReachConfig cfg = slow ? scn.slow_config() : scn.fast_config();
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(reach::reach_sampled(sr.lambda, sr.x0, cfg, ++seed));
  state.counters["samples"] = static_cast<double>(cfg.n_samples);
}

void BM_ReachFast(benchmark::State& state) { reach_for_model(state, false); }
void BM_ReachSlow(benchmark::State& state) { reach_for_model(state, true); }

void BM_LinregEpisode(benchmark::State& state) {
  Rng rng(1);
  const linreg::CoresetPair pair = linreg::generate_coreset_pair(rng, 4, 4, 0.1);
  const auto inputs = linreg::InputDistribution{4, 0.95, 2}.sample(static_cast<std::size_t>(state.range(0)));
  EpisodeModels<Eigen::VectorXd, Eigen::VectorXd> models;
  models.fast = [&](const Eigen::VectorXd& x) { return pair.fast(x); };
  models.slow = [&](const Eigen::VectorXd& x) { return pair.slow(x); };
  models.loss = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return Loss(linreg::loss_l2(a, b));
  };
  models.gain_bound = [](const Eigen::VectorXd&, const Eigen::VectorXd& y) {
    return Loss(linreg::loss_bound_lr(y, 0.1));
  };
  for (auto _ : state) {
    Rng policy_rng(3);
    benchmark::DoNotOptimize(run_episode(std::span<const Eigen::VectorXd>(inputs), models,
                                         PolicyKind::Selector, policy_rng, {1.0, 0.003},
                                         {1.0, 2.5}));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_MpcTrack(benchmark::State& state) {
  const rover::RoverScenario scn = bench_scenario();
  const rover::ReferenceTrajectory ref = scn.reference();
  const rover::RoverState s = scn.start(ref);
  for (auto _ : state)
    benchmark::DoNotOptimize(rover::mpc_track(ref, s, scn.mpc.horizon, scn.params, scn.mpc));
}

}  // namespace

BENCHMARK(BM_ReachFast)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ReachSlow)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LinregEpisode)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MpcTrack)->Unit(benchmark::kMicrosecond);
BENCHMARK_MAIN();
