#include "modelsel/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <stdexcept>
#include <thread>

#include "modelsel/coreset_linreg.hpp"
#include "modelsel/episode.hpp"
#include "modelsel/navigation.hpp"
#include "steps_csv.hpp"

namespace modelsel::harness {

namespace fs = std::filesystem;
using io::ConfigError;

// --- steps.csv ---------------------------------------------------------------

namespace detail {

void append_step_row(std::string& out, std::size_t trial, PolicyKind policy,
                     const StepRecord& rec) {
  out += std::to_string(trial);
  out += ',';
  out += policy_id(policy);
  out += ',';
  out += std::to_string(rec.t);
  out += ',';
  out += rec.action == Action::InvokeSlow ? '1' : '0';
  out += ',';
  out += io::format_double(rec.loss_realized.value());
  out += ',';
  out += io::format_double(rec.cost_incurred);
  out += ',';
  out += io::format_double(rec.reward.value());
  out += ',';
  out += io::format_double(rec.bound_used.value());
  out += '\n';
}

namespace {

template <typename T>
T parse_field(std::string_view s, std::size_t line) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw std::runtime_error("steps.csv line " + std::to_string(line) + ": bad field '" +
                             std::string(s) + "'");
  return v;
}

}  // namespace

void for_each_step_row(const fs::path& file, const std::function<void(const StepRow&)>& fn) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  std::string line;
  std::size_t line_no = 0;
  std::string_view fields[8];
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line != kStepsHeader)
        throw std::runtime_error(file.string() + ": unexpected steps.csv header");
      continue;
    }
    if (line.empty()) continue;
    std::string_view rest = line;
    std::size_t n = 0;
    while (n < 8) {
      const auto comma = rest.find(',');
      fields[n++] = rest.substr(0, comma);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (n != 8 || rest.find(',') != std::string_view::npos)
      throw std::runtime_error("steps.csv line " + std::to_string(line_no) + ": expected 8 fields");
    StepRow row;
    row.trial = parse_field<std::size_t>(fields[0], line_no);
    try {
      row.policy = parse_policy(fields[1]);
    } catch (const std::invalid_argument&) {
      throw std::runtime_error("steps.csv line " + std::to_string(line_no) + ": unknown policy");
    }
    row.t = parse_field<std::size_t>(fields[2], line_no);
    row.action = parse_field<int>(fields[3], line_no);
    row.loss = parse_field<double>(fields[4], line_no);
    row.cost = parse_field<double>(fields[5], line_no);
    row.reward = parse_field<double>(fields[6], line_no);
    row.bound = parse_field<double>(fields[7], line_no);
    fn(row);
  }
}

}  // namespace detail

// --- config ------------------------------------------------------------------

std::string_view suite_id(Suite s) noexcept {
  switch (s) {
    case Suite::Linreg: return "linreg";
    case Suite::Dnn: return "dnn";
    case Suite::Rover: return "rover";
  }
  return "linreg";
}

Suite parse_suite(std::string_view id) {
  if (id == "linreg") return Suite::Linreg;
  if (id == "dnn") return Suite::Dnn;
  if (id == "rover") return Suite::Rover;
  throw std::invalid_argument("unknown scenario '" + std::string(id) + "'");
}

std::uint64_t ExperimentConfig::trial_seed(std::size_t trial) const {
  if (!seeds.empty()) return seeds.at(trial);
  return derive_seed(seed, {trial});
}

void ExperimentConfig::validate() const {
  if (trial_count() < 1) throw ConfigError("trials", "must be >= 1");
  if (threads < 1) throw ConfigError("threads", "must be >= 1");
  try {
    weights.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("weights", e.what());
  }
  try {
    (void)costs.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("costs", e.what());
  }
  switch (suite) {
    case Suite::Linreg:
      if (linreg.n < 1 || linreg.m < 1) throw ConfigError("linreg", "n and m must be >= 1");
      if (!(linreg.epsilon > 0.0 && linreg.epsilon < 1.0))
        throw ConfigError("linreg.epsilon", "must lie in (0, 1)");
      if (!(linreg.input_scale > 0.0)) throw ConfigError("linreg.input_scale", "must be > 0");
      if (!(linreg.bias_share >= 0.0)) throw ConfigError("linreg.bias_share", "must be >= 0");
      break;
    case Suite::Dnn:
      if (dnn.n < 1 || dnn.m < 1 || dnn.n_features < 1)
        throw ConfigError("dnn", "n, m and n_features must be >= 1");
      try {
        dnn.bound.validate();
      } catch (const std::invalid_argument& e) {
        throw ConfigError("dnn", e.what());
      }
      if (!(dnn.y_lo > 0.0 && dnn.y_hi > dnn.y_lo))
        throw ConfigError("dnn", "output range must satisfy 0 < y_lo < y_hi");
      break;
    case Suite::Rover:
      if (rover.scenarios.empty()) throw ConfigError("rover.scenarios", "at least one scenario");
      for (std::size_t i = 0; i < rover.scenarios.size(); ++i)
        if (!fs::exists(rover.scenarios[i]))
          throw ConfigError("rover.scenarios[" + std::to_string(i) + "]",
                            "file not found: " + rover.scenarios[i].string());
      for (const auto& [name, file] : rover.calibrations)
        if (!fs::exists(file))
          throw ConfigError("rover.calibrations." + name, "file not found: " + file.string());
      break;
  }
}

ExperimentConfig config_from_json(const json& j, const fs::path& base_dir) {
  using io::get_number;
  using io::get_u64;
  if (!j.is_object()) throw ConfigError("<root>", "expected an object");
  if (j.contains("schema_version") &&
      get_u64(j, "schema_version", "") != static_cast<std::uint64_t>(kSchemaVersion))
    throw ConfigError("schema_version", "unsupported schema version");

  ExperimentConfig cfg;
  try {
    cfg.suite = parse_suite(io::get_string(j, "scenario", ""));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("scenario", e.what());
  }
  cfg.seed = get_u64(j, "seed", "", cfg.seed);
  if (j.contains("seeds")) {
    const json& s = j.at("seeds");
    if (!s.is_array()) throw ConfigError("seeds", "expected an array of integers");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!s[i].is_number_unsigned() && !(s[i].is_number_integer() && s[i].get<std::int64_t>() >= 0))
        throw ConfigError("seeds[" + std::to_string(i) + "]", "expected a non-negative integer");
      cfg.seeds.push_back(s[i].get<std::uint64_t>());
    }
  }
  cfg.trials = get_u64(j, "trials", "", cfg.trials);
  cfg.n_steps = get_u64(j, "n_steps", "", cfg.n_steps);
  cfg.threads = static_cast<unsigned>(get_u64(j, "threads", "", cfg.threads));

  if (cfg.suite == Suite::Rover) cfg.weights = {0.7, 0.3};
  if (j.contains("weights")) {
    const json& w = j.at("weights");
    cfg.weights.alpha = get_number(w, "alpha", "weights", cfg.weights.alpha);
    cfg.weights.beta = get_number(w, "beta", "weights", cfg.weights.beta);
  }
  if (cfg.suite == Suite::Dnn) cfg.costs = {0.0, 0.017};
  if (j.contains("costs")) {
    const json& c = j.at("costs");
    cfg.costs.c_fast = get_number(c, "c_fast", "costs", cfg.costs.c_fast);
    cfg.costs.c_slow = get_number(c, "c_slow", "costs", cfg.costs.c_slow);
  }
  if (j.contains("linreg")) {
    const json& l = j.at("linreg");
    auto& s = cfg.linreg;
    s.n = static_cast<Eigen::Index>(get_u64(l, "n", "linreg", static_cast<std::uint64_t>(s.n)));
    s.m = static_cast<Eigen::Index>(get_u64(l, "m", "linreg", static_cast<std::uint64_t>(s.m)));
    s.epsilon = get_number(l, "epsilon", "linreg", s.epsilon);
    s.input_scale = get_number(l, "input_scale", "linreg", s.input_scale);
    s.bias_share = get_number(l, "bias_share", "linreg", s.bias_share);
  }
  if (j.contains("dnn")) {
    const json& d = j.at("dnn");
    auto& s = cfg.dnn;
    s.n = static_cast<Eigen::Index>(get_u64(d, "n", "dnn", static_cast<std::uint64_t>(s.n)));
    s.m = static_cast<Eigen::Index>(get_u64(d, "m", "dnn", static_cast<std::uint64_t>(s.m)));
    s.bound.epsilon = get_number(d, "epsilon", "dnn", s.bound.epsilon);
    s.bound.delta = get_number(d, "delta", "dnn", s.bound.delta);
    s.bound.m_loss_cap = get_number(d, "m_loss_cap", "dnn", s.bound.m_loss_cap);
    s.n_features = static_cast<Eigen::Index>(
        get_u64(d, "n_features", "dnn", static_cast<std::uint64_t>(s.n_features)));
    s.y_lo = get_number(d, "y_lo", "dnn", s.y_lo);
    s.y_hi = get_number(d, "y_hi", "dnn", s.y_hi);
  }
  if (j.contains("rover")) {
    const json& r = j.at("rover");
    if (!r.is_object()) throw ConfigError("rover", "expected an object");
    if (r.contains("scenarios")) {
      const json& s = r.at("scenarios");
      if (!s.is_array()) throw ConfigError("rover.scenarios", "expected an array of paths");
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (!s[i].is_string())
          throw ConfigError("rover.scenarios[" + std::to_string(i) + "]", "expected a path");
        fs::path p = s[i].get<std::string>();
        cfg.rover.scenarios.push_back(p.is_relative() ? base_dir / p : p);
      }
    }
    if (r.contains("calibrations")) {
      const json& c = r.at("calibrations");
      if (!c.is_object()) throw ConfigError("rover.calibrations", "expected name -> path");
      for (const auto& [name, v] : c.items()) {
        if (!v.is_string()) throw ConfigError("rover.calibrations." + name, "expected a path");
        fs::path p = v.get<std::string>();
        cfg.rover.calibrations[name] = p.is_relative() ? base_dir / p : p;
      }
    }
    cfg.rover.record_reach_sets =
        io::get_bool(r, "record_reach_sets", "rover", cfg.rover.record_reach_sets);
  }
  if (j.contains("output_dir")) {
    fs::path p = io::get_string(j, "output_dir", "");
    cfg.output_dir = p.is_relative() ? base_dir / p : p;
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const fs::path& file) {
  return config_from_json(io::load_json(file), file.parent_path());
}

json to_json(const ExperimentConfig& cfg) {
  json out = {{"schema_version", kSchemaVersion},
              {"scenario", suite_id(cfg.suite)},
              {"seed", cfg.seed},
              {"trials", cfg.trial_count()},
              {"n_steps", cfg.n_steps},
              {"weights", {{"alpha", cfg.weights.alpha}, {"beta", cfg.weights.beta}}},
              {"costs", {{"c_fast", cfg.costs.c_fast}, {"c_slow", cfg.costs.c_slow}}}};
  if (!cfg.seeds.empty()) out["seeds"] = cfg.seeds;
  switch (cfg.suite) {
    case Suite::Linreg:
      out["linreg"] = {{"n", cfg.linreg.n},
                       {"m", cfg.linreg.m},
                       {"epsilon", cfg.linreg.epsilon},
                       {"input_scale", cfg.linreg.input_scale},
                       {"bias_share", cfg.linreg.bias_share}};
      break;
    case Suite::Dnn:
      out["dnn"] = {{"n", cfg.dnn.n},
                    {"m", cfg.dnn.m},
                    {"epsilon", cfg.dnn.bound.epsilon},
                    {"delta", cfg.dnn.bound.delta},
                    {"m_loss_cap", cfg.dnn.bound.m_loss_cap},
                    {"n_features", cfg.dnn.n_features},
                    {"y_lo", cfg.dnn.y_lo},
                    {"y_hi", cfg.dnn.y_hi}};
      break;
    case Suite::Rover: {
      json names = json::array();
      for (const auto& p : cfg.rover.scenarios) names.push_back(p.filename().string());
      out["rover"] = {{"scenarios", names}, {"record_reach_sets", cfg.rover.record_reach_sets}};
      break;
    }
  }
  return out;
}

// --- reports -----------------------------------------------------------------

namespace {

Stat make_stat(const std::vector<double>& xs) {
  Stat s;
  if (xs.empty()) return s;
  for (double x : xs) {
    if (!std::isfinite(x)) {
      const bool neg = std::any_of(xs.begin(), xs.end(), [](double v) { return v == -INFINITY; });
      const bool pos = std::any_of(xs.begin(), xs.end(), [](double v) { return v == INFINITY; });
      s.mean = (neg && pos) || std::isnan(x) ? NAN : (neg ? -INFINITY : INFINITY);
      s.std = NAN;
      return s;
    }
  }
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

json stat_to_json(const Stat& s) {
  return {{"mean", io::number_to_json(s.mean)}, {"std", io::number_to_json(s.std)}};
}

Stat stat_from_json(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected {mean, std}");
  if (!j.contains("mean") || !j.contains("std")) throw ConfigError(path, "expected {mean, std}");
  return {io::number_from_json(j.at("mean"), path + ".mean"),
          io::number_from_json(j.at("std"), path + ".std")};
}

}  // namespace

std::vector<PolicyAggregate> aggregate(const std::vector<TrialRow>& rows) {
  std::vector<PolicyAggregate> out;
  for (PolicyKind p : kAllPolicies) {
    std::vector<double> reward, cost, loss, frac;
    for (const auto& r : rows) {
      if (r.policy != p) continue;
      reward.push_back(r.cumulative_reward.value());
      cost.push_back(r.total_cost);
      loss.push_back(r.mean_loss.value());
      frac.push_back(r.slow_query_fraction);
    }
    out.push_back({p, reward.size(), make_stat(reward), make_stat(cost), make_stat(loss),
                   make_stat(frac)});
  }
  return out;
}

const PolicyAggregate& ComparisonReport::get(PolicyKind p) const {
  for (const auto& a : policies)
    if (a.policy == p) return a;
  throw std::out_of_range("policy missing from report");
}

json to_json(const ComparisonReport& r) {
  json policies = json::array();
  for (const auto& a : r.policies)
    policies.push_back({{"policy", policy_id(a.policy)},
                        {"label", policy_label(a.policy)},
                        {"n_trials", a.n_trials},
                        {"cumulative_reward", stat_to_json(a.cumulative_reward)},
                        {"total_cost", stat_to_json(a.total_cost)},
                        {"mean_loss", stat_to_json(a.mean_loss)},
                        {"slow_query_fraction", stat_to_json(a.slow_query_fraction)}});
  json trials = json::array();
  for (const auto& t : r.trials) {
    json row = {{"trial", t.trial},
                {"seed", t.seed},
                {"policy", policy_id(t.policy)},
                {"cumulative_reward", io::number_to_json(t.cumulative_reward.value())},
                {"total_cost", io::number_to_json(t.total_cost)},
                {"mean_loss", io::number_to_json(t.mean_loss.value())},
                {"slow_query_fraction", t.slow_query_fraction},
                {"n_steps", t.n_steps}};
    if (t.rover)
      row["rover"] = {{"reached_goal", t.rover->reached_goal},
                      {"flagged_unsafe", t.rover->flagged_unsafe},
                      {"step_cap_hit", t.rover->step_cap_hit},
                      {"posthoc_checks", t.rover->posthoc_checks},
                      {"posthoc_violations", t.rover->posthoc_violations}};
    trials.push_back(std::move(row));
  }
  return {{"schema_version", kSchemaVersion},
          {"suite", r.suite},
          {"label", r.label},
          {"complete", r.complete},
          {"config", r.config},
          {"policies", policies},
          {"trials", trials}};
}

ComparisonReport report_from_json(const json& j, const std::string& source) {
  if (!j.is_object()) throw ConfigError(source, "expected a summary object");
  const auto version = io::get_u64(j, "schema_version", source);
  if (version != static_cast<std::uint64_t>(kSchemaVersion))
    throw ConfigError(source + ".schema_version",
                      "schema version " + std::to_string(version) + " does not match " +
                          std::to_string(kSchemaVersion));
  ComparisonReport r;
  r.suite = io::get_string(j, "suite", source);
  r.label = io::get_string(j, "label", source);
  r.complete = io::get_bool(j, "complete", source, true);
  if (j.contains("config")) r.config = j.at("config");
  if (!j.contains("trials") || !j.at("trials").is_array())
    throw ConfigError(source + ".trials", "expected an array");
  const json& trials = j.at("trials");
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const json& t = trials[i];
    const std::string p = source + ".trials[" + std::to_string(i) + "]";
    TrialRow row;
    row.trial = io::get_u64(t, "trial", p);
    row.seed = io::get_u64(t, "seed", p);
    try {
      row.policy = parse_policy(io::get_string(t, "policy", p));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(p + ".policy", e.what());
    }
    if (!t.contains("cumulative_reward") || !t.contains("total_cost") || !t.contains("mean_loss"))
      throw ConfigError(p, "missing metric");
    const double reward = io::number_from_json(t.at("cumulative_reward"), p + ".cumulative_reward");
    row.cumulative_reward = reward == -INFINITY ? Reward::negative_infinity() : Reward(reward);
    row.total_cost = io::number_from_json(t.at("total_cost"), p + ".total_cost");
    const double loss = io::number_from_json(t.at("mean_loss"), p + ".mean_loss");
    row.mean_loss = loss == INFINITY ? Loss::infinite() : Loss(loss);
    row.slow_query_fraction = io::get_number(t, "slow_query_fraction", p);
    row.n_steps = io::get_u64(t, "n_steps", p);
    if (t.contains("rover")) {
      const json& rv = t.at("rover");
      const std::string rp = p + ".rover";
      row.rover = RoverTrialInfo{io::get_bool(rv, "reached_goal", rp, false),
                                 io::get_bool(rv, "flagged_unsafe", rp, false),
                                 io::get_bool(rv, "step_cap_hit", rp, false),
                                 io::get_u64(rv, "posthoc_checks", rp, 0),
                                 io::get_u64(rv, "posthoc_violations", rp, 0)};
    }
    r.trials.push_back(row);
  }
  r.policies = aggregate(r.trials);
  if (j.contains("policies")) {
    // Stored aggregates are informational; the recomputed ones are
    // authoritative, but a stored value that disagrees means a corrupt file.
    const json& pol = j.at("policies");
    if (!pol.is_array()) throw ConfigError(source + ".policies", "expected an array");
    for (std::size_t i = 0; i < pol.size(); ++i) {
      const std::string pp = source + ".policies[" + std::to_string(i) + "]";
      (void)stat_from_json(pol[i].value("cumulative_reward", json::object()),
                           pp + ".cumulative_reward");
    }
  }
  return r;
}

// --- suites ------------------------------------------------------------------

namespace {

struct TrialOutput {
  std::vector<TrialRow> rows;
  std::string steps;
  std::string trajectories;
  std::string reach_sets;
};

TrialRow trial_row(std::size_t trial, std::uint64_t seed, PolicyKind p,
                   const EpisodeSummary& s) {
  return {trial,       seed, p, s.cumulative_reward, s.total_cost, s.mean_loss,
          s.slow_query_fraction, s.n_steps, std::nullopt};
}

/// Runs fn(i) for every trial on `threads` workers. Results come back in
/// trial order; trials not started before cancellation stay empty.
std::vector<std::optional<TrialOutput>> run_trials(
    std::size_t count, unsigned threads, const std::atomic<bool>* cancel,
    const std::function<TrialOutput(std::size_t)>& fn) {
  std::vector<std::optional<TrialOutput>> out(count);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (true) {
      if (cancel && cancel->load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        out[i] = fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
  return out;
}

void write_text(const fs::path& file, const std::string& header,
                const std::vector<std::optional<TrialOutput>>& parts,
                std::string TrialOutput::*member) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << header << '\n';
  for (const auto& p : parts)
    if (p) out << (*p).*member;
}

void emit(const fs::path& dir, ComparisonReport& report,
          const std::vector<std::optional<TrialOutput>>& parts, bool rover) {
  fs::create_directories(dir);
  for (const auto& p : parts)
    if (p) report.trials.insert(report.trials.end(), p->rows.begin(), p->rows.end());
  report.policies = aggregate(report.trials);
  write_text(dir / "steps.csv", std::string(detail::kStepsHeader), parts, &TrialOutput::steps);
  if (rover) {
    write_text(dir / "trajectories.csv", "trial,policy,t,x,y,yaw,v,action,loss,reward", parts,
               &TrialOutput::trajectories);
    write_text(dir / "reach_sets.csv",
               "trial,policy,step,model,k,lo_x,lo_y,lo_yaw,lo_v,hi_x,hi_y,hi_yaw,hi_v", parts,
               &TrialOutput::reach_sets);
  }
  io::save_json(dir / "summary.json", to_json(report));
  render_charts(dir);
}

TrialOutput linreg_trial(const ExperimentConfig& cfg, std::size_t trial) {
  const std::uint64_t ts = cfg.trial_seed(trial);
  const auto& s = cfg.linreg;
  const std::uint64_t pair_seed = derive_seed(ts, {1});
  Rng pair_rng(pair_seed);
  linreg::CoresetPair pair =
      linreg::generate_coreset_pair(pair_rng, s.n, s.m, s.epsilon, {s.bias_share});
  pair.seed = pair_seed;
  const linreg::InputDistribution dist{s.n, s.input_scale, derive_seed(ts, {2})};
  const std::vector<Eigen::VectorXd> inputs = dist.sample(cfg.n_steps);

  EpisodeModels<Eigen::VectorXd, Eigen::VectorXd> models;
  models.fast = [&](const Eigen::VectorXd& x) { return pair.fast(x); };
  models.slow = [&](const Eigen::VectorXd& x) { return pair.slow(x); };
  models.loss = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return Loss(linreg::loss_l2(a, b));
  };
  models.gain_bound = [&](const Eigen::VectorXd&, const Eigen::VectorXd& y) {
    return Loss(linreg::loss_bound_lr(y, pair.epsilon));
  };

  TrialOutput out;
  for (PolicyKind p : kAllPolicies) {
    Rng policy_rng(derive_seed(ts, {3}));
    const EpisodeResult res = run_episode<Eigen::VectorXd, Eigen::VectorXd>(
        inputs, models, p, policy_rng, cfg.weights, cfg.costs);
    out.rows.push_back(trial_row(trial, ts, p, res.summary));
    for (const auto& rec : res.records) detail::append_step_row(out.steps, trial, p, rec);
  }
  return out;
}

TrialOutput dnn_trial(const ExperimentConfig& cfg, std::size_t trial) {
  const std::uint64_t ts = cfg.trial_seed(trial);
  const auto& s = cfg.dnn;
  Rng pair_rng(derive_seed(ts, {1}));
  const dnn::ProxyPair pair =
      dnn::make_proxy_pair(pair_rng, s.n, s.m, s.bound, {s.n_features, s.y_lo, s.y_hi});
  const std::vector<dnn::IndexedInput> inputs =
      dnn::sample_inputs(s.n, cfg.n_steps, derive_seed(ts, {2}));

  EpisodeModels<dnn::IndexedInput, Eigen::VectorXd> models;
  models.fast = [&](const dnn::IndexedInput& in) { return pair.fast(in.x, in.index).y; };
  models.slow = [&](const dnn::IndexedInput& in) { return pair.slow(in.x); };
  models.loss = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return Loss(linreg::loss_l2(a, b));
  };
  models.gain_bound = [&](const dnn::IndexedInput&, const Eigen::VectorXd& y) {
    return Loss(dnn::expected_loss_bound_dnn(y, pair.bound));
  };

  TrialOutput out;
  for (PolicyKind p : kAllPolicies) {
    Rng policy_rng(derive_seed(ts, {3}));
    const EpisodeResult res = run_episode<dnn::IndexedInput, Eigen::VectorXd>(
        inputs, models, p, policy_rng, cfg.weights, cfg.costs);
    out.rows.push_back(trial_row(trial, ts, p, res.summary));
    for (const auto& rec : res.records) detail::append_step_row(out.steps, trial, p, rec);
  }
  return out;
}

TrialOutput rover_trial(const ExperimentConfig& cfg, const rover::RoverScenario& scn, double mu,
                        std::size_t trial) {
  const std::uint64_t ts = cfg.trial_seed(trial);
  rover::ReachCache cache;
  TrialOutput out;
  for (PolicyKind p : kAllPolicies) {
    rover::NavigationOptions opts;
    opts.posthoc = p == PolicyKind::Selector;
    opts.record_reach_sets = cfg.rover.record_reach_sets;
    opts.cache = &cache;
    const rover::NavigationResult res = rover::run_navigation(scn, p, ts, mu, opts);

    TrialRow row = trial_row(trial, ts, p, res.summary);
    row.rover = RoverTrialInfo{res.reached_goal, res.flagged_unsafe, res.step_cap_hit,
                               res.posthoc_checks, res.posthoc_violations};
    out.rows.push_back(row);
    for (const auto& rec : res.records) detail::append_step_row(out.steps, trial, p, rec);

    const std::string prefix = std::to_string(trial) + "," + std::string(policy_id(p)) + ",";
    for (const auto& tr : res.trajectory) {
      out.trajectories += prefix + std::to_string(tr.t) + "," + io::format_double(tr.state.x) +
                          "," + io::format_double(tr.state.y) + "," +
                          io::format_double(tr.state.yaw) + "," + io::format_double(tr.state.v) +
                          "," + (tr.action == Action::InvokeSlow ? "1" : "0") + "," +
                          io::format_double(tr.loss.value()) + "," +
                          io::format_double(tr.reward.value()) + "\n";
    }
    for (const auto& e : res.reach_log) {
      for (std::size_t k = 0; k < e.boxes.size(); ++k) {
        const auto& b = e.boxes[k];
        out.reach_sets += prefix + std::to_string(e.step) + "," +
                          (e.model == Action::InvokeSlow ? "slow" : "fast") + "," +
                          std::to_string(k + 1);
        for (Eigen::Index i = 0; i < b.dim(); ++i) out.reach_sets += "," + io::format_double(b.lo()(i));
        for (Eigen::Index i = 0; i < b.dim(); ++i) out.reach_sets += "," + io::format_double(b.hi()(i));
        out.reach_sets += "\n";
      }
    }
  }
  return out;
}

io::CalibrationArtifact calibrate_one(const rover::RoverScenario& scn, unsigned threads) {
  io::CalibrationArtifact a;
  a.scenario = scn.name;
  a.seed = scn.calibration_seed;
  a.calibration = rover::calibrate_scenario(scn, scn.calibration_seed, threads);
  a.fast_samples = scn.fast_config().n_samples;
  a.slow_samples = scn.slow_config().n_samples;
  return a;
}

bool any_missing(const std::vector<std::optional<TrialOutput>>& parts) {
  return std::any_of(parts.begin(), parts.end(), [](const auto& p) { return !p.has_value(); });
}

}  // namespace

SuiteResult run_suite(const ExperimentConfig& cfg, const std::atomic<bool>* cancel) {
  cfg.validate();
  SuiteResult result;
  const std::size_t n = cfg.trial_count();

  if (cfg.suite != Suite::Rover) {
    auto parts = run_trials(n, cfg.threads, cancel, [&](std::size_t i) {
      return cfg.suite == Suite::Linreg ? linreg_trial(cfg, i) : dnn_trial(cfg, i);
    });
    ComparisonReport report;
    report.suite = std::string(suite_id(cfg.suite));
    report.label = report.suite;
    report.config = to_json(cfg);
    report.complete = !any_missing(parts);
    result.interrupted = !report.complete;
    emit(cfg.output_dir, report, parts, false);
    result.outputs.push_back({std::move(report), cfg.output_dir});
    return result;
  }

  std::set<std::string> names;
  for (const auto& file : cfg.rover.scenarios) {
    if (cancel && cancel->load()) {
      result.interrupted = true;
      break;
    }
    const rover::RoverScenario scn = io::load_scenario(file);
    if (!names.insert(scn.name).second)
      throw ConfigError("rover.scenarios", "duplicate scenario name '" + scn.name + "'");
    const fs::path dir = cfg.output_dir / scn.name;
    fs::create_directories(dir);

    io::CalibrationArtifact cal;
    if (const auto it = cfg.rover.calibrations.find(scn.name); it != cfg.rover.calibrations.end()) {
      cal = io::calibration_from_json(io::load_json(it->second), it->second.string());
      if (cal.scenario != scn.name)
        throw ConfigError("rover.calibrations." + scn.name, "artifact belongs to '" + cal.scenario + "'");
    } else {
      cal = calibrate_one(scn, cfg.threads);
    }
    io::save_json(dir / "calibration.json", to_json(cal));

    auto parts = run_trials(n, cfg.threads, cancel, [&](std::size_t i) {
      return rover_trial(cfg, scn, cal.calibration.mu, i);
    });
    ComparisonReport report;
    report.suite = "rover";
    report.label = scn.name;
    report.config = to_json(cfg);
    report.config["scenario_definition"] = io::to_json(scn);
    report.config["mu"] = cal.calibration.mu;
    report.complete = !any_missing(parts);
    if (!report.complete) result.interrupted = true;
    emit(dir, report, parts, true);
    result.outputs.push_back({std::move(report), dir});
  }
  return result;
}

std::vector<io::CalibrationArtifact> calibrate(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.suite != Suite::Rover) throw ConfigError("scenario", "calibration needs a rover config");
  fs::create_directories(cfg.output_dir);
  std::vector<io::CalibrationArtifact> out;
  for (const auto& file : cfg.rover.scenarios) {
    const rover::RoverScenario scn = io::load_scenario(file);
    out.push_back(calibrate_one(scn, cfg.threads));
    io::save_json(cfg.output_dir / ("calibration_" + scn.name + ".json"), to_json(out.back()));
  }
  return out;
}

ComparisonReport report(const std::vector<fs::path>& summaries, const fs::path& out_dir) {
  if (summaries.empty()) throw ConfigError("report", "at least one summary is required");
  ComparisonReport merged;
  std::vector<std::pair<fs::path, std::size_t>> csv_sources;  // (steps.csv, trial offset)
  std::size_t offset = 0;
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    const ComparisonReport r =
        report_from_json(io::load_json(summaries[i]), summaries[i].string());
    if (i == 0) {
      merged.suite = r.suite;
      merged.label = r.label;
      merged.config = r.config;
    } else {
      if (r.suite != merged.suite)
        throw ConfigError(summaries[i].string() + ".suite",
                          "cannot merge '" + r.suite + "' into '" + merged.suite + "'");
      if (r.label != merged.label) merged.label = "merged";
      if (r.config != merged.config) merged.config = json::object();
    }
    merged.complete = merged.complete && r.complete;
    const fs::path csv = summaries[i].parent_path() / "steps.csv";
    if (!fs::exists(csv)) throw ConfigError(summaries[i].string(), "sibling steps.csv not found");
    csv_sources.emplace_back(csv, offset);

    std::size_t max_trial = 0;
    for (TrialRow row : r.trials) {
      max_trial = std::max(max_trial, row.trial + 1);
      row.trial += offset;
      merged.trials.push_back(row);
    }
    offset += max_trial;
  }
  merged.policies = aggregate(merged.trials);

  fs::create_directories(out_dir);
  const fs::path tmp = out_dir / "steps.csv.tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << detail::kStepsHeader << '\n';
    for (const auto& [csv, off] : csv_sources) {
      std::string buf;
      detail::for_each_step_row(csv, [&](const detail::StepRow& r) {
        buf.clear();
        StepRecord rec;
        rec.t = r.t;
        rec.action = r.action ? Action::InvokeSlow : Action::UseFast;
        rec.loss_realized = r.loss == INFINITY ? Loss::infinite() : Loss(r.loss);
        rec.cost_incurred = r.cost;
        rec.reward = r.reward == -INFINITY ? Reward::negative_infinity() : Reward(r.reward);
        rec.bound_used = r.bound == INFINITY ? Loss::infinite() : Loss(r.bound);
        detail::append_step_row(buf, r.trial + off, r.policy, rec);
        out << buf;
      });
    }
  }
  fs::rename(tmp, out_dir / "steps.csv");
  io::save_json(out_dir / "summary.json", to_json(merged));
  render_charts(out_dir);
  return merged;
}

CheckResult check_report(const ComparisonReport& r) {
  CheckResult out;
  auto fail = [&](std::string msg) {
    out.ok = false;
    out.failures.push_back(r.label + ": " + msg);
  };
  auto reward = [&](PolicyKind p) {
    const double v = r.get(p).cumulative_reward.mean;
    return std::isnan(v) ? -INFINITY : v;
  };
  const double sel = reward(PolicyKind::Selector);
  if (reward(PolicyKind::Oracle) < sel) fail("Oracle mean reward below Our Selector");
  for (PolicyKind p : {PolicyKind::Fast, PolicyKind::Slow, PolicyKind::Random})
    if (sel < reward(p))
      fail("Our Selector mean reward below " + std::string(policy_label(p)));
  if (r.suite == "rover") {
    for (const auto& t : r.trials) {
      if (t.policy != PolicyKind::Selector || !t.rover) continue;
      if (t.rover->posthoc_violations > 0)
        fail("trial " + std::to_string(t.trial) + ": post-hoc slow set meets an obstacle");
      if (!t.rover->reached_goal) fail("trial " + std::to_string(t.trial) + ": goal not reached");
    }
  }
  return out;
}

}  // namespace modelsel::harness
