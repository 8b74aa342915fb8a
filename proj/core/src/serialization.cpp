#include "modelsel/serialization.hpp"

#include <bit>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "modelsel/obstacles.hpp"

namespace modelsel::io {

namespace {

const json& require(const json& obj, std::string_view key, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(join_path(path, key), "missing required field");
  return *it;
}

const json* find(const json& obj, std::string_view key, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

std::string index_path(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

template <typename F>
auto rethrow_as_config(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path.empty() ? "<root>" : path, e.what());
  }
}

}  // namespace

std::string join_path(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

json parse_json(std::string_view text, std::string_view source) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t limit = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < limit; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(std::string(source) + ":" + std::to_string(line) + ":" + std::to_string(col),
                      "JSON syntax error");
  }
}

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string(), "cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_json(buf.str(), path.string());
}

void save_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json number_to_json(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return nullptr;
  return v;
}

double number_from_json(const json& j, const std::string& field) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  throw ConfigError(field, "expected a number");
}

double get_number(const json& obj, std::string_view key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_number()) throw ConfigError(join_path(path, key), "expected a number");
  return v.get<double>();
}

double get_number(const json& obj, std::string_view key, const std::string& path,
                  double fallback) {
  const json* v = find(obj, key, path);
  if (!v) return fallback;
  if (!v->is_number()) throw ConfigError(join_path(path, key), "expected a number");
  return v->get<double>();
}

std::uint64_t get_u64(const json& obj, std::string_view key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
    throw ConfigError(join_path(path, key), "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

std::uint64_t get_u64(const json& obj, std::string_view key, const std::string& path,
                      std::uint64_t fallback) {
  if (!find(obj, key, path)) return fallback;
  return get_u64(obj, key, path);
}

std::string get_string(const json& obj, std::string_view key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_string()) throw ConfigError(join_path(path, key), "expected a string");
  return v.get<std::string>();
}

bool get_bool(const json& obj, std::string_view key, const std::string& path, bool fallback) {
  const json* v = find(obj, key, path);
  if (!v) return fallback;
  if (!v->is_boolean()) throw ConfigError(join_path(path, key), "expected true or false");
  return v->get<bool>();
}

// --- matrices ----------------------------------------------------------------

json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_from_json(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(index_path(path, i), "expected a number");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a non-empty array of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Eigen::VectorXd row = vector_from_json(j[i], index_path(path, i));
    if (static_cast<std::size_t>(row.size()) != cols)
      throw ConfigError(index_path(path, i), "ragged matrix row");
    m.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return m;
}

// --- model pairs -------------------------------------------------------------

json to_json(const linreg::CoresetPair& pair) {
  return {{"kind", "coreset_pair"},
          {"epsilon", pair.epsilon},
          {"seed", pair.seed},
          {"per_coord_scales", to_json(pair.per_coord_scales)},
          {"slow", {{"A", to_json(pair.slow.A)}, {"b", to_json(pair.slow.b)}}},
          {"fast", {{"A", to_json(pair.fast.A)}, {"b", to_json(pair.fast.b)}}}};
}

linreg::CoresetPair coreset_pair_from_json(const json& j, const std::string& path) {
  linreg::CoresetPair pair;
  pair.epsilon = get_number(j, "epsilon", path);
  pair.seed = get_u64(j, "seed", path, 0);
  pair.per_coord_scales = vector_from_json(require(j, "per_coord_scales", path),
                                           join_path(path, "per_coord_scales"));
  auto model = [&](std::string_view key) {
    const std::string p = join_path(path, key);
    const json& m = require(j, key, path);
    linreg::LinearModel lm;
    lm.A = matrix_from_json(require(m, "A", p), join_path(p, "A"));
    lm.b = vector_from_json(require(m, "b", p), join_path(p, "b"));
    rethrow_as_config(p, [&] { lm.validate(); });
    return lm;
  };
  pair.slow = model("slow");
  pair.fast = model("fast");
  if (pair.per_coord_scales.size() != pair.slow.b.size() ||
      pair.fast.A.rows() != pair.slow.A.rows() || pair.fast.A.cols() != pair.slow.A.cols())
    throw ConfigError(path.empty() ? "<root>" : path, "fast/slow model shapes disagree");
  return pair;
}

json to_json(const dnn::ProxyPair& pair) {
  const auto& p = pair.slow_predictor;
  return {{"kind", "proxy_pair"},
          {"bound",
           {{"epsilon", pair.bound.epsilon},
            {"delta", pair.bound.delta},
            {"m_loss_cap", pair.bound.m_loss_cap}}},
          {"corruption_seed", pair.corruption_seed},
          {"slow_predictor",
           {{"frequencies", to_json(p.frequencies)},
            {"phases", to_json(p.phases)},
            {"mixing", to_json(p.mixing)},
            {"y_lo", p.y_lo},
            {"y_hi", p.y_hi}}}};
}

dnn::ProxyPair proxy_pair_from_json(const json& j, const std::string& path) {
  dnn::ProxyPair pair;
  const std::string bp = join_path(path, "bound");
  const json& b = require(j, "bound", path);
  pair.bound.epsilon = get_number(b, "epsilon", bp);
  pair.bound.delta = get_number(b, "delta", bp);
  pair.bound.m_loss_cap = get_number(b, "m_loss_cap", bp);
  rethrow_as_config(bp, [&] { pair.bound.validate(); });
  pair.corruption_seed = get_u64(j, "corruption_seed", path);

  const std::string sp = join_path(path, "slow_predictor");
  const json& s = require(j, "slow_predictor", path);
  auto& p = pair.slow_predictor;
  p.frequencies = matrix_from_json(require(s, "frequencies", sp), join_path(sp, "frequencies"));
  p.phases = vector_from_json(require(s, "phases", sp), join_path(sp, "phases"));
  p.mixing = matrix_from_json(require(s, "mixing", sp), join_path(sp, "mixing"));
  p.y_lo = get_number(s, "y_lo", sp);
  p.y_hi = get_number(s, "y_hi", sp);
  if (p.phases.size() != p.frequencies.rows() || p.mixing.cols() != p.frequencies.rows())
    throw ConfigError(sp, "feature counts disagree");
  return pair;
}

// --- reachability ------------------------------------------------------------

json to_json(const reach::IntervalMatrix& m) {
  return {{"lo", to_json(Eigen::MatrixXd(m.lo))}, {"hi", to_json(Eigen::MatrixXd(m.hi))}};
}

reach::IntervalMatrix interval_matrix_from_json(const json& j, const std::string& path) {
  reach::IntervalMatrix m{matrix_from_json(require(j, "lo", path), join_path(path, "lo")),
                          matrix_from_json(require(j, "hi", path), join_path(path, "hi"))};
  rethrow_as_config(path, [&] { m.validate(); });
  return m;
}

json to_json(const reach::Box& b) {
  if (b.is_empty()) return {{"empty", true}, {"dim", b.dim()}};
  return {{"lo", to_json(Eigen::VectorXd(b.lo()))}, {"hi", to_json(Eigen::VectorXd(b.hi()))}};
}

reach::Box box_from_json(const json& j, const std::string& path) {
  if (get_bool(j, "empty", path, false))
    return reach::Box::empty(static_cast<Eigen::Index>(get_u64(j, "dim", path)));
  Eigen::VectorXd lo = vector_from_json(require(j, "lo", path), join_path(path, "lo"));
  Eigen::VectorXd hi = vector_from_json(require(j, "hi", path), join_path(path, "hi"));
  return rethrow_as_config(path, [&] { return reach::Box(std::move(lo), std::move(hi)); });
}

json to_json(const reach::StatReachConfig& cfg) {
  return {{"confidence", cfg.confidence},
          {"type1", cfg.type1},
          {"horizon", cfg.horizon},
          {"cost", cfg.cost},
          {"n_samples", cfg.n_samples}};
}

void write_reach_csv(std::ostream& out, const reach::ReachResult& r) {
  const Eigen::Index n = r.boxes.empty() ? 0 : r.boxes.front().dim();
  out << "timestep";
  for (Eigen::Index i = 0; i < n; ++i) out << ",lo_" << i;
  for (Eigen::Index i = 0; i < n; ++i) out << ",hi_" << i;
  out << '\n';
  for (std::size_t k = 0; k < r.boxes.size(); ++k) {
    out << (k + 1);
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << format_double(r.boxes[k].lo()(i));
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << format_double(r.boxes[k].hi()(i));
    out << '\n';
  }
}

// --- rover scenario ----------------------------------------------------------

namespace {

std::vector<Eigen::Vector2d> waypoints_from_json(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of [x, y] pairs");
  std::vector<Eigen::Vector2d> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Eigen::VectorXd v = vector_from_json(j[i], index_path(path, i));
    if (v.size() != 2) throw ConfigError(index_path(path, i), "expected [x, y]");
    out.emplace_back(v(0), v(1));
  }
  return out;
}

json waypoints_to_json(const std::vector<Eigen::Vector2d>& w) {
  json out = json::array();
  for (const auto& p : w) out.push_back({p.x(), p.y()});
  return out;
}

rover::ReachModelSpec reach_spec_from_json(const json& j, const std::string& path,
                                           rover::ReachModelSpec d) {
  d.confidence = get_number(j, "confidence", path, d.confidence);
  d.type1 = get_number(j, "type1", path, d.type1);
  d.cost_per_sample = get_number(j, "cost_per_sample", path, d.cost_per_sample);
  return d;
}

}  // namespace

rover::RoverScenario scenario_from_json(const json& j, const std::filesystem::path& base_dir,
                                        const std::string& path) {
  rover::RoverScenario scn;
  if (const json* v = find(j, "name", path)) {
    if (!v->is_string()) throw ConfigError(join_path(path, "name"), "expected a string");
    scn.name = v->get<std::string>();
  }
  scn.waypoints = waypoints_from_json(require(j, "waypoints", path), join_path(path, "waypoints"));

  if (const json* obs = find(j, "obstacles", path)) {
    const std::string op = join_path(path, "obstacles");
    if (!obs->is_array()) throw ConfigError(op, "expected an array of boxes");
    for (std::size_t i = 0; i < obs->size(); ++i) {
      reach::Box b = box_from_json((*obs)[i], index_path(op, i));
      if (b.dim() != 2) throw ConfigError(index_path(op, i), "obstacles are 2-D (x, y) boxes");
      scn.obstacles.obstacles.push_back(std::move(b));
    }
  }
  if (const json* pc = find(j, "point_cloud", path)) {
    const std::string pp = join_path(path, "point_cloud");
    rover::PointCloudOptions opts;
    opts.cell_size = get_number(*pc, "cell_size", pp, opts.cell_size);
    if (find(*pc, "min_z", pp)) opts.min_z = get_number(*pc, "min_z", pp);
    std::filesystem::path file = get_string(*pc, "path", pp);
    if (file.is_relative()) file = base_dir / file;
    if (!std::filesystem::exists(file))
      throw ConfigError(join_path(pp, "path"), "file not found: " + file.string());
    auto boxes = rethrow_as_config(pp, [&] { return rover::load_point_cloud(file, opts); });
    for (auto& b : boxes) scn.obstacles.obstacles.push_back(std::move(b));
  }

  if (const json* s = find(j, "initial_state", path)) {
    const std::string sp = join_path(path, "initial_state");
    scn.initial_state = rover::RoverState{get_number(*s, "x", sp), get_number(*s, "y", sp),
                                          get_number(*s, "yaw", sp), get_number(*s, "v", sp, 0.0)};
  }
  if (const json* r = find(j, "initial_radius", path)) {
    const Eigen::VectorXd v = vector_from_json(*r, join_path(path, "initial_radius"));
    if (v.size() != 4) throw ConfigError(join_path(path, "initial_radius"), "expected 4 values");
    scn.initial_radius = v;
  }
  scn.goal_tolerance = get_number(j, "goal_tolerance", path, scn.goal_tolerance);
  scn.horizon = get_u64(j, "horizon", path, scn.horizon);
  scn.ds = get_number(j, "ds", path, scn.ds);
  scn.step_cap = get_u64(j, "step_cap", path, scn.step_cap);
  if (const json* f = find(j, "fast", path))
    scn.fast = reach_spec_from_json(*f, join_path(path, "fast"), scn.fast);
  if (const json* s = find(j, "slow", path))
    scn.slow = reach_spec_from_json(*s, join_path(path, "slow"), scn.slow);
  if (const json* w = find(j, "weights", path)) {
    const std::string wp = join_path(path, "weights");
    scn.weights.alpha = get_number(*w, "alpha", wp, scn.weights.alpha);
    scn.weights.beta = get_number(*w, "beta", wp, scn.weights.beta);
  }
  if (const json* p = find(j, "params", path)) {
    const std::string pp = join_path(path, "params");
    auto& q = scn.params;
    q.wheelbase = get_number(*p, "wheelbase", pp, q.wheelbase);
    q.dt = get_number(*p, "dt", pp, q.dt);
    q.v_max = get_number(*p, "v_max", pp, q.v_max);
    q.steer_max = get_number(*p, "steer_max", pp, q.steer_max);
    q.accel_max = get_number(*p, "accel_max", pp, q.accel_max);
    q.yaw_uncertainty = get_number(*p, "yaw_uncertainty", pp, q.yaw_uncertainty);
  }
  if (const json* m = find(j, "mpc", path)) {
    const std::string mp = join_path(path, "mpc");
    auto& q = scn.mpc;
    q.horizon = get_u64(*m, "horizon", mp, q.horizon);
    if (const json* v = find(*m, "q", mp)) {
      const Eigen::VectorXd d = vector_from_json(*v, join_path(mp, "q"));
      if (d.size() != 4) throw ConfigError(join_path(mp, "q"), "expected 4 values");
      q.q_diag = d;
    }
    if (const json* v = find(*m, "r", mp)) {
      const Eigen::VectorXd d = vector_from_json(*v, join_path(mp, "r"));
      if (d.size() != 2) throw ConfigError(join_path(mp, "r"), "expected 2 values");
      q.r_diag = d;
    }
    q.target_speed = get_number(*m, "target_speed", mp, q.target_speed);
    q.min_speed = get_number(*m, "min_speed", mp, q.min_speed);
    q.brake_fraction = get_number(*m, "brake_fraction", mp, q.brake_fraction);
  }
  if (const json* y = find(j, "yaw_mask", path)) {
    const std::string yp = join_path(path, "yaw_mask");
    if (const json* st = find(*y, "state", yp)) {
      if (!st->is_array() || st->size() != 4)
        throw ConfigError(join_path(yp, "state"), "expected 4 booleans");
      for (std::size_t i = 0; i < 4; ++i) {
        if (!(*st)[i].is_boolean())
          throw ConfigError(index_path(join_path(yp, "state"), i), "expected a boolean");
        scn.yaw_mask.state[i] = (*st)[i].get<bool>();
      }
    }
    scn.yaw_mask.control = get_bool(*y, "control", yp, scn.yaw_mask.control);
    scn.yaw_mask.offset = get_bool(*y, "offset", yp, scn.yaw_mask.offset);
  }
  if (const json* c = find(j, "calibration", path)) {
    const std::string cp = join_path(path, "calibration");
    scn.calibration_runs = get_u64(*c, "runs", cp, scn.calibration_runs);
    scn.calibration_seed = get_u64(*c, "seed", cp, scn.calibration_seed);
    if (const json* w = find(*c, "waypoints", cp))
      scn.calibration_waypoints = waypoints_from_json(*w, join_path(cp, "waypoints"));
  }
  rethrow_as_config(path, [&] { scn.validate(); });
  return scn;
}

rover::RoverScenario load_scenario(const std::filesystem::path& file) {
  const json j = load_json(file);
  return scenario_from_json(j, file.parent_path(), "");
}

json to_json(const rover::RoverScenario& scn) {
  json obstacles = json::array();
  for (const auto& b : scn.obstacles.obstacles) obstacles.push_back(to_json(b));
  json out = {
      {"name", scn.name},
      {"waypoints", waypoints_to_json(scn.waypoints)},
      {"obstacles", obstacles},
      {"initial_radius", to_json(Eigen::VectorXd(scn.initial_radius))},
      {"goal_tolerance", scn.goal_tolerance},
      {"horizon", scn.horizon},
      {"ds", scn.ds},
      {"step_cap", scn.step_cap},
      {"fast",
       {{"confidence", scn.fast.confidence},
        {"type1", scn.fast.type1},
        {"cost_per_sample", scn.fast.cost_per_sample}}},
      {"slow",
       {{"confidence", scn.slow.confidence},
        {"type1", scn.slow.type1},
        {"cost_per_sample", scn.slow.cost_per_sample}}},
      {"weights", {{"alpha", scn.weights.alpha}, {"beta", scn.weights.beta}}},
      {"params",
       {{"wheelbase", scn.params.wheelbase},
        {"dt", scn.params.dt},
        {"v_max", scn.params.v_max},
        {"steer_max", scn.params.steer_max},
        {"accel_max", scn.params.accel_max},
        {"yaw_uncertainty", scn.params.yaw_uncertainty}}},
      {"mpc",
       {{"horizon", scn.mpc.horizon},
        {"q", to_json(Eigen::VectorXd(scn.mpc.q_diag))},
        {"r", to_json(Eigen::VectorXd(scn.mpc.r_diag))},
        {"target_speed", scn.mpc.target_speed},
        {"min_speed", scn.mpc.min_speed},
        {"brake_fraction", scn.mpc.brake_fraction}}},
      {"yaw_mask",
       {{"state", scn.yaw_mask.state},
        {"control", scn.yaw_mask.control},
        {"offset", scn.yaw_mask.offset}}},
      {"calibration", {{"runs", scn.calibration_runs}, {"seed", scn.calibration_seed}}}};
  if (!scn.calibration_waypoints.empty())
    out["calibration"]["waypoints"] = waypoints_to_json(scn.calibration_waypoints);
  if (scn.initial_state) {
    const auto& s = *scn.initial_state;
    out["initial_state"] = {{"x", s.x}, {"y", s.y}, {"yaw", s.yaw}, {"v", s.v}};
  }
  return out;
}

// --- calibration artifact ----------------------------------------------------

json to_json(const CalibrationArtifact& a) {
  char hex[19];
  std::snprintf(hex, sizeof hex, "0x%016" PRIx64, std::bit_cast<std::uint64_t>(a.calibration.mu));
  json eps = a.calibration.epsilon ? json(*a.calibration.epsilon) : json(nullptr);
  return {{"schema_version", kCalibrationSchemaVersion},
          {"kind", "bloat_calibration"},
          {"scenario", a.scenario},
          {"mu", a.calibration.mu},
          {"mu_bits", hex},
          {"epsilon", eps},
          {"n_runs", a.calibration.n_runs},
          {"seed", a.seed},
          {"fast_samples", a.fast_samples},
          {"slow_samples", a.slow_samples}};
}

CalibrationArtifact calibration_from_json(const json& j, const std::string& path) {
  const auto version = get_u64(j, "schema_version", path);
  if (version != static_cast<std::uint64_t>(kCalibrationSchemaVersion))
    throw ConfigError(join_path(path, "schema_version"),
                      "unsupported calibration schema " + std::to_string(version));
  CalibrationArtifact a;
  a.scenario = get_string(j, "scenario", path);
  a.calibration.mu = get_number(j, "mu", path);
  if (const json* bits = find(j, "mu_bits", path)) {
    if (!bits->is_string()) throw ConfigError(join_path(path, "mu_bits"), "expected hex string");
    const std::uint64_t raw = std::stoull(bits->get<std::string>(), nullptr, 16);
    a.calibration.mu = std::bit_cast<double>(raw);
  }
  if (!(a.calibration.mu >= 0.0) || !std::isfinite(a.calibration.mu))
    throw ConfigError(join_path(path, "mu"), "mu must be finite and >= 0");
  if (const json* e = find(j, "epsilon", path); e && !e->is_null())
    a.calibration.epsilon = get_number(j, "epsilon", path);
  a.calibration.n_runs = get_u64(j, "n_runs", path, 0);
  a.seed = get_u64(j, "seed", path, 0);
  a.fast_samples = get_u64(j, "fast_samples", path, 0);
  a.slow_samples = get_u64(j, "slow_samples", path, 0);
  return a;
}

}  // namespace modelsel::io
