#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "modelsel/coreset_linreg.hpp"
#include "modelsel/dnn_proxy.hpp"
#include "modelsel/navigation.hpp"
#include "modelsel/reachability.hpp"

namespace modelsel::io {

using nlohmann::json;

/// Invalid configuration or artifact. `field()` is a dotted path such as
/// "rover.scenarios[1]" or "weights.alpha", or "file:line:col" for syntax errors.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field.empty() ? message : field + ": " + message),
        field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Parses JSON text; syntax errors become ConfigError("<source>:line:col").
json parse_json(std::string_view text, std::string_view source = "<input>");
json load_json(const std::filesystem::path& path);
/// Writes `j` with two-space indentation and a trailing newline.
void save_json(const std::filesystem::path& path, const json& j);

/// "%.17g", or "inf" / "-inf" / "nan".
std::string format_double(double v);
/// Finite values as JSON numbers, infinities as the strings "inf" / "-inf".
json number_to_json(double v);
double number_from_json(const json& j, const std::string& field);

/// Field accessors that report the dotted path on a missing key or wrong type.
double get_number(const json& obj, std::string_view key, const std::string& path);
double get_number(const json& obj, std::string_view key, const std::string& path, double fallback);
std::uint64_t get_u64(const json& obj, std::string_view key, const std::string& path);
std::uint64_t get_u64(const json& obj, std::string_view key, const std::string& path,
                      std::uint64_t fallback);
std::string get_string(const json& obj, std::string_view key, const std::string& path);
bool get_bool(const json& obj, std::string_view key, const std::string& path, bool fallback);
std::string join_path(const std::string& path, std::string_view key);

// --- model pairs ------------------------------------------------------------

json to_json(const Eigen::MatrixXd& m);
json to_json(const Eigen::VectorXd& v);
Eigen::MatrixXd matrix_from_json(const json& j, const std::string& path);
Eigen::VectorXd vector_from_json(const json& j, const std::string& path);

json to_json(const linreg::CoresetPair& pair);
linreg::CoresetPair coreset_pair_from_json(const json& j, const std::string& path = "");

json to_json(const dnn::ProxyPair& pair);
dnn::ProxyPair proxy_pair_from_json(const json& j, const std::string& path = "");

// --- reachability -----------------------------------------------------------

json to_json(const reach::IntervalMatrix& m);
reach::IntervalMatrix interval_matrix_from_json(const json& j, const std::string& path = "");
json to_json(const reach::Box& b);
reach::Box box_from_json(const json& j, const std::string& path);
json to_json(const reach::StatReachConfig& cfg);

/// One row per timestep: "timestep,lo_0..lo_{n-1},hi_0..hi_{n-1}".
void write_reach_csv(std::ostream& out, const reach::ReachResult& r);

// --- rover scenario and calibration artifact --------------------------------

/// Relative point-cloud paths resolve against `base_dir`.
rover::RoverScenario scenario_from_json(const json& j, const std::filesystem::path& base_dir,
                                        const std::string& path = "");
rover::RoverScenario load_scenario(const std::filesystem::path& file);
json to_json(const rover::RoverScenario& scn);

inline constexpr int kCalibrationSchemaVersion = 1;

struct CalibrationArtifact {
  std::string scenario;
  reach::BloatCalibration calibration;
  std::uint64_t seed = 0;
  std::size_t fast_samples = 0;
  std::size_t slow_samples = 0;
};

/// mu is stored both as a JSON number and as its IEEE-754 bit pattern in hex;
/// loading prefers the bit pattern, so the value reloads bit-exactly.
json to_json(const CalibrationArtifact& a);
CalibrationArtifact calibration_from_json(const json& j, const std::string& path = "");

}  // namespace modelsel::io
