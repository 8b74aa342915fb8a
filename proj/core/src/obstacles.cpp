#include "modelsel/obstacles.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace modelsel::rover {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_fields(std::string_view line, std::vector<double>& out) {
  out.clear();
  while (true) {
    const auto comma = line.find(',');
    const std::string_view field = trim(line.substr(0, comma));
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size() || !std::isfinite(v)) return false;
    out.push_back(v);
    if (comma == std::string_view::npos) return true;
    line.remove_prefix(comma + 1);
  }
}

}  // namespace

std::vector<reach::Box> bin_point_cloud(std::istream& in, const PointCloudOptions& opts) {
  if (!(opts.cell_size > 0.0)) throw std::invalid_argument("cell size must be positive");

  std::set<std::pair<std::int64_t, std::int64_t>> cells;
  std::string raw;
  std::vector<double> fields;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    const bool ok = parse_fields(line, fields);
    if (first && !ok) {
      first = false;
      continue;
    }
    first = false;
    if (!ok || fields.size() < 2)
      throw std::invalid_argument("point cloud line " + std::to_string(line_no) +
                                  ": expected numeric x,y[,z]");
    if (opts.min_z) {
      if (fields.size() < 3)
        throw std::invalid_argument("point cloud line " + std::to_string(line_no) +
                                    ": z column required for thresholding");
      if (fields[2] < *opts.min_z) continue;
    }
    cells.emplace(static_cast<std::int64_t>(std::floor(fields[0] / opts.cell_size)),
                  static_cast<std::int64_t>(std::floor(fields[1] / opts.cell_size)));
  }

  std::vector<reach::Box> boxes;
  boxes.reserve(cells.size());
  for (const auto& [ix, iy] : cells) {
    const Eigen::Vector2d lo(static_cast<double>(ix) * opts.cell_size,
                             static_cast<double>(iy) * opts.cell_size);
    boxes.emplace_back(lo, lo + Eigen::Vector2d::Constant(opts.cell_size));
  }
  return boxes;
}

std::vector<reach::Box> load_point_cloud(const std::filesystem::path& path,
                                         const PointCloudOptions& opts) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open point cloud " + path.string());
  return bin_point_cloud(in, opts);
}

}  // namespace modelsel::rover
