#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <vector>

#include "modelsel/reachability.hpp"

namespace modelsel::rover {

struct PointCloudOptions {
  /// Edge length of the square grid cells, meters.
  double cell_size = 0.5;
  /// When set, only rows with a third column >= this value are occupied.
  std::optional<double> min_z;
};

/// Bins point-cloud rows "x,y[,z]" into occupied grid cells and returns one
/// box per cell, sorted by (ix, iy). A non-numeric first line is treated as a
/// header; blank lines are skipped.
/// Throws std::invalid_argument on a non-positive cell size or a malformed row
/// (the message carries the 1-based line number).
std::vector<reach::Box> bin_point_cloud(std::istream& in, const PointCloudOptions& opts);
std::vector<reach::Box> load_point_cloud(const std::filesystem::path& path,
                                         const PointCloudOptions& opts);

}  // namespace modelsel::rover
