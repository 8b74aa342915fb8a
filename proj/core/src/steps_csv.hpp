#pragma once

// Reader/writer for the per-step CSV shared by the harness and the charts.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

#include "modelsel/policy.hpp"

namespace modelsel::harness::detail {

inline constexpr std::string_view kStepsHeader = "trial,policy,t,action,loss,cost,reward,bound";

struct StepRow {
  std::size_t trial = 0;
  PolicyKind policy = PolicyKind::Fast;
  std::size_t t = 0;
  int action = 0;
  double loss = 0.0;
  double cost = 0.0;
  double reward = 0.0;
  double bound = 0.0;
};

void append_step_row(std::string& out, std::size_t trial, PolicyKind policy,
                     const StepRecord& rec);

/// Calls `fn` for every data row. Throws std::runtime_error with the line
/// number on malformed input.
void for_each_step_row(const std::filesystem::path& file,
                       const std::function<void(const StepRow&)>& fn);

}  // namespace modelsel::harness::detail
