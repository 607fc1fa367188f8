#pragma once

#include "codim/scenario.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

namespace codim {

struct MetricsRow {
  int frame = 0;
  double time = 0.0;
  int newton_iters = 0;
  double rest_contact_force_norm = 0.0;
  double expansion_ratio = 1.0;
  double min_pair_distance = kInfiniteDistance;
  int intersection_count = 0;
  long long wall_time_ms = 0;
  // Not part of the CSV: smallest admissible distance minus its offset.
  double min_margin = kInfiniteDistance;
};

inline constexpr const char* kMetricsHeader =
    "frame,time,newton_iters,rest_contact_force_norm,expansion_ratio,"
    "min_pair_distance,intersection_count,wall_time_ms";

// One CSV line without the trailing newline; doubles use 17 significant
// digits, an infinite distance prints as "inf".
std::string format_row(const MetricsRow& row);

// Metrics of the current state. swept_crossings is added to the static
// intersection count for rods.
MetricsRow measure(const BuiltScene& scene, int frame, int newton_iters,
                   int swept_crossings);

struct RunOptions {
  std::optional<int> frames;                 // default: config frames
  std::filesystem::path out_dir;             // empty: no OBJ output
  std::ostream* metrics = nullptr;           // CSV rows, header included
  bool record_wall_time = true;              // false writes 0 for byte-stable CSV
  std::function<void(const MetricsRow&)> on_row;
};

struct RunResult {
  int frames_completed = 0;
  bool failed = false;
  std::string error;
};

// Writes frame 0 (the initial state) and one row per time step. Solver and
// infeasibility errors stop the run with failed set; earlier outputs stay.
RunResult run_scene(BuiltScene& scene, const RunOptions& options);

std::filesystem::path frame_path(const std::filesystem::path& dir, int frame);

}  // namespace codim
