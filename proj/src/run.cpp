#include "codim/run.hpp"

#include "codim/collision.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

namespace codim {

namespace {

std::string number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string format_row(const MetricsRow& r) {
  return std::to_string(r.frame) + "," + number(r.time) + "," +
         std::to_string(r.newton_iters) + "," + number(r.rest_contact_force_norm) + "," +
         number(r.expansion_ratio) + "," + number(r.min_pair_distance) + "," +
         std::to_string(r.intersection_count) + "," + std::to_string(r.wall_time_ms);
}

MetricsRow measure(const BuiltScene& scene, int frame, int newton_iters,
                   int swept_crossings) {
  const SimState& s = scene.state();
  MetricsRow row;
  row.frame = frame;
  row.time = s.t;
  row.newton_iters = newton_iters;
  row.rest_contact_force_norm = contact_force_norm(scene.contact(), s.x);
  row.expansion_ratio = expansion_ratio(scene.mesh(), s.x);
  const PairDistanceSummary d = pair_distance_summary(scene.contact(), s.x);
  row.min_pair_distance = d.min_distance;
  row.min_margin = d.min_margin;
  row.intersection_count = intersection_count(scene.mesh(), s.x);
  if (scene.mesh().kind() == MeshKind::Rod) row.intersection_count += swept_crossings;
  return row;
}

std::filesystem::path frame_path(const std::filesystem::path& dir, int frame) {
  char name[32];
  std::snprintf(name, sizeof name, "frame_%05d.obj", frame);
  return dir / name;
}

RunResult run_scene(BuiltScene& scene, const RunOptions& options) {
  const int frames = options.frames.value_or(scene.config().frames);
  if (frames < 1) throw ConfigError("frames must be at least 1");
  if (!options.out_dir.empty()) std::filesystem::create_directories(options.out_dir);

  auto emit = [&](MetricsRow row, long long ms) {
    row.wall_time_ms = options.record_wall_time ? ms : 0;
    if (options.metrics) *options.metrics << format_row(row) << '\n' << std::flush;
    if (!options.out_dir.empty()) {
      std::ofstream obj(frame_path(options.out_dir, row.frame));
      if (!obj) throw ConfigError("cannot write " + frame_path(options.out_dir, row.frame).string());
      write_obj(obj, scene.mesh(), scene.state().x);
    }
    if (options.on_row) options.on_row(row);
  };

  if (options.metrics) *options.metrics << kMetricsHeader << '\n';
  emit(measure(scene, 0, 0, 0), 0);

  RunResult result;
  for (int f = 1; f <= frames; ++f) {
    const auto t0 = std::chrono::steady_clock::now();
    StepStats stats;
    try {
      stats = advance(scene.state(), scene.scene());
    } catch (const SolverError& e) {
      result.failed = true;
      result.error = e.what();
      break;
    } catch (const InfeasibleError& e) {
      result.failed = true;
      result.error = e.what();
      break;
    } catch (const DegenerateError& e) {
      result.failed = true;
      result.error = e.what();
      break;
    }
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    emit(measure(scene, f, stats.newton_iters, stats.swept_crossings), ms);
    result.frames_completed = f;
  }
  return result;
}

}  // namespace codim
