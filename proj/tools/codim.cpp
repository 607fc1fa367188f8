// codim: inspect filter tables, run scenarios and compare contact modes.

#include "codim/run.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace {

using namespace codim;
using nlohmann::json;

constexpr int kConfigError = 2;
constexpr int kSolverError = 3;

struct Overrides {
  std::string mode;
  int cull_radius = 11;
  std::optional<int> frames;
  std::optional<double> dt;
  std::optional<std::uint64_t> seed;
};

ScenarioConfig configure(const std::string& path, const Overrides& o) {
  ScenarioConfig c = load_scenario(path);
  if (!o.mode.empty()) c.contact_mode = parse_contact_mode(o.mode, o.cull_radius);
  else if (c.contact_mode.tag == ContactMode::Tag::Culled && o.cull_radius != 11) {
    c.contact_mode.radius = o.cull_radius;
  }
  if (o.frames) c.frames = *o.frames;
  if (o.dt) c.solver.dt = *o.dt;
  if (o.seed) c.seed = *o.seed;
  c.validate();
  return c;
}

std::string mode_label(const ContactMode& m) {
  return m.tag == ContactMode::Tag::Culled ? "culled:" + std::to_string(m.radius)
                                           : to_string(m);
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

int cmd_inspect(const std::string& path, const Overrides& o, bool as_json) {
  auto scene = build_scene(configure(path, o));
  const CodimMesh& mesh = scene->mesh();
  const FilterTable& table = scene->filter_table();
  const int nc = mesh.num_components();
  std::vector<int> vertices(nc, 0), edges(nc, 0), triangles(nc, 0);
  const auto& comp = mesh.component_ids();
  for (int v = 0; v < mesh.num_vertices(); ++v) ++vertices[comp[v]];
  for (const Edge& e : mesh.edges()) ++edges[comp[e[0]]];
  for (const Triangle& t : mesh.triangles()) ++triangles[comp[t[0]]];

  if (as_json) {
    json out;
    out["mode"] = mode_label(scene->contact().mode());
    out["thickness"] = scene->config().thickness;
    out["eta"] = scene->eta();
    out["components"] = json::array();
    for (int c = 0; c < nc; ++c) {
      out["components"].push_back({{"component", c},
                                   {"vertices", vertices[c]},
                                   {"edges", edges[c]},
                                   {"triangles", triangles[c]},
                                   {"candidate_pairs", table.candidate_count[c]},
                                   {"filtered_pairs", table.filtered_count[c]},
                                   {"d_min", finite_or_null(table.d_min[c])},
                                   {"eta", scene->eta()}});
    }
    std::cout << out.dump(2) << '\n';
    return 0;
  }
  std::cout << "mode " << mode_label(scene->contact().mode()) << ", h = "
            << scene->config().thickness << " m, eta = " << scene->eta() << " m\n";
  std::cout << std::left << std::setw(10) << "component" << std::setw(10) << "vertices"
            << std::setw(8) << "edges" << std::setw(11) << "triangles" << std::setw(12)
            << "candidates" << std::setw(10) << "filtered" << std::setw(14) << "d_min"
            << "eta\n";
  for (int c = 0; c < nc; ++c) {
    std::ostringstream dmin;
    if (std::isfinite(table.d_min[c])) dmin << table.d_min[c];
    else dmin << "-";
    std::cout << std::setw(10) << c << std::setw(10) << vertices[c] << std::setw(8) << edges[c]
              << std::setw(11) << triangles[c] << std::setw(12) << table.candidate_count[c]
              << std::setw(10) << table.filtered_count[c] << std::setw(14) << dmin.str()
              << scene->eta() << '\n';
  }
  return 0;
}

int cmd_run(const std::string& path, const Overrides& o, const std::string& out_dir,
            const std::string& metrics_path, bool wall_time, bool as_json) {
  auto scene = build_scene(configure(path, o));
  std::ofstream metrics;
  RunOptions options;
  options.out_dir = out_dir;
  options.record_wall_time = wall_time;
  if (!metrics_path.empty()) {
    metrics.open(metrics_path);
    if (!metrics) throw ConfigError("cannot write " + metrics_path);
    options.metrics = &metrics;
  } else if (!as_json) {
    options.metrics = &std::cout;
  }
  MetricsRow last;
  options.on_row = [&](const MetricsRow& r) { last = r; };
  const RunResult result = run_scene(*scene, options);
  if (as_json) {
    json out = {{"mode", mode_label(scene->contact().mode())},
                {"frames_completed", result.frames_completed},
                {"failed", result.failed},
                {"final", {{"time", last.time},
                           {"expansion_ratio", last.expansion_ratio},
                           {"rest_contact_force_norm", last.rest_contact_force_norm},
                           {"min_pair_distance", finite_or_null(last.min_pair_distance)},
                           {"intersection_count", last.intersection_count}}}};
    if (result.failed) out["error"] = result.error;
    std::cout << out.dump(2) << '\n';
  }
  if (result.failed) {
    std::cerr << "solver failure at frame " << result.frames_completed + 1 << ": "
              << result.error << '\n';
    return kSolverError;
  }
  return 0;
}

int cmd_compare(const std::string& path, Overrides o, const std::vector<std::string>& modes,
                const std::string& out_dir, const std::string& metrics_path, bool wall_time) {
  std::ofstream file;
  std::ostream* out = &std::cout;
  if (!metrics_path.empty()) {
    file.open(metrics_path);
    if (!file) throw ConfigError("cannot write " + metrics_path);
    out = &file;
  }
  // Parse every mode before running any.
  std::vector<ContactMode> parsed;
  for (const std::string& m : modes) {
    const auto colon = m.find(':');
    const std::string name = m.substr(0, colon);
    const int radius = colon == std::string::npos ? o.cull_radius : std::stoi(m.substr(colon + 1));
    parsed.push_back(parse_contact_mode(name, radius));
  }
  *out << "mode," << kMetricsHeader << '\n';
  int succeeded = 0;
  for (const ContactMode& mode : parsed) {
    ScenarioConfig c = configure(path, o);
    c.contact_mode = mode;
    const std::string label = mode_label(mode);
    RunOptions options;
    options.record_wall_time = wall_time;
    if (!out_dir.empty()) {
      std::string dir = label;
      std::replace(dir.begin(), dir.end(), ':', '_');
      options.out_dir = std::filesystem::path(out_dir) / dir;
    }
    options.on_row = [&](const MetricsRow& r) {
      *out << label << ',' << format_row(r) << '\n' << std::flush;
    };
    try {
      auto scene = build_scene(c);
      const RunResult r = run_scene(*scene, options);
      if (r.failed) {
        std::cerr << label << ": solver failure: " << r.error << '\n';
      } else {
        ++succeeded;
      }
    } catch (const InfeasibleError& e) {
      std::cerr << label << ": " << e.what() << '\n';
    }
  }
  return succeeded > 0 ? 0 : kSolverError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Codimensional rod and shell contact simulator"};
  app.require_subcommand(1);

  Overrides o;
  std::string scenario, out_dir, metrics;
  std::string modes_text;
  bool as_json = false;
  bool no_wall_time = false;
  int frames = 0;
  double dt = 0.0;
  std::uint64_t seed = 0;

  auto common = [&](CLI::App* cmd) {
    cmd->add_option("scenario", scenario, "Scenario JSON file")->required();
    cmd->add_option("--mode", o.mode, "Contact mode override")
        ->check(CLI::IsMember({"barrier", "culled", "filtered"}));
    cmd->add_option("--cull-radius", o.cull_radius, "Culling radius in edges")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--frames", frames, "Number of frames")->check(CLI::PositiveNumber);
    cmd->add_option("--dt", dt, "Time step in seconds")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", seed, "Random seed");
    cmd->add_flag("--json", as_json, "Machine-readable output");
  };
  auto outputs = [&](CLI::App* cmd) {
    cmd->add_option("--out", out_dir, "Directory for frame_NNNNN.obj files");
    cmd->add_option("--metrics", metrics, "CSV metrics file (default: stdout)");
    cmd->add_flag("--no-wall-time", no_wall_time, "Write 0 in the wall_time_ms column");
  };

  CLI::App* inspect = app.add_subcommand("inspect", "Report the filter table per component");
  common(inspect);
  CLI::App* run = app.add_subcommand("run", "Simulate a scenario");
  common(run);
  outputs(run);
  CLI::App* compare = app.add_subcommand("compare", "Run a scenario under several modes");
  common(compare);
  outputs(compare);
  compare->add_option("--modes", modes_text, "Comma-separated modes, e.g. barrier,culled:5,filtered")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  CLI::App* chosen = app.get_subcommands().front();
  if (chosen->count("--frames")) o.frames = frames;
  if (chosen->count("--dt")) o.dt = dt;
  if (chosen->count("--seed")) o.seed = seed;

  try {
    if (inspect->parsed()) return cmd_inspect(scenario, o, as_json);
    if (run->parsed()) return cmd_run(scenario, o, out_dir, metrics, !no_wall_time, as_json);
    std::vector<std::string> modes;
    std::stringstream ss(modes_text);
    for (std::string m; std::getline(ss, m, ',');) {
      if (!m.empty()) modes.push_back(m);
    }
    if (modes.empty()) throw ConfigError("--modes lists no modes");
    return cmd_compare(scenario, o, modes, out_dir, metrics, !no_wall_time);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DegenerateError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible input: " << e.what() << '\n';
    return kConfigError;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kSolverError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
}
