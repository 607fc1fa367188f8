// Acceptance run: prints one PASS/FAIL line per criterion and exits non-zero
// when any criterion fails. Scenario files are read from the directory given
// as the first argument.

#include "codim/collision.hpp"
#include "codim/elasticity.hpp"
#include "codim/run.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

using namespace codim;
namespace fs = std::filesystem;

namespace {

using Rng = std::mt19937_64;
using Clock = std::chrono::steady_clock;

fs::path g_scenarios;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Vec3d random_vec(Rng& rng, double scale) {
  return Vec3d(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)) * scale;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct Verdict {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    notes.push_back((ok ? "" : "FAILED ") + what);
  }
};

void report(int criterion, const std::string& title, const Verdict& v, double secs) {
  std::cout << "criterion " << criterion << ": " << (v.pass ? "PASS" : "FAIL") << "  "
            << title << " (" << fmt(secs) << " s)\n";
  for (const auto& n : v.notes) std::cout << "    " << n << '\n';
  std::cout << std::flush;
}

// ---------------------------------------------------------------------------
// Exhaustive per-frame verification.

std::vector<Stencil> all_stencils(const CodimMesh& mesh) {
  std::vector<Stencil> out;
  for (int e = 0; e < mesh.num_edges(); ++e) {
    for (int f = e + 1; f < mesh.num_edges(); ++f) {
      if (!mesh.edge_primitive(e).shares_vertex(mesh.edge_primitive(f))) {
        out.push_back(mesh.edge_edge(e, f));
      }
    }
  }
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    for (int t = 0; t < mesh.num_triangles(); ++t) {
      if (!mesh.triangle_primitive(t).contains(v)) out.push_back(mesh.point_triangle(v, t));
    }
  }
  return out;
}

double stencil_count(const CodimMesh& mesh) {
  const double e = mesh.num_edges();
  return 0.5 * e * e + double(mesh.num_vertices()) * mesh.num_triangles();
}

// Above this many stencils a frame is checked through the spatial hash with
// the thickness as inflation, which contains every pair closer than h.
constexpr double kBruteLimit = 2e7;

struct FrameCheck {
  double min_margin = kInfiniteDistance;  // distance minus eta_eff
  int intersections = 0;
};

FrameCheck check_frame(const BuiltScene& scene) {
  const CodimMesh& mesh = scene.mesh();
  const Positions& x = scene.state().x;
  const ContactModel& model = scene.contact();
  FrameCheck out;
  const bool brute = stencil_count(mesh) <= kBruteLimit;
  const std::vector<Stencil> pairs =
      brute ? all_stencils(mesh) : broadphase(mesh, x, nullptr, model.params().h);
  for (const Stencil& s : pairs) {
    if (!model.admissible(s)) continue;
    const double d = pair_distance_value(s.kind, mesh.gather(s, x));
    out.min_margin = std::min(out.min_margin, d - model.activation(s).eta);
  }
  if (!brute) {
    out.intersections = intersection_count(mesh, x);
    return out;
  }
  if (mesh.kind() == MeshKind::Rod) {
    for (const Stencil& s : pairs) {
      const auto& v = s.vertices;
      if (segments_intersect(x.col(v[0]), x.col(v[1]), x.col(v[2]), x.col(v[3]), 1e-12)) {
        ++out.intersections;
      }
    }
  } else {
    for (const auto& [a, b] : mesh.edges()) {
      for (const auto& t : mesh.triangles()) {
        if (t[0] == a || t[1] == a || t[2] == a || t[0] == b || t[1] == b || t[2] == b) continue;
        if (segment_triangle_intersect(x.col(a), x.col(b), x.col(t[0]), x.col(t[1]),
                                       x.col(t[2]))) {
          ++out.intersections;
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scenario runs, cached by label so criteria can share them.

struct Run {
  std::vector<MetricsRow> rows;
  RunResult result;
  double seconds = 0.0;
  double eta = 0.0;
  bool verified = false;
  double verified_margin = kInfiniteDistance;
  int verified_intersections = 0;
  std::string error;
};

std::map<std::string, Run> g_runs;

ScenarioConfig scenario(const std::string& file) { return load_scenario(g_scenarios / file); }

const Run& run(const std::string& label, const ScenarioConfig& config, bool verify) {
  auto it = g_runs.find(label);
  if (it != g_runs.end() && (it->second.verified || !verify)) return it->second;
  Run r;
  const auto t0 = Clock::now();
  try {
    auto scene = build_scene(config);
    r.eta = scene->eta();
    RunOptions options;
    options.record_wall_time = false;
    options.on_row = [&](const MetricsRow& row) {
      r.rows.push_back(row);
      if (!verify) return;
      const FrameCheck c = check_frame(*scene);
      r.verified_margin = std::min(r.verified_margin, c.min_margin);
      r.verified_intersections += c.intersections;
    };
    r.result = run_scene(*scene, options);
    r.verified = verify;
    if (r.result.failed) r.error = r.result.error;
  } catch (const std::exception& e) {
    r.result.failed = true;
    r.error = e.what();
  }
  r.seconds = seconds_since(t0);
  return g_runs[label] = std::move(r);
}

ScenarioConfig with_mode(ScenarioConfig c, const ContactMode& mode) {
  c.contact_mode = mode;
  return c;
}

double max_of(const Run& r, double MetricsRow::*field) {
  double m = -kInfiniteDistance;
  for (const auto& row : r.rows) m = std::max(m, row.*field);
  return m;
}

double min_of(const Run& r, double MetricsRow::*field) {
  double m = kInfiniteDistance;
  for (const auto& row : r.rows) m = std::min(m, row.*field);
  return m;
}

int max_intersections(const Run& r) {
  int m = 0;
  for (const auto& row : r.rows) m = std::max(m, row.intersection_count);
  return m;
}

bool completed(const Run& r, Verdict& v, const std::string& label) {
  const bool ok = !r.result.failed && !r.rows.empty();
  if (!ok) v.require(false, label + " did not complete: " + r.error);
  return ok;
}

// ---------------------------------------------------------------------------
// Criteria 1 and 2: rest yarn.

ScenarioConfig rest_yarn(int segments, const ContactMode& mode) {
  ScenarioConfig c = with_mode(scenario("rest_yarn.json"), mode);
  c.geometry.params["segments"] = segments;
  return c;
}

void filtered_rest_checks(const Run& r, Verdict& v, const std::string& label) {
  if (!completed(r, v, label)) return;
  const double force = max_of(r, &MetricsRow::rest_contact_force_norm);
  const double dev = std::max(max_of(r, &MetricsRow::expansion_ratio) - 1.0,
                              1.0 - min_of(r, &MetricsRow::expansion_ratio));
  v.require(force < 1e-9, label + ": max rest contact force " + fmt(force) + " N < 1e-9");
  v.require(dev <= 1e-6, label + ": |expansion_ratio - 1| " + fmt(dev) + " <= 1e-6 over " +
                             std::to_string(r.rows.size() - 1) + " frames");
}

void criterion1() {
  const auto t0 = Clock::now();
  Verdict v;
  const Run& f = run("rest500/filtered", rest_yarn(500, ContactMode::filtered()), true);
  filtered_rest_checks(f, v, "filtered");
  const Run& b = run("rest500/barrier", rest_yarn(500, ContactMode::plain()), true);
  if (completed(b, v, "barrier")) {
    const MetricsRow& last = b.rows.back();
    v.require(last.frame == 50, "barrier ran to frame " + std::to_string(last.frame));
    v.require(last.rest_contact_force_norm > 0.0,
              "barrier rest contact force " + fmt(last.rest_contact_force_norm) + " N > 0");
    v.require(last.expansion_ratio > 1.001,
              "barrier expansion_ratio " + fmt(last.expansion_ratio) + " > 1.001");
  }
  const double secs = seconds_since(t0);
  v.require(secs < 120.0, "runtime " + fmt(secs) + " s < 120");
  report(1, "rest-state anti-locking, straight 5 cm yarn, h = 0.3 mm", v, secs);
}

void criterion2() {
  const auto t0 = Clock::now();
  Verdict v;
  for (int n : {50, 150, 500, 1500}) {
    const Run& r = run("rest" + std::to_string(n) + "/filtered",
                       rest_yarn(n, ContactMode::filtered()), false);
    filtered_rest_checks(r, v, std::to_string(n) + " segments");
  }
  const double secs = seconds_since(t0);
  v.require(secs < 600.0, "runtime " + fmt(secs) + " s < 600");
  report(2, "resolution independence of the filtered rest state", v, secs);
}

// ---------------------------------------------------------------------------
// Criterion 3: knot.

ScenarioConfig knot(int segments, const ContactMode& mode) {
  ScenarioConfig c = with_mode(scenario("knot_pull.json"), mode);
  c.geometry.params["segments"] = segments;
  return c;
}

void criterion3() {
  const auto t0 = Clock::now();
  Verdict v;
  bool culled_broke = false;
  for (int n : {30, 60, 120}) {
    const std::string tag = "knot" + std::to_string(n);
    const Run& f = run(tag + "/filtered", knot(n, ContactMode::filtered()), n == 60);
    if (completed(f, v, tag + " filtered")) {
      const int hits = max_intersections(f);
      const double d = f.rows.back().min_pair_distance;
      v.require(hits == 0, tag + " filtered: max intersection_count " + std::to_string(hits));
      v.require(d > f.eta, tag + " filtered: final min_pair_distance " + fmt(d) + " > eta " +
                               fmt(f.eta));
    }
    const Run& c = run(tag + "/culled5", knot(n, ContactMode::culled(5)), false);
    if (!c.rows.empty()) {
      const int hits = max_intersections(c);
      v.notes.push_back(tag + " culled:5: max intersection_count " + std::to_string(hits) +
                        (c.result.failed ? " (stopped: " + c.error + ")" : ""));
      culled_broke = culled_broke || hits >= 1;
    }
  }
  v.require(culled_broke, "culled:5 intersects at some frame for at least one resolution");
  const double secs = seconds_since(t0);
  v.require(secs < 900.0, "runtime " + fmt(secs) + " s < 900");
  report(3, "knot pulled apart at 30/60/120 segments, h = 0.3 mm", v, secs);
}

// ---------------------------------------------------------------------------
// Criterion 4: loop.

void criterion4() {
  const auto t0 = Clock::now();
  Verdict v;
  const ScenarioConfig base = scenario("loop.json");
  const Run& f = run("loop/filtered", with_mode(base, ContactMode::filtered()), true);
  if (completed(f, v, "filtered")) {
    const double ratio = f.rows.back().expansion_ratio;
    v.require(max_intersections(f) == 0,
              "filtered: max intersection_count " + std::to_string(max_intersections(f)));
    v.require(std::abs(ratio - 1.0) <= 0.02,
              "filtered: equilibrium arc length ratio " + fmt(ratio) + " within 2%");
  }
  const Run& b = run("loop/barrier", with_mode(base, ContactMode::plain()), true);
  if (completed(b, v, "barrier")) {
    const double ratio = b.rows.back().expansion_ratio;
    v.require(ratio > 1.02, "barrier: equilibrium arc length ratio " + fmt(ratio) + " > 1.02");
  }
  const Run& c = run("loop/culled11", with_mode(base, ContactMode::culled(11)), false);
  if (!c.rows.empty()) {
    v.require(max_intersections(c) >= 1,
              "culled:11: max intersection_count " + std::to_string(max_intersections(c)) +
                  " >= 1");
  } else {
    v.require(false, "culled:11 produced no frames: " + c.error);
  }
  report(4, "loop of a 0.5 mm yarn", v, seconds_since(t0));
}

// ---------------------------------------------------------------------------
// Criterion 5: shells.

void criterion5() {
  const auto t0 = Clock::now();
  Verdict v;
  const ScenarioConfig coarse = scenario("cloth_relax_coarse.json");
  const Run& cf = run("cloth_coarse/filtered", with_mode(coarse, ContactMode::filtered()), true);
  const Run& cb = run("cloth_coarse/barrier", with_mode(coarse, ContactMode::plain()), true);
  if (completed(cf, v, "60x60 filtered") && completed(cb, v, "60x60 barrier")) {
    const double a = cf.rows.back().expansion_ratio, b = cb.rows.back().expansion_ratio;
    v.require(std::abs(a - b) / a <= 0.005,
              "60x60: filtered area ratio " + fmt(a) + " and barrier " + fmt(b) +
                  " agree within 0.5%");
  }
  const ScenarioConfig fine = scenario("cloth_relax_fine.json");
  const Run& ff = run("cloth_fine/filtered", with_mode(fine, ContactMode::filtered()), true);
  if (completed(ff, v, "200x200 filtered")) {
    const double a = ff.rows.back().expansion_ratio;
    v.require(std::abs(a - 1.0) <= 0.005, "200x200 filtered: area ratio " + fmt(a) + " within 0.5%");
  }
  const Run& fb = run("cloth_fine/barrier", with_mode(fine, ContactMode::plain()), true);
  if (completed(fb, v, "200x200 barrier")) {
    const double a = fb.rows.back().expansion_ratio;
    v.require(a > 1.01, "200x200 barrier: area ratio " + fmt(a) + " > 1.01");
  }
  const double secs = seconds_since(t0);
  v.require(secs < 1200.0, "runtime " + fmt(secs) + " s < 1200");
  report(5, "shell anti-locking, pinned cloth relaxation, h = 1 mm", v, secs);
}

// ---------------------------------------------------------------------------
// Criterion 6: every shipped scenario, filtered and barrier, every frame.

void criterion6() {
  const auto t0 = Clock::now();
  Verdict v;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(g_scenarios)) {
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  // Runs made by earlier criteria under the same scenario file and mode.
  const std::map<std::string, std::string> shared = {
      {"rest_yarn", "rest500"}, {"knot_pull", "knot60"}, {"loop", "loop"},
      {"cloth_relax_coarse", "cloth_coarse"}, {"cloth_relax_fine", "cloth_fine"}};
  for (const auto& file : files) {
    const std::string stem = file.stem().string();
    const ScenarioConfig base = load_scenario(file);
    for (const auto& [name, mode] :
         {std::pair{"filtered", ContactMode::filtered()}, std::pair{"barrier", ContactMode::plain()}}) {
      const auto s = shared.find(stem);
      const std::string label = (s != shared.end() ? s->second : stem) + "/" + name;
      const Run& r = run(label, with_mode(base, mode), true);
      if (!completed(r, v, stem + " " + name)) continue;
      const int hits = r.verified_intersections + max_intersections(r);
      v.require(hits == 0 && r.verified_margin > 0.0,
                stem + " " + name + ": " + std::to_string(r.rows.size()) +
                    " frames, intersections " + std::to_string(hits) +
                    ", min distance - eta_eff " + fmt(r.verified_margin));
    }
  }
  report(6, "non-intersection over the shipped scenario suite", v, seconds_since(t0));
}

// ---------------------------------------------------------------------------
// Criterion 7: derivatives and primitive oracles.

using EvalFn = std::function<EnergyEval(const Positions&)>;

double fd_gradient_error(const EvalFn& f, const Positions& x, double step) {
  const EnergyEval e = f(x);
  Eigen::VectorXd fd(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Positions xp = x, xm = x;
    xp.data()[i] += step;
    xm.data()[i] -= step;
    fd[i] = (f(xp).energy - f(xm).energy) / (2.0 * step);
  }
  return (e.gradient - fd).norm() / std::max({e.gradient.norm(), fd.norm(), 1e-10});
}

CodimMesh rod_chain(const Positions& x) {
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < x.cols(); ++i) edges.push_back({i, i + 1});
  return CodimMesh::rod(x, edges);
}

CodimMesh grid(int n, double spacing) {
  Positions x(3, (n + 1) * (n + 1));
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) x.col(j * (n + 1) + i) = Vec3d(i * spacing, j * spacing, 0);
  std::vector<Triangle> tris;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int v = j * (n + 1) + i;
      tris.push_back({v, v + 1, v + n + 2});
      tris.push_back({v, v + n + 2, v + n + 1});
    }
  }
  return CodimMesh::shell(x, tris);
}

bool interior(PairKind kind, const StencilPoints<double>& pts, double margin) {
  const auto c = closest<double>(kind, pts);
  if (!c.subcase.interior_of(kind)) return false;
  const double u = c.params[0], w = c.params[1];
  const double m = kind == PairKind::EdgeEdge ? std::min({u, 1 - u, w, 1 - w})
                                              : std::min({u, w, 1 - u - w});
  return m > margin;
}

// Worst relative gradient error over `states` accepted random states.
struct FdTally {
  double worst = 0.0;
  int states = 0;
};

FdTally contact_fd(Rng& rng, bool point_triangle, double eta_fraction, int states) {
  // Two separate primitives; plain mode.
  CodimMesh mesh = point_triangle
                       ? CodimMesh::shell(Positions::Random(3, 6), {{0, 1, 2}, {3, 4, 5}})
                       : CodimMesh::rod(Positions::Random(3, 4), {{0, 1}, {2, 3}});
  const Stencil s = point_triangle ? mesh.point_triangle(3, 0) : mesh.edge_edge(0, 1);
  FdTally t;
  while (t.states < states) {
    Positions x(3, mesh.num_vertices());
    for (int i = 0; i < x.cols(); ++i) x.col(i) = random_vec(rng, 1.0);
    const auto pts = mesh.gather(s, x);
    if (!interior(s.kind, pts, 1e-3)) continue;
    const double d = pair_distance_value(s.kind, pts);
    if (d < 1e-2) continue;
    const double h = d / uniform(rng, 0.1, 0.95);
    const BarrierParams params{h, eta_fraction * uniform(rng, 0.1, 0.9) * d, 1.0};
    const auto f = [&](const Positions& y) {
      return contact_energy(mesh, y, {s}, {}, params, ContactMode::plain());
    };
    t.worst = std::max(t.worst, fd_gradient_error(f, x, 1e-7));
    ++t.states;
  }
  return t;
}

FdTally filtered_fd(Rng& rng, int states) {
  // Edges 0 and 2 of a short chain are intrinsically close and filtered.
  Positions ref(3, 4);
  for (int i = 0; i < 4; ++i) ref.col(i) = Vec3d(0.3 * i, 0, 0);
  const CodimMesh mesh = rod_chain(ref);
  const BarrierParams params{1.0, 0.2, 1.0};
  const FilterTable table = build_filter_table(mesh, params, 2.0);
  const Stencil s = mesh.edge_edge(0, 2);
  FdTally t;
  if (!table.contains(s)) return {kInfiniteDistance, 0};
  const double a = table.d_min[0];
  while (t.states < states) {
    Positions x = ref;
    for (int i = 0; i < 4; ++i) x.col(i) += random_vec(rng, 0.2);
    const auto pts = mesh.gather(s, x);
    const double d = pair_distance_value(s.kind, pts);
    if (!(d > 0.05 * a && d < 0.95 * a) || !interior(s.kind, pts, 1e-3)) continue;
    const auto f = [&](const Positions& y) {
      return contact_energy(mesh, y, {s}, table, params, ContactMode::filtered());
    };
    t.worst = std::max(t.worst, fd_gradient_error(f, x, 1e-8));
    ++t.states;
  }
  return t;
}

FdTally friction_fd(Rng& rng, int states) {
  Positions ref(3, 10);
  for (int i = 0; i < 5; ++i) {
    ref.col(i) = Vec3d(i, 0, 0);
    ref.col(5 + i) = Vec3d(i, 0.3, 0);
  }
  const CodimMesh mesh =
      CodimMesh::rod(ref, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {5, 6}, {6, 7}, {7, 8}, {8, 9}});
  const BarrierParams params{0.5, 0.0, 10.0};
  const ContactModel model(mesh, params, ContactMode::plain());
  const auto lagged = lag_friction(model, ref, all_stencils(mesh));
  const double dt = 0.04, epsv = 1e-3, mu = 0.3;
  FdTally t;
  while (t.states < states) {
    Positions x = ref;
    const double scale = uniform(rng, 1e-5, 2e-4);
    for (int i = 0; i < x.cols(); ++i) x.col(i) += random_vec(rng, scale);
    const auto f = [&](const Positions& y) {
      return friction_force(mesh, y, lagged, mu, epsv, dt);
    };
    t.worst = std::max(t.worst, fd_gradient_error(f, x, 1e-9));
    ++t.states;
  }
  return t;
}

void criterion7() {
  const auto t0 = Clock::now();
  Verdict v;
  Rng rng(7);
  constexpr int kStates = 1000;
  const auto tally = [&](const std::string& name, const FdTally& t) {
    v.require(t.states >= kStates && t.worst < 1e-4,
              name + ": worst gradient error " + fmt(t.worst) + " over " +
                  std::to_string(t.states) + " states");
  };

  FdTally plain, biphasic;
  for (int k = 0; k < 2; ++k) {
    const FdTally a = contact_fd(rng, k == 1, 0.0, kStates / 2);
    const FdTally b = contact_fd(rng, k == 1, 1.0, kStates / 2);
    plain = {std::max(plain.worst, a.worst), plain.states + a.states};
    biphasic = {std::max(biphasic.worst, b.worst), biphasic.states + b.states};
  }
  tally("barrier (EE and PT)", plain);
  tally("biphasic barrier (EE and PT)", biphasic);
  tally("filtered barrier", filtered_fd(rng, kStates));

  FdTally stretch, bend, membrane, hinge;
  const RodMaterial rod_mat{2.0, 1.0, 0.3};
  const ShellMaterial shell_mat{3.0, 0.3, 1.0, 0.1};
  const CodimMesh base = grid(2, 1.0);
  for (int i = 0; i < kStates; ++i) {
    Positions ref(3, 5);
    for (int k = 0; k < 5; ++k) ref.col(k) = Vec3d(k, 0, 0) + random_vec(rng, 0.3);
    const CodimMesh rod = rod_chain(ref);
    Positions x = ref;
    for (int k = 0; k < 5; ++k) x.col(k) += random_vec(rng, 0.2);
    stretch.worst = std::max(stretch.worst, fd_gradient_error([&](const Positions& y) {
      return rod_stretch(y, rod, rod_mat);
    }, x, 1e-6));
    bend.worst = std::max(bend.worst, fd_gradient_error([&](const Positions& y) {
      return rod_bend(y, rod, rod_mat);
    }, x, 1e-6));
    ++stretch.states;
    ++bend.states;

    Positions sref = base.reference();
    for (int k = 0; k < sref.cols(); ++k) sref.col(k) += random_vec(rng, 0.1);
    const CodimMesh shell = CodimMesh::shell(sref, base.triangles());
    Positions y = sref;
    for (int k = 0; k < y.cols(); ++k) y.col(k) += random_vec(rng, 0.15);
    membrane.worst = std::max(membrane.worst, fd_gradient_error([&](const Positions& z) {
      return shell_membrane(z, shell, shell_mat);
    }, y, 1e-6));
    hinge.worst = std::max(hinge.worst, fd_gradient_error([&](const Positions& z) {
      return shell_bend(z, shell, shell_mat);
    }, y, 1e-6));
    ++membrane.states;
    ++hinge.states;
  }
  tally("rod stretch", stretch);
  tally("rod bend", bend);
  tally("shell membrane", membrane);
  tally("shell bend", hinge);
  tally("friction", friction_fd(rng, kStates));

  const double b1 = barrier(0.5, 1.0);
  v.require(std::abs(b1 - 0.17328679) <= 1e-8, "barrier(0.5, 1) = " + fmt(b1));
  const double b2 = barrier_biphasic(0.6, 1.0, 0.5);
  v.require(std::abs(b2 - 0.25751) <= 1e-5, "barrier_biphasic(0.6, 1, 0.5) = " + fmt(b2));

  // Broadphase against brute force on random scenes.
  int missed = 0;
  for (int scene = 0; scene < 100; ++scene) {
    CodimMesh mesh = grid(1, 1.0);
    if (scene % 2 == 0) {
      Positions x(3, 40);
      x.col(0) = random_vec(rng, 1.0);
      for (int i = 1; i < 40; ++i) x.col(i) = x.col(i - 1) + random_vec(rng, 1.0).normalized() * 0.15;
      mesh = rod_chain(x);
    } else {
      const CodimMesh g = grid(5, 0.2);
      Positions x = g.reference();
      for (int i = 0; i < x.cols(); ++i) {
        x(2, i) = 0.3 * std::sin(5 * x(0, i) + uniform(rng, -1, 1)) * std::cos(3 * x(1, i));
      }
      mesh = CodimMesh::shell(x, g.triangles());
    }
    const double inflation = uniform(rng, 0.01, 0.2);
    std::set<std::uint64_t> keys;
    for (const auto& s : broadphase(mesh, mesh.reference(), nullptr, inflation)) keys.insert(s.key());
    for (const auto& s : all_stencils(mesh)) {
      if (pair_distance_value(s.kind, mesh.gather(s, mesh.reference())) < inflation &&
          !keys.count(s.key())) {
        ++missed;
      }
    }
  }
  v.require(missed == 0, "broadphase misses " + std::to_string(missed) +
                             " brute-force pairs over 100 random scenes");

  // ACCD oracle recheck.
  int unsafe = 0;
  for (int i = 0; i < 1000; ++i) {
    CcdQuery q;
    q.kind = static_cast<PairKind>(i % 4);
    for (int k = 0; k < 4; ++k) {
      q.x0.col(k) = random_vec(rng, 1.0);
      q.dx.col(k) = random_vec(rng, 3.0);
    }
    q.offset = uniform(rng, 0.0, 0.9) * pair_distance_value(q.kind, q.x0);
    const double t = accd_max_step(q);
    for (int k = 0; k <= 200; ++k) {
      if (pair_distance_value(q.kind, StencilPoints<double>(q.x0 + (t * k / 200.0) * q.dx)) <= q.offset) {
        ++unsafe;
        break;
      }
    }
  }
  v.require(unsafe == 0, "ACCD steps reaching the offset: " + std::to_string(unsafe) + " of 1000");

  // d_min on a uniform straight polyline against enumeration.
  Positions line(3, 201);
  for (int i = 0; i <= 200; ++i) line.col(i) = Vec3d(1e-4 * i, 0, 0);
  const CodimMesh yarn = rod_chain(line);
  const BarrierParams params{3e-4, 0.0, 1.0};
  const FilterTable table = build_filter_table(yarn, params, 2.0);
  double brute = kInfiniteDistance;
  for (const auto& s : all_stencils(yarn)) {
    const auto p0 = yarn.primitive(s, 0), p1 = yarn.primitive(s, 1);
    if (!(parametric_distance(yarn, p0, p1) < 2.0 * params.h)) continue;
    const double d = reference_distance(yarn, p0, p1);
    if (d < params.h) brute = std::min(brute, d);
  }
  v.require(table.d_min[0] == brute,
            "d_min " + fmt(table.d_min[0]) + " equals enumeration " + fmt(brute));
  report(7, "numerical correctness suite", v, seconds_since(t0));
}

// ---------------------------------------------------------------------------
// Criterion 8: unfiltered pairs see the plain barrier exactly.

void criterion8() {
  const auto t0 = Clock::now();
  Verdict v;
  Rng rng(8);
  Positions ref(3, 31);
  for (int i = 0; i <= 30; ++i) {
    ref.col(i) = Vec3d(0.4 * i, 1.2 * std::sin(0.7 * i), 0.8 * uniform(rng, -1, 1));
  }
  const CodimMesh mesh = rod_chain(ref);
  const BarrierParams params{1.0, 0.1, 1.0};
  const FilterTable table = build_filter_table(mesh, params, 2.0);
  std::vector<Stencil> unfiltered;
  for (const auto& s : all_stencils(mesh)) {
    if (!table.contains(s)) unfiltered.push_back(s);
  }
  int compared = 0, active = 0, attempts = 0;
  double worst = 0.0;
  while (compared < 100 && attempts < 100000) {
    ++attempts;
    Positions x = ref;
    for (int i = 0; i < x.cols(); ++i) x.col(i) += random_vec(rng, 0.5);
    try {
      std::vector<double> ef, ep;
      for (const auto& s : unfiltered) {
        ef.push_back(contact_energy(mesh, x, {s}, table, params, ContactMode::filtered()).energy);
        ep.push_back(contact_energy(mesh, x, {s}, table, params, ContactMode::plain()).energy);
      }
      for (std::size_t k = 0; k < ef.size(); ++k) {
        const double scale = std::max(std::abs(ef[k]), std::abs(ep[k]));
        if (scale > 0.0) {
          ++active;
          worst = std::max(worst, std::abs(ef[k] - ep[k]) / scale);
        }
      }
      ++compared;
    } catch (const InfeasibleError&) {
    }
  }
  v.require(!table.filtered.empty() && !unfiltered.empty(),
            std::to_string(table.size()) + " filtered and " + std::to_string(unfiltered.size()) +
                " unfiltered pairs");
  v.require(compared == 100 && active > 0,
            std::to_string(compared) + " deformations, " + std::to_string(active) +
                " active unfiltered pair energies");
  v.require(worst <= 1e-12, "worst relative difference " + fmt(worst) + " <= 1e-12");
  report(8, "filtered and plain energies agree on unfiltered pairs", v, seconds_since(t0));
}

// ---------------------------------------------------------------------------
// Criterion 9: determinism of written outputs.

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void criterion9() {
  const auto t0 = Clock::now();
  Verdict v;
  const fs::path root = fs::temp_directory_path() / "codim_acceptance_determinism";
  for (const std::string file : {"loop.json", "knot_pull.json", "helix_relax.json"}) {
    if (!fs::exists(g_scenarios / file)) continue;
    std::string csv[2];
    for (int k = 0; k < 2; ++k) {
      const fs::path dir = root / (file + std::to_string(k));
      fs::remove_all(dir);
      auto scene = build_scene(scenario(file));
      std::ostringstream metrics;
      RunOptions options;
      options.out_dir = dir;
      options.metrics = &metrics;
      options.record_wall_time = false;
      run_scene(*scene, options);
      csv[k] = metrics.str();
    }
    int frames = 0, differing = 0;
    for (const auto& entry : fs::directory_iterator(root / (file + "0"))) {
      ++frames;
      const fs::path other = root / (file + "1") / entry.path().filename();
      if (slurp(entry.path()) != slurp(other)) ++differing;
    }
    v.require(csv[0] == csv[1] && differing == 0 && frames > 0,
              file + ": CSV " + (csv[0] == csv[1] ? "identical" : "differs") + ", " +
                  std::to_string(frames - differing) + "/" + std::to_string(frames) +
                  " OBJ frames identical");
  }
  fs::remove_all(root);
  report(9, "byte-identical outputs across two runs", v, seconds_since(t0));
}

}  // namespace

int main(int argc, char** argv) {
  g_scenarios = argc > 1 ? fs::path(argv[1]) : fs::path("scenarios");
  std::set<int> only;
  for (int i = 2; i < argc; ++i) only.insert(std::atoi(argv[i]));
  const std::vector<std::function<void()>> criteria = {criterion1, criterion2, criterion3,
                                                       criterion4, criterion5, criterion6,
                                                       criterion7, criterion8, criterion9};
  bool all = true;
  std::ostringstream summary;
  for (int c = 1; c <= 9; ++c) {
    if (!only.empty() && !only.count(c)) continue;
    std::ostringstream capture;
    auto* old = std::cout.rdbuf(capture.rdbuf());
    criteria[c - 1]();
    std::cout.rdbuf(old);
    const std::string text = capture.str();
    std::cout << text << std::flush;
    const bool pass = text.find(": PASS") != std::string::npos;
    all = all && pass;
    summary << "criterion " << c << ' ' << (pass ? "PASS" : "FAIL") << '\n';
  }
  std::cout << "summary\n" << summary.str();
  return all ? 0 : 1;
}
