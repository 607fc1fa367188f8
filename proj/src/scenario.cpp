#include "codim/scenario.hpp"

#include "codim/spatial_hash.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace codim {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Curves

// Uniform arc-length resampling of a dense polyline into n segments.
Positions resample(const std::vector<Vec3d>& dense, int n) {
  std::vector<double> s(dense.size(), 0.0);
  for (std::size_t i = 1; i < dense.size(); ++i) {
    s[i] = s[i - 1] + (dense[i] - dense[i - 1]).norm();
  }
  Positions out(3, n + 1);
  std::size_t k = 0;
  for (int i = 0; i <= n; ++i) {
    const double target = s.back() * i / n;
    while (k + 2 < dense.size() && s[k + 1] < target) ++k;
    const double span = s[k + 1] - s[k];
    const double u = span > 0.0 ? std::clamp((target - s[k]) / span, 0.0, 1.0) : 0.0;
    out.col(i) = (1.0 - u) * dense[k] + u * dense[k + 1];
  }
  out.col(0) = dense.front();
  out.col(n) = dense.back();
  return out;
}

CodimMesh polyline(Positions x) {
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < x.cols(); ++i) edges.push_back({i, i + 1});
  return CodimMesh::rod(std::move(x), std::move(edges));
}

void require_segments(int segments) {
  if (segments < 1) throw ConfigError("segments must be at least 1");
}

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw ConfigError(std::string(name) + " must be positive");
  }
}

constexpr int kDense = 4000;

// ---------------------------------------------------------------------------
// JSON helpers

[[noreturn]] void bad(const std::string& what) { throw ConfigError(what); }

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!j.is_object()) bad(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::none_of(allowed.begin(), allowed.end(),
                     [&](const char* k) { return it.key() == k; })) {
      bad("unknown key '" + it.key() + "' in " + where);
    }
  }
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) bad(where + " must be a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& where) {
  if (!j.is_number_integer()) bad(where + " must be an integer");
  return j.get<int>();
}

bool boolean(const json& j, const std::string& where) {
  if (!j.is_boolean()) bad(where + " must be true or false");
  return j.get<bool>();
}

Vec3d vec3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) bad(where + " must be a 3-vector");
  return Vec3d(number(j[0], where), number(j[1], where), number(j[2], where));
}

template <typename T, typename F>
void optional_field(const json& j, const char* key, T& out, F convert) {
  if (j.contains(key)) out = convert(j.at(key), std::string(key));
}

VertexSelection parse_selection(const json& j, const std::string& where) {
  check_keys(j, {"indices", "box"}, where);
  VertexSelection sel;
  if (j.contains("indices") == j.contains("box")) {
    bad(where + " needs exactly one of 'indices' or 'box'");
  }
  if (j.contains("indices")) {
    if (!j["indices"].is_array()) bad(where + ".indices must be an array");
    for (const auto& v : j["indices"]) sel.indices.push_back(integer(v, where + ".indices"));
  } else {
    const json& b = j["box"];
    check_keys(b, {"min", "max"}, where + ".box");
    if (!b.contains("min") || !b.contains("max")) bad(where + ".box needs min and max");
    sel.box = Eigen::AlignedBox3d(vec3(b["min"], where + ".box.min"),
                                  vec3(b["max"], where + ".box.max"));
  }
  return sel;
}

ScriptedMotion parse_motion(const json& j, const std::string& where) {
  check_keys(j, {"kind", "select", "second", "velocity", "axis_point", "axis",
                 "angular_velocity", "window"},
             where);
  ScriptedMotion m;
  if (!j.contains("kind") || !j["kind"].is_string()) bad(where + ".kind is required");
  const std::string kind = j["kind"];
  if (kind == "pin") m.kind = ScriptedMotion::Kind::Pin;
  else if (kind == "translate") m.kind = ScriptedMotion::Kind::Translate;
  else if (kind == "twist") m.kind = ScriptedMotion::Kind::Twist;
  else if (kind == "stretch_pull") m.kind = ScriptedMotion::Kind::StretchPull;
  else bad(where + ".kind '" + kind + "' is not one of pin, translate, twist, stretch_pull");
  if (!j.contains("select")) bad(where + ".select is required");
  m.select = parse_selection(j["select"], where + ".select");
  if (j.contains("second")) m.second = parse_selection(j["second"], where + ".second");
  optional_field(j, "velocity", m.velocity, vec3);
  optional_field(j, "axis_point", m.axis_point, vec3);
  optional_field(j, "axis", m.axis, vec3);
  optional_field(j, "angular_velocity", m.angular_velocity, number);
  if (j.contains("window")) {
    const json& w = j["window"];
    if (!w.is_array() || w.size() != 2) bad(where + ".window must be [start, end]");
    m.t_start = number(w[0], where + ".window");
    m.t_end = w[1].is_null() ? std::numeric_limits<double>::infinity()
                             : number(w[1], where + ".window");
  }
  return m;
}

SolverParams parse_solver(const json& j) {
  check_keys(j, {"dt", "newton_tol", "max_newton", "max_step", "armijo_c", "step_shrink",
                 "friction_mu", "friction_epsv", "linear_solver", "pcg_tol",
                 "quasistatic"},
             "solver");
  SolverParams p;
  optional_field(j, "dt", p.dt, number);
  optional_field(j, "newton_tol", p.newton_tol, number);
  optional_field(j, "max_newton", p.max_newton, integer);
  optional_field(j, "max_step", p.max_step, number);
  optional_field(j, "armijo_c", p.armijo_c, number);
  optional_field(j, "step_shrink", p.step_shrink, number);
  optional_field(j, "friction_mu", p.friction_mu, number);
  optional_field(j, "friction_epsv", p.friction_epsv, number);
  optional_field(j, "pcg_tol", p.pcg_tol, number);
  optional_field(j, "quasistatic", p.quasistatic, boolean);
  if (j.contains("linear_solver")) {
    const json& s = j["linear_solver"];
    if (s == "ldlt") p.linear_solver = LinearSolver::Ldlt;
    else if (s == "pcg") p.linear_solver = LinearSolver::Pcg;
    else if (s == "auto") p.linear_solver = LinearSolver::Auto;
    else bad("solver.linear_solver must be 'ldlt', 'pcg' or 'auto'");
  }
  return p;
}

Material parse_material(const json& j, bool& shell) {
  if (!j.is_object() || !j.contains("type")) bad("material.type is required");
  const json& type = j["type"];
  if (type == "rod") {
    check_keys(j, {"type", "youngs_modulus", "density"}, "material");
    RodMaterial m;
    optional_field(j, "youngs_modulus", m.youngs_modulus, number);
    optional_field(j, "density", m.density, number);
    shell = false;
    return m;
  }
  if (type == "shell") {
    check_keys(j, {"type", "youngs_modulus", "poisson_ratio", "density"}, "material");
    ShellMaterial m;
    optional_field(j, "youngs_modulus", m.youngs_modulus, number);
    optional_field(j, "poisson_ratio", m.poisson_ratio, number);
    optional_field(j, "density", m.density, number);
    shell = true;
    return m;
  }
  bad("material.type must be 'rod' or 'shell'");
}

const std::map<std::string, std::map<std::string, double>>& builder_defaults() {
  static const std::map<std::string, std::map<std::string, double>> d = {
      {"straight_yarn", {{"length", 0.05}, {"segments", 500}}},
      {"overhand_knot", {{"segments", 60}, {"size", 5e-3}, {"tail", 3e-3}}},
      {"loop", {{"segments", 18}, {"radius", 6e-4}, {"gap", 8e-4}, {"tail", 9e-4}}},
      {"helix_stack",
       {{"segments", 120}, {"radius", 2e-3}, {"pitch", 1e-3}, {"turns", 3}}},
      {"cloth_grid", {{"width", 0.2}, {"height", 0.2}, {"nx", 100}, {"ny", 100}}},
      {"graded_grid", {{"width", 0.1}, {"n", 100}, {"grading", 0.5}}},
  };
  return d;
}

int as_count(double v, const char* name) {
  if (v != std::floor(v) || v < 1 || v > 1e8) {
    throw ConfigError(std::string(name) + " must be a positive integer");
  }
  return static_cast<int>(v);
}

}  // namespace

// ---------------------------------------------------------------------------

double EtaPolicy::resolve(double h, double d_min) const {
  switch (kind) {
    case Kind::FractionOfH:
      return value * h;
    case Kind::FractionOfMin:
      return value * std::min(h, d_min);
    case Kind::Absolute:
      return value;
  }
  return 0.0;
}

std::vector<int> VertexSelection::resolve(const Positions& reference) const {
  const int n = static_cast<int>(reference.cols());
  std::vector<int> out;
  if (box) {
    for (int v = 0; v < n; ++v) {
      if (box->contains(reference.col(v))) out.push_back(v);
    }
  } else {
    for (int i : indices) {
      const int v = i < 0 ? n + i : i;
      if (v < 0 || v >= n) {
        throw ConfigError("motion vertex index " + std::to_string(i) + " out of range");
      }
      out.push_back(v);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.empty()) throw ConfigError("motion selects no vertices");
  return out;
}

void ScriptedMotion::validate() const {
  if (!(t_start >= 0.0) || !(t_end >= t_start)) {
    throw ConfigError("motion window must satisfy 0 <= start <= end");
  }
  if (!velocity.allFinite() || !axis_point.allFinite() || !std::isfinite(angular_velocity)) {
    throw ConfigError("motion parameters must be finite");
  }
  if (kind == Kind::Twist && !(axis.norm() > 0.0)) {
    throw ConfigError("twist axis must be nonzero");
  }
  const bool has_second = !second.indices.empty() || second.box.has_value();
  if ((kind == Kind::StretchPull) != has_second) {
    throw ConfigError("'second' is required for stretch_pull and only allowed there");
  }
}

void ScenarioConfig::validate() const {
  if (!(thickness > 0.0) || !std::isfinite(thickness)) {
    throw ConfigError("thickness must be positive");
  }
  if (frames < 1) throw ConfigError("frames must be at least 1");
  if (!(contact_stiffness > 0.0)) throw ConfigError("contact stiffness must be positive");
  if (!gravity.allFinite()) throw ConfigError("gravity must be finite");
  if (!(eta_policy.value >= 0.0) || !std::isfinite(eta_policy.value)) {
    throw ConfigError("eta policy value must be non-negative");
  }
  if (eta_policy.kind != EtaPolicy::Kind::Absolute && !(eta_policy.value < 1.0)) {
    throw ConfigError("eta fraction must be below 1");
  }
  if (eta_policy.kind == EtaPolicy::Kind::Absolute && !(eta_policy.value < thickness)) {
    throw ConfigError("absolute eta must be below the thickness");
  }
  if (geometry.obj.empty() == geometry.builder.empty()) {
    throw ConfigError("geometry needs exactly one of 'obj' or 'builder'");
  }
  if (!(geometry.jitter >= 0.0)) throw ConfigError("jitter must be non-negative");
  for (const auto& m : motions) m.validate();
  solver.validate();
}

ScenarioConfig parse_scenario(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("scenario is not valid JSON: ") + e.what());
  }
  check_keys(j, {"geometry", "material", "thickness", "eta_policy", "contact", "gravity",
                 "motions", "solver", "frames", "seed"},
             "scenario");
  ScenarioConfig c;

  if (!j.contains("geometry")) bad("geometry is required");
  const json& g = j["geometry"];
  if (!g.is_object()) bad("geometry must be an object");
  if (g.contains("obj")) {
    check_keys(g, {"obj", "jitter"}, "geometry");
    if (!g["obj"].is_string()) bad("geometry.obj must be a path");
    std::filesystem::path p = g["obj"].get<std::string>();
    c.geometry.obj = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  } else if (g.contains("builder")) {
    if (!g["builder"].is_string()) bad("geometry.builder must be a name");
    c.geometry.builder = g["builder"];
    const auto& defaults = builder_defaults();
    const auto it = defaults.find(c.geometry.builder);
    if (it == defaults.end()) bad("unknown builder '" + c.geometry.builder + "'");
    c.geometry.params = it->second;
    for (auto p = g.begin(); p != g.end(); ++p) {
      if (p.key() == "builder" || p.key() == "jitter") continue;
      if (!it->second.count(p.key())) {
        bad("unknown key '" + p.key() + "' for builder " + c.geometry.builder);
      }
      c.geometry.params[p.key()] = number(p.value(), "geometry." + p.key());
    }
  } else {
    bad("geometry needs 'obj' or 'builder'");
  }
  optional_field(g, "jitter", c.geometry.jitter, number);

  if (!j.contains("material")) bad("material is required");
  bool shell = false;
  c.material = parse_material(j["material"], shell);
  c.thickness = shell ? 1e-3 : 3e-4;
  optional_field(j, "thickness", c.thickness, number);

  if (j.contains("eta_policy")) {
    const json& e = j["eta_policy"];
    check_keys(e, {"fraction_of_h", "fraction_of_min", "absolute"}, "eta_policy");
    if (e.size() != 1) bad("eta_policy needs exactly one entry");
    const auto kv = e.begin();
    c.eta_policy.value = number(kv.value(), "eta_policy." + kv.key());
    c.eta_policy.kind = kv.key() == "fraction_of_h"     ? EtaPolicy::Kind::FractionOfH
                        : kv.key() == "fraction_of_min" ? EtaPolicy::Kind::FractionOfMin
                                                        : EtaPolicy::Kind::Absolute;
  }

  if (j.contains("contact")) {
    const json& ct = j["contact"];
    check_keys(ct, {"mode", "cull_radius", "stiffness"}, "contact");
    int radius = 11;
    optional_field(ct, "cull_radius", radius, integer);
    optional_field(ct, "stiffness", c.contact_stiffness, number);
    const std::string mode = ct.value("mode", std::string("filtered"));
    c.contact_mode = parse_contact_mode(mode, radius);
  }

  if (j.contains("gravity")) {
    const json& gr = j["gravity"];
    check_keys(gr, {"enabled", "vector"}, "gravity");
    optional_field(gr, "enabled", c.gravity_enabled, boolean);
    optional_field(gr, "vector", c.gravity, vec3);
  }

  if (j.contains("motions")) {
    if (!j["motions"].is_array()) bad("motions must be an array");
    for (std::size_t i = 0; i < j["motions"].size(); ++i) {
      c.motions.push_back(parse_motion(j["motions"][i], "motions[" + std::to_string(i) + "]"));
    }
  }
  if (j.contains("solver")) c.solver = parse_solver(j["solver"]);
  if (!j.contains("solver") || !j["solver"].contains("newton_tol")) {
    c.solver.newton_tol = shell ? 1e-3 : 1e-4;
  }
  optional_field(j, "frames", c.frames, integer);
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) bad("seed must be a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  c.validate();
  return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path.parent_path());
}

ContactMode parse_contact_mode(const std::string& name, int cull_radius) {
  if (name == "filtered") return ContactMode::filtered();
  if (name == "barrier") return ContactMode::plain();
  if (name == "culled") return ContactMode::culled(cull_radius);
  throw ConfigError("contact mode must be barrier, culled or filtered, not '" + name + "'");
}

// ---------------------------------------------------------------------------
// Builders

CodimMesh straight_yarn(double length, int segments) {
  require_positive(length, "length");
  require_segments(segments);
  Positions x = Positions::Zero(3, segments + 1);
  for (int i = 0; i <= segments; ++i) x(0, i) = length * i / segments;
  return polyline(std::move(x));
}

CodimMesh overhand_knot(int segments, double size, double tail) {
  require_segments(segments);
  require_positive(size, "size");
  if (!(tail >= 0.0)) throw ConfigError("tail must be non-negative");
  // Trefoil opened at the lobe tip t = pi, which sits at (0, -3, 0) with
  // tangent along +x. The removed arc is replaced by two diverging tails.
  const double s = size / 6.0;
  const double pi = std::numbers::pi;
  const double cut = 0.35;
  auto trefoil = [&](double t) -> Vec3d {
    return Vec3d(std::sin(t) + 2.0 * std::sin(2.0 * t), std::cos(t) - 2.0 * std::cos(2.0 * t),
                 -std::sin(3.0 * t)) * s;
  };
  std::vector<Vec3d> knot;
  for (int i = 0; i <= kDense; ++i) {
    knot.push_back(trefoil(pi + cut + (2.0 * pi - 2.0 * cut) * i / kDense));
  }
  // Walked backwards so the yarn starts on the -x side.
  const Vec3d d_first = Vec3d(-1.0, -1.0, 0.0).normalized();
  const Vec3d d_last = Vec3d(1.0, -1.0, 0.0).normalized();
  std::vector<Vec3d> dense;
  const int tail_samples = kDense / 4;
  for (int i = tail_samples; i > 0; --i) {
    dense.push_back(knot.back() + d_first * (tail * i / tail_samples));
  }
  dense.insert(dense.end(), knot.rbegin(), knot.rend());
  for (int i = 1; i <= tail_samples; ++i) {
    dense.push_back(knot.front() + d_last * (tail * i / tail_samples));
  }
  return polyline(resample(dense, segments));
}

CodimMesh loop_yarn(int segments, double radius, double gap, double tail) {
  require_segments(segments);
  require_positive(radius, "radius");
  require_positive(gap, "gap");
  if (!(tail >= 0.0)) throw ConfigError("tail must be non-negative");
  const double pi = std::numbers::pi;
  std::vector<Vec3d> dense;
  const int tail_samples = kDense / 4;
  for (int i = 0; i < tail_samples; ++i) {
    dense.emplace_back(-tail * (1.0 - double(i) / tail_samples), 0.0, -0.5 * gap);
  }
  for (int i = 0; i <= kDense; ++i) {
    const double t = 2.0 * pi * i / kDense;
    dense.emplace_back(radius * std::sin(t), radius * (1.0 - std::cos(t)),
                       -0.5 * gap * std::cos(0.5 * t));
  }
  for (int i = 1; i <= tail_samples; ++i) {
    dense.emplace_back(tail * i / tail_samples, 0.0, 0.5 * gap);
  }
  return polyline(resample(dense, segments));
}

CodimMesh helix_stack(int segments, double radius, double pitch, double turns) {
  require_segments(segments);
  require_positive(radius, "radius");
  require_positive(pitch, "pitch");
  require_positive(turns, "turns");
  Positions x(3, segments + 1);
  const double span = 2.0 * std::numbers::pi * turns;
  for (int i = 0; i <= segments; ++i) {
    const double t = span * i / segments;
    x.col(i) = Vec3d(radius * std::cos(t), radius * std::sin(t),
                     pitch * t / (2.0 * std::numbers::pi));
  }
  return polyline(std::move(x));
}

namespace {

CodimMesh grid_from_coordinates(const std::vector<double>& xs, const std::vector<double>& ys) {
  const int nx = static_cast<int>(xs.size()) - 1;
  const int ny = static_cast<int>(ys.size()) - 1;
  Positions x(3, (nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j) {
    for (int i = 0; i <= nx; ++i) x.col(j * (nx + 1) + i) = Vec3d(xs[i], ys[j], 0.0);
  }
  std::vector<Triangle> tris;
  tris.reserve(2 * nx * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int v = j * (nx + 1) + i;
      tris.push_back({v, v + 1, v + nx + 2});
      tris.push_back({v, v + nx + 2, v + nx + 1});
    }
  }
  return CodimMesh::shell(std::move(x), std::move(tris));
}

}  // namespace

CodimMesh cloth_grid(double width, double height, int nx, int ny) {
  require_positive(width, "width");
  require_positive(height, "height");
  require_segments(nx);
  require_segments(ny);
  std::vector<double> xs(nx + 1), ys(ny + 1);
  for (int i = 0; i <= nx; ++i) xs[i] = width * i / nx;
  for (int j = 0; j <= ny; ++j) ys[j] = height * j / ny;
  return grid_from_coordinates(xs, ys);
}

CodimMesh graded_grid(double width, int n, double grading) {
  require_positive(width, "width");
  require_segments(n);
  if (!(grading >= 0.0 && grading < 1.0)) throw ConfigError("grading must be in [0, 1)");
  // Spacing proportional to 1 + grading * cos(2 pi s): finest at the center.
  std::vector<double> xs(n + 1);
  for (int i = 0; i <= n; ++i) {
    const double s = double(i) / n;
    xs[i] = width * (s + grading * std::sin(2.0 * std::numbers::pi * s) /
                             (2.0 * std::numbers::pi));
  }
  xs[n] = width;
  return grid_from_coordinates(xs, xs);
}

CodimMesh build_geometry(const GeometryConfig& geometry, std::uint64_t seed) {
  CodimMesh mesh;
  if (!geometry.obj.empty()) {
    mesh = load_obj(geometry.obj);
  } else {
    auto p = builder_defaults().count(geometry.builder)
                 ? builder_defaults().at(geometry.builder)
                 : throw ConfigError("unknown builder '" + geometry.builder + "'");
    for (const auto& [k, v] : geometry.params) {
      if (!p.count(k)) throw ConfigError("unknown key '" + k + "' for builder " + geometry.builder);
      p[k] = v;
    }
    const std::string& b = geometry.builder;
    if (b == "straight_yarn") {
      mesh = straight_yarn(p["length"], as_count(p["segments"], "segments"));
    } else if (b == "overhand_knot") {
      mesh = overhand_knot(as_count(p["segments"], "segments"), p["size"], p["tail"]);
    } else if (b == "loop") {
      mesh = loop_yarn(as_count(p["segments"], "segments"), p["radius"], p["gap"], p["tail"]);
    } else if (b == "helix_stack") {
      mesh = helix_stack(as_count(p["segments"], "segments"), p["radius"], p["pitch"],
                         p["turns"]);
    } else if (b == "cloth_grid") {
      mesh = cloth_grid(p["width"], p["height"], as_count(p["nx"], "nx"),
                        as_count(p["ny"], "ny"));
    } else {
      mesh = graded_grid(p["width"], as_count(p["n"], "n"), p["grading"]);
    }
  }
  if (geometry.jitter > 0.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-geometry.jitter, geometry.jitter);
    Positions x = mesh.reference();
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] += u(rng);
    mesh = mesh.kind() == MeshKind::Rod ? CodimMesh::rod(std::move(x), mesh.edges())
                                        : CodimMesh::shell(std::move(x), mesh.triangles());
  }
  return mesh;
}

// ---------------------------------------------------------------------------
// Motions

std::vector<ResolvedMotion> resolve_motions(const std::vector<ScriptedMotion>& motions,
                                            const Positions& reference) {
  std::vector<ResolvedMotion> out;
  for (const ScriptedMotion& m : motions) {
    m.validate();
    ResolvedMotion r{m, m.select.resolve(reference), {}};
    if (m.kind == ScriptedMotion::Kind::StretchPull) {
      r.second = m.second.resolve(reference);
      std::vector<int> both;
      std::set_intersection(r.first.begin(), r.first.end(), r.second.begin(),
                            r.second.end(), std::back_inserter(both));
      if (!both.empty()) {
        throw ConfigError("stretch_pull sets share vertex " + std::to_string(both.front()));
      }
    }
    out.push_back(std::move(r));
  }
  // Two non-pin motions on one vertex conflict when their windows overlap.
  std::map<int, std::vector<std::size_t>> owners;
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (int v : out[i].first) owners[v].push_back(i);
    for (int v : out[i].second) owners[v].push_back(i);
  }
  for (const auto& [v, list] : owners) {
    for (std::size_t a = 0; a < list.size(); ++a) {
      for (std::size_t b = a + 1; b < list.size(); ++b) {
        const ScriptedMotion& ma = out[list[a]].motion;
        const ScriptedMotion& mb = out[list[b]].motion;
        const bool both_pins = ma.kind == ScriptedMotion::Kind::Pin &&
                               mb.kind == ScriptedMotion::Kind::Pin;
        const bool overlap = ma.t_start < mb.t_end && mb.t_start < ma.t_end;
        if (overlap && !both_pins) {
          throw ConfigError("conflicting motions prescribe vertex " + std::to_string(v));
        }
      }
    }
  }
  return out;
}

namespace {

Vec3d move(const ScriptedMotion& m, bool second_set, const Vec3d& p, double tau) {
  switch (m.kind) {
    case ScriptedMotion::Kind::Pin:
      return p;
    case ScriptedMotion::Kind::Translate:
      return p + tau * m.velocity;
    case ScriptedMotion::Kind::StretchPull:
      return p + (second_set ? tau : -tau) * m.velocity;
    case ScriptedMotion::Kind::Twist: {
      const Eigen::AngleAxisd rot(m.angular_velocity * tau, m.axis.normalized());
      return m.axis_point + rot * (p - m.axis_point);
    }
  }
  return p;
}

}  // namespace

void apply_motions(const std::vector<ResolvedMotion>& motions, const Positions& reference,
                   double t, Positions& x) {
  std::vector<std::size_t> order(motions.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return motions[a].motion.t_start < motions[b].motion.t_start;
  });
  std::vector<char> touched(x.cols(), 0);
  for (std::size_t i : order) {
    const ResolvedMotion& r = motions[i];
    const double tau = std::clamp(t, r.motion.t_start, r.motion.t_end) - r.motion.t_start;
    for (int pass = 0; pass < 2; ++pass) {
      for (int v : pass == 0 ? r.first : r.second) {
        const Vec3d base = touched[v] ? Vec3d(x.col(v)) : Vec3d(reference.col(v));
        x.col(v) = move(r.motion, pass == 1, base, tau);
        touched[v] = 1;
      }
    }
  }
}

// ---------------------------------------------------------------------------

double BuiltScene::d_min() const {
  double d = kInfiniteDistance;
  for (double v : table_.d_min) d = std::min(d, v);
  return d;
}

std::unique_ptr<BuiltScene> build_scene(const ScenarioConfig& config) {
  config.validate();
  std::unique_ptr<BuiltScene> out(new BuiltScene());
  out->config_ = config;
  out->mesh_ = std::make_unique<CodimMesh>(build_geometry(config.geometry, config.seed));
  const CodimMesh& mesh = *out->mesh_;

  Material material = config.material;
  if (auto* rod = std::get_if<RodMaterial>(&material)) rod->radius = 0.5 * config.thickness;
  if (auto* shell = std::get_if<ShellMaterial>(&material)) shell->thickness = config.thickness;
  out->elastic_ = std::make_unique<ElasticModel>(mesh, material);

  constexpr double kappa = 2.0;
  BarrierParams params{config.thickness, 0.0, config.contact_stiffness};
  FilterTable table = build_filter_table(mesh, params, kappa);
  double d_min = kInfiniteDistance;
  for (double v : table.d_min) d_min = std::min(d_min, v);
  params.eta = config.eta_policy.resolve(config.thickness, d_min);
  out->table_ = table;
  out->contact_ = std::make_unique<ContactModel>(mesh, params, config.contact_mode,
                                                 std::move(table), kappa);

  out->motions_ = resolve_motions(config.motions, mesh.reference());
  std::vector<int> fixed;
  for (const auto& r : out->motions_) {
    fixed.insert(fixed.end(), r.first.begin(), r.first.end());
    fixed.insert(fixed.end(), r.second.begin(), r.second.end());
  }

  Scene& scene = out->scene_;
  scene.mesh = out->mesh_.get();
  scene.elastic = out->elastic_.get();
  scene.contact = out->contact_.get();
  scene.gravity = config.gravity_enabled ? config.gravity : Vec3d::Zero();
  scene.solver = config.solver;
  if (!out->motions_.empty()) {
    const BuiltScene* self = out.get();
    scene.boundary = [self](double t, Positions& x) {
      apply_motions(self->motions_, self->mesh_->reference(), t, x);
    };
  }
  out->state_ = initial_state(scene, std::move(fixed));
  if (scene.boundary) scene.boundary(0.0, out->state_.x);

  const PairDistanceSummary summary = pair_distance_summary(*out->contact_, out->state_.x);
  if (!(summary.min_margin > 0.0)) {
    throw InfeasibleError("initial configuration places a contact pair at or inside its offset");
  }
  return out;
}

}  // namespace codim
