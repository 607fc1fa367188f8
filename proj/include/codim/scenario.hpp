#pragma once

#include "codim/solver.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace codim {

struct GeometryConfig {
  // Exactly one of obj and builder is set.
  std::filesystem::path obj;
  std::string builder;
  std::map<std::string, double> params;
  // Uniform random displacement of every vertex, in meters, drawn from seed.
  double jitter = 0.0;
};

struct EtaPolicy {
  enum class Kind { FractionOfH, FractionOfMin, Absolute };
  Kind kind = Kind::FractionOfMin;
  double value = 0.9;

  // eta for thickness h and the smallest filtered reference distance.
  double resolve(double h, double d_min) const;
};

// Vertices chosen by index or by an axis-aligned box on reference positions.
struct VertexSelection {
  std::vector<int> indices;
  std::optional<Eigen::AlignedBox3d> box;

  std::vector<int> resolve(const Positions& reference) const;
};

struct ScriptedMotion {
  enum class Kind { Pin, Translate, Twist, StretchPull };
  Kind kind = Kind::Pin;
  VertexSelection select;
  VertexSelection second;   // StretchPull: the set moving along +velocity
  Vec3d velocity = Vec3d::Zero();  // Translate; StretchPull moves select by -velocity
  Vec3d axis_point = Vec3d::Zero();
  Vec3d axis = Vec3d::UnitZ();
  double angular_velocity = 0.0;  // rad/s
  double t_start = 0.0;
  double t_end = std::numeric_limits<double>::infinity();

  void validate() const;
};

struct ScenarioConfig {
  GeometryConfig geometry;
  Material material;
  double thickness = 3e-4;
  EtaPolicy eta_policy;
  ContactMode contact_mode = ContactMode::filtered();
  double contact_stiffness = 1.0;  // N/m
  bool gravity_enabled = false;
  Vec3d gravity = Vec3d(0.0, 0.0, -9.81);
  std::vector<ScriptedMotion> motions;
  SolverParams solver;
  int frames = 50;
  std::uint64_t seed = 0;

  void validate() const;
};

// "barrier", "culled" or "filtered".
ContactMode parse_contact_mode(const std::string& name, int cull_radius = 11);

// Parses the JSON scenario format; unknown keys throw ConfigError. Relative
// obj paths resolve against base_dir.
ScenarioConfig parse_scenario(const std::string& text,
                              const std::filesystem::path& base_dir = {});
ScenarioConfig load_scenario(const std::filesystem::path& path);

// Procedural geometry by builder name.
CodimMesh build_geometry(const GeometryConfig& geometry, std::uint64_t seed);

CodimMesh straight_yarn(double length, int segments);
// Trefoil opened at one lobe with straight tails; size is the knot width.
CodimMesh overhand_knot(int segments, double size, double tail);
// One crossing loop of the given radius between two straight tails; the
// strands cross with vertical separation gap.
CodimMesh loop_yarn(int segments, double radius, double gap, double tail);
CodimMesh helix_stack(int segments, double radius, double pitch, double turns);
// width x height sheet with nx x ny cells, two triangles per cell.
CodimMesh cloth_grid(double width, double height, int nx, int ny);
// Square sheet whose spacing shrinks toward the center by the factor
// (1 - grading).
CodimMesh graded_grid(double width, int n, double grading);

struct ResolvedMotion {
  ScriptedMotion motion;
  std::vector<int> first;
  std::vector<int> second;
};

// Resolves selections and rejects overlapping prescriptions on one vertex.
std::vector<ResolvedMotion> resolve_motions(const std::vector<ScriptedMotion>& motions,
                                            const Positions& reference);

// Writes the prescribed positions at time t. Motions on one vertex compose
// in start-time order; positions are held after each window ends.
void apply_motions(const std::vector<ResolvedMotion>& motions,
                   const Positions& reference, double t, Positions& x);

// A scene with stable addresses for the solver's non-owning pointers.
class BuiltScene {
 public:
  BuiltScene(const BuiltScene&) = delete;
  BuiltScene& operator=(const BuiltScene&) = delete;

  const ScenarioConfig& config() const { return config_; }
  const CodimMesh& mesh() const { return *mesh_; }
  const ElasticModel& elastic() const { return *elastic_; }
  const ContactModel& contact() const { return *contact_; }
  const Scene& scene() const { return scene_; }
  const std::vector<ResolvedMotion>& motions() const { return motions_; }
  double eta() const { return contact_->params().eta; }
  // Built in every mode for reporting; only filtered mode applies it.
  const FilterTable& filter_table() const { return table_; }
  // Smallest filtered reference distance over components (infinite if none).
  double d_min() const;

  SimState& state() { return state_; }
  const SimState& state() const { return state_; }

 private:
  friend std::unique_ptr<BuiltScene> build_scene(const ScenarioConfig& config);
  BuiltScene() = default;

  ScenarioConfig config_;
  std::unique_ptr<CodimMesh> mesh_;
  std::unique_ptr<ElasticModel> elastic_;
  std::unique_ptr<ContactModel> contact_;
  FilterTable table_;
  std::vector<ResolvedMotion> motions_;
  Scene scene_;
  SimState state_;
};

std::unique_ptr<BuiltScene> build_scene(const ScenarioConfig& config);

}  // namespace codim
