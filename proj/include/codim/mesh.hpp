#pragma once

#include "codim/proximity.hpp"
#include "codim/types.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace codim {

enum class MeshKind { Rod, Shell };

using Edge = std::array<int, 2>;
using Triangle = std::array<int, 3>;

// A vertex, edge or triangle. Indices are stored sorted so that the same
// primitive always hashes the same way regardless of orientation.
struct Primitive {
  enum class Kind { Vertex, Edge, Triangle };

  Kind kind = Kind::Vertex;
  std::array<int, 3> indices = {-1, -1, -1};

  static Primitive vertex(int v);
  static Primitive edge(int a, int b);
  static Primitive triangle(int a, int b, int c);

  int size() const { return static_cast<int>(kind) + 1; }
  bool contains(int v) const;
  bool shares_vertex(const Primitive& other) const;
  friend bool operator==(const Primitive&, const Primitive&) = default;
};

// A contact stencil between two mesh primitives that share no vertex.
// Rods use edge-edge stencils; shells use point-triangle and edge-edge
// stencils. Closer subcases (PP, PE) are resolved inside the distance
// evaluation.
struct Stencil {
  PairKind kind = PairKind::EdgeEdge;
  // EdgeEdge: edge indices with a < b. PointTriangle: vertex a, triangle b.
  int a = -1;
  int b = -1;
  std::array<int, 4> vertices = {-1, -1, -1, -1};

  std::uint64_t key() const;
  friend bool operator==(const Stencil& l, const Stencil& r) {
    return l.kind == r.kind && l.a == r.a && l.b == r.b;
  }
  friend bool operator<(const Stencil& l, const Stencil& r) {
    return l.key() < r.key();
  }
};

class CodimMesh {
 public:
  CodimMesh() = default;

  // Polyline mesh from explicit edges.
  static CodimMesh rod(Positions reference, std::vector<Edge> edges);
  // Triangle mesh; the edge list is derived from the triangles.
  static CodimMesh shell(Positions reference, std::vector<Triangle> triangles);

  MeshKind kind() const { return kind_; }
  int num_vertices() const { return static_cast<int>(reference_.cols()); }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  int num_triangles() const { return static_cast<int>(triangles_.size()); }

  const Positions& reference() const { return reference_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }

  const std::vector<int>& component_ids() const { return component_; }
  int num_components() const { return num_components_; }

  // Incident edges per vertex (indices into edges()).
  const std::vector<std::vector<int>>& vertex_edges() const {
    return vertex_edges_;
  }
  // Triangles incident to each edge (shells only).
  const std::vector<std::vector<int>>& edge_triangles() const {
    return edge_triangles_;
  }

  double reference_edge_length(int e) const;
  double mean_reference_edge_length() const;

  Primitive edge_primitive(int e) const;
  Primitive triangle_primitive(int t) const;
  Primitive primitive(const Stencil& s, int side) const;

  Stencil edge_edge(int e0, int e1) const;
  Stencil point_triangle(int v, int t) const;

  // Gather stencil vertex positions into a 3x4 block.
  StencilPoints<double> gather(const Stencil& s, const Positions& x) const;

 private:
  void finalize();

  MeshKind kind_ = MeshKind::Rod;
  Positions reference_;
  std::vector<Edge> edges_;
  std::vector<Triangle> triangles_;
  std::vector<int> component_;
  int num_components_ = 0;
  std::vector<std::vector<int>> vertex_edges_;
  std::vector<std::vector<int>> edge_triangles_;
};

// Edge-connected components. Labels are contiguous from 0, ordered by the
// smallest vertex index in each component.
std::vector<int> connected_components(const CodimMesh& mesh);

constexpr double kInfiniteDistance = std::numeric_limits<double>::infinity();

// Shortest path over reference edge lengths between the closest vertices of
// two primitives (arc length for rods, graph geodesic for shells). Zero for
// primitives sharing a vertex, infinite across components.
double parametric_distance(const CodimMesh& mesh, const Primitive& p1,
                           const Primitive& p2);

// Fewest edges between any vertex of p1 and any vertex of p2; -1 across
// components.
int hop_distance(const CodimMesh& mesh, const Primitive& p1,
                 const Primitive& p2);

// Euclidean distance between two primitives in the reference configuration.
// Throws if the primitives share a vertex or do not form a stencil.
double reference_distance(const CodimMesh& mesh, const Primitive& p1,
                          const Primitive& p2);

// Stencil kind for a pair of primitive kinds; throws for unsupported pairs.
PairKind stencil_kind(const Primitive& p1, const Primitive& p2);

// Truncated single-source shortest paths from every vertex, used for bulk
// parametric queries. Entries beyond the radius are omitted.
class GeodesicBalls {
 public:
  GeodesicBalls(const CodimMesh& mesh, double radius);

  double radius() const { return radius_; }
  // Parametric distance between primitives, or infinity when beyond radius.
  double distance(const Primitive& p1, const Primitive& p2) const;

 private:
  double vertex_distance(int a, int b) const;

  double radius_;
  std::vector<std::vector<std::pair<int, double>>> balls_;
};

// Truncated breadth-first neighborhoods for hop-count queries.
class HopBalls {
 public:
  HopBalls(const CodimMesh& mesh, int radius);

  int radius() const { return radius_; }
  // True when some vertex pair is within the hop radius.
  bool within(const Primitive& p1, const Primitive& p2) const;

 private:
  int radius_;
  std::vector<std::vector<int>> balls_;  // sorted vertex lists
};

// Wavefront OBJ: "v" vertices, "l" polylines, "f" triangles.
CodimMesh load_obj(const std::filesystem::path& path);
CodimMesh parse_obj(std::istream& in);
void write_obj(std::ostream& out, const CodimMesh& mesh, const Positions& x);

// Total reference/deformed measure: polyline length for rods, area for shells.
double total_measure(const CodimMesh& mesh, const Positions& x);

}  // namespace codim
