#include "codim/spatial_hash.hpp"

#include <algorithm>
#include <cmath>

namespace codim {

SpatialHash::SpatialHash(double cell_size) : cell_size_(cell_size) {
  if (!(cell_size > 0.0)) throw Error("SpatialHash: cell size must be positive");
}

std::array<std::int64_t, 3> SpatialHash::cell_of(const Vec3d& p) const {
  return {static_cast<std::int64_t>(std::floor(p.x() / cell_size_)),
          static_cast<std::int64_t>(std::floor(p.y() / cell_size_)),
          static_cast<std::int64_t>(std::floor(p.z() / cell_size_))};
}

std::uint64_t SpatialHash::pack(std::int64_t i, std::int64_t j,
                                std::int64_t k) {
  constexpr std::int64_t kOffset = 1 << 20;
  constexpr std::uint64_t kMask = (1u << 21) - 1;
  return ((static_cast<std::uint64_t>(i + kOffset) & kMask) << 42) |
         ((static_cast<std::uint64_t>(j + kOffset) & kMask) << 21) |
         (static_cast<std::uint64_t>(k + kOffset) & kMask);
}

void SpatialHash::build(const std::vector<Aabb>& boxes) {
  entries_.clear();
  for (int id = 0; id < static_cast<int>(boxes.size()); ++id) {
    const auto lo = cell_of(boxes[id].lo), hi = cell_of(boxes[id].hi);
    for (std::int64_t i = lo[0]; i <= hi[0]; ++i) {
      for (std::int64_t j = lo[1]; j <= hi[1]; ++j) {
        for (std::int64_t k = lo[2]; k <= hi[2]; ++k) {
          entries_.push_back({pack(i, j, k), id});
        }
      }
    }
  }
  std::sort(entries_.begin(), entries_.end(),
            [](const Entry& a, const Entry& b) {
              return a.key != b.key ? a.key < b.key : a.id < b.id;
            });
}

double hash_cell_size(const CodimMesh& mesh, double inflation) {
  const double size = std::max(inflation, mesh.mean_reference_edge_length());
  return size > 0.0 ? size : 1.0;
}

namespace {

template <int N>
Aabb swept_box(const std::array<int, N>& verts, const Positions& x,
               const Positions* dx, double half_inflation) {
  Aabb box;
  for (int v : verts) {
    box.expand(x.col(v));
    if (dx) box.expand(x.col(v) + dx->col(v));
  }
  box.inflate(half_inflation);
  return box;
}

}  // namespace

void for_each_candidate(const CodimMesh& mesh, const Positions& x,
                        const Positions* dx, double inflation,
                        const std::function<void(const Stencil&)>& visit) {
  const double half = 0.5 * inflation;
  std::vector<Aabb> edge_boxes(mesh.num_edges());
  double extent = 0.0;
  for (int e = 0; e < mesh.num_edges(); ++e) {
    edge_boxes[e] = swept_box<2>(mesh.edges()[e], x, dx, half);
    extent += (edge_boxes[e].hi - edge_boxes[e].lo).maxCoeff();
  }
  // Long sweeps would register each box in many small cells.
  double cell = hash_cell_size(mesh, inflation);
  if (dx && mesh.num_edges() > 0) cell = std::max(cell, extent / mesh.num_edges());
  SpatialHash hash(cell);
  hash.build(edge_boxes);

  std::vector<int> stamp(std::max(mesh.num_edges(), mesh.num_triangles()), -1);
  std::vector<int> found;
  for (int e = 0; e < mesh.num_edges(); ++e) {
    const auto& ev = mesh.edges()[e];
    found.clear();
    hash.query(edge_boxes[e], [&](int other) {
      if (other <= e || stamp[other] == e) return;
      stamp[other] = e;
      const auto& ov = mesh.edges()[other];
      if (ov[0] == ev[0] || ov[0] == ev[1] || ov[1] == ev[0] || ov[1] == ev[1]) {
        return;
      }
      if (edge_boxes[e].overlaps(edge_boxes[other])) found.push_back(other);
    });
    std::sort(found.begin(), found.end());
    for (int other : found) visit(mesh.edge_edge(e, other));
  }

  if (mesh.kind() != MeshKind::Shell) return;

  std::vector<Aabb> tri_boxes(mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    tri_boxes[t] = swept_box<3>(mesh.triangles()[t], x, dx, half);
  }
  hash.build(tri_boxes);
  std::fill(stamp.begin(), stamp.end(), -1);
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    const Aabb vbox = swept_box<1>({v}, x, dx, half);
    found.clear();
    hash.query(vbox, [&](int t) {
      if (stamp[t] == v) return;
      stamp[t] = v;
      const auto& tv = mesh.triangles()[t];
      if (tv[0] == v || tv[1] == v || tv[2] == v) return;
      if (vbox.overlaps(tri_boxes[t])) found.push_back(t);
    });
    std::sort(found.begin(), found.end());
    for (int t : found) visit(mesh.point_triangle(v, t));
  }
}

std::vector<Stencil> broadphase(const CodimMesh& mesh, const Positions& x,
                                const Positions* dx, double inflation) {
  std::vector<Stencil> out;
  for_each_candidate(mesh, x, dx, inflation,
                     [&](const Stencil& s) { out.push_back(s); });
  // Visits arrive edge-edge first, each block in index order.
  if (!std::is_sorted(out.begin(), out.end())) std::sort(out.begin(), out.end());
  return out;
}

}  // namespace codim
