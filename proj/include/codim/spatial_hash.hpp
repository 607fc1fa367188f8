#pragma once

#include "codim/mesh.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace codim {

struct Aabb {
  Vec3d lo = Vec3d::Constant(std::numeric_limits<double>::infinity());
  Vec3d hi = Vec3d::Constant(-std::numeric_limits<double>::infinity());

  void expand(const Vec3d& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void inflate(double r) {
    lo.array() -= r;
    hi.array() += r;
  }
  bool overlaps(const Aabb& o) const {
    return (lo.array() <= o.hi.array()).all() &&
           (o.lo.array() <= hi.array()).all();
  }
};

// Uniform grid over integer cell coordinates. Built once from a batch of
// boxes; every id is registered in each cell its box overlaps.
class SpatialHash {
 public:
  explicit SpatialHash(double cell_size);

  double cell_size() const { return cell_size_; }

  void build(const std::vector<Aabb>& boxes);

  // Calls visit(id) for ids registered in any cell overlapped by box. An id
  // may be reported more than once.
  template <typename Visit>
  void query(const Aabb& box, Visit&& visit) const {
    const auto lo = cell_of(box.lo), hi = cell_of(box.hi);
    for (std::int64_t i = lo[0]; i <= hi[0]; ++i) {
      for (std::int64_t j = lo[1]; j <= hi[1]; ++j) {
        for (std::int64_t k = lo[2]; k <= hi[2]; ++k) {
          const std::uint64_t key = pack(i, j, k);
          auto it = std::lower_bound(
              entries_.begin(), entries_.end(), key,
              [](const Entry& e, std::uint64_t v) { return e.key < v; });
          for (; it != entries_.end() && it->key == key; ++it) visit(it->id);
        }
      }
    }
  }

 private:
  struct Entry {
    std::uint64_t key;
    int id;
  };

  std::array<std::int64_t, 3> cell_of(const Vec3d& p) const;
  static std::uint64_t pack(std::int64_t i, std::int64_t j, std::int64_t k);

  double cell_size_;
  std::vector<Entry> entries_;
};

// Visits every non-vertex-sharing stencil whose primitives' boxes, swept from
// x to x + dx and inflated by inflation / 2 each, overlap. Pairs are visited
// once each, in a deterministic order. dx may be null for static queries.
void for_each_candidate(const CodimMesh& mesh, const Positions& x,
                        const Positions* dx, double inflation,
                        const std::function<void(const Stencil&)>& visit);

// Candidate stencils as a list sorted by stencil key. The result is a superset
// of all stencils whose distance falls below inflation along the sweep.
std::vector<Stencil> broadphase(const CodimMesh& mesh, const Positions& x,
                                const Positions* dx, double inflation);

// Cell size rule for a given inflation.
double hash_cell_size(const CodimMesh& mesh, double inflation);

}  // namespace codim
