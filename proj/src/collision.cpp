#include "codim/collision.hpp"

#include <algorithm>
#include <cmath>

namespace codim {

double accd_max_step(const CcdQuery& q) {
  const int n = vertex_count(q.kind);
  if (!(q.slack > 0.0 && q.slack < 1.0)) throw ConfigError("ACCD slack must lie in (0, 1)");

  StencilPoints<double> dx = q.dx;
  const Vec3d mean = dx.leftCols(n).rowwise().mean();
  dx.leftCols(n).colwise() -= mean;
  auto norm = [&](int i) { return dx.col(i).norm(); };
  double lp = 0.0;
  switch (q.kind) {
    case PairKind::PointPoint:
      lp = norm(0) + norm(1);
      break;
    case PairKind::PointEdge:
      lp = norm(0) + std::max(norm(1), norm(2));
      break;
    case PairKind::EdgeEdge:
      lp = std::max(norm(0), norm(1)) + std::max(norm(2), norm(3));
      break;
    case PairKind::PointTriangle:
      lp = norm(0) + std::max({norm(1), norm(2), norm(3)});
      break;
  }

  StencilPoints<double> x = q.x0;
  double gap = pair_distance_value(q.kind, x) - q.offset;
  if (!(gap > 0.0)) {
    throw InfeasibleError("CCD query starts at or inside its offset");
  }
  if (lp == 0.0) return 1.0;

  const double target = q.slack * gap;
  double toc = 0.0;
  for (int it = 0; it < q.max_iterations; ++it) {
    const double step = (1.0 - q.slack) * gap / lp;
    x += step * dx;
    gap = pair_distance_value(q.kind, x) - q.offset;
    if (toc > 0.0 && gap < target) return toc;
    toc += step;
    if (toc > 1.0) return 1.0;
  }
  return toc;
}

double scene_max_step(const ContactModel& model, const Positions& x,
                      const Positions& p, const std::vector<Stencil>* candidates) {
  std::vector<Stencil> local;
  if (!candidates) {
    local = broadphase(model.mesh(), x, &p, model.params().h);
    candidates = &local;
  }
  const auto& pairs = *candidates;
  constexpr int kChunk = 1024;
  const int chunks = static_cast<int>((pairs.size() + kChunk - 1) / kChunk);
  std::vector<double> partial(chunks, 1.0);
  parallel_for(chunks, [&](int c) {
    const std::size_t end = std::min(pairs.size(), std::size_t(c + 1) * kChunk);
    double t = 1.0;
    for (std::size_t i = std::size_t(c) * kChunk; i < end; ++i) {
      const Stencil& s = pairs[i];
      if (!model.admissible(s)) continue;
      CcdQuery q;
      q.kind = s.kind;
      q.x0 = model.mesh().gather(s, x);
      q.dx = model.mesh().gather(s, p);
      q.offset = model.activation(s).eta;
      t = std::min(t, accd_max_step(q));
    }
    partial[c] = t;
  });
  double t = 1.0;
  for (double v : partial) t = std::min(t, v);
  return t;
}

int intersection_count(const CodimMesh& mesh, const Positions& x) {
  constexpr double kTouch = 1e-12;
  if (mesh.kind() == MeshKind::Rod) {
    int count = 0;
    for_each_candidate(mesh, x, nullptr, kTouch, [&](const Stencil& s) {
      if (segment_segment_distance(x.col(s.vertices[0]), x.col(s.vertices[1]),
                                   x.col(s.vertices[2]), x.col(s.vertices[3])) < kTouch) {
        ++count;
      }
    });
    return count;
  }

  std::vector<Aabb> tri_boxes(mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    for (int v : mesh.triangles()[t]) tri_boxes[t].expand(x.col(v));
    tri_boxes[t].inflate(kTouch);
  }
  SpatialHash hash(hash_cell_size(mesh, 0.0));
  hash.build(tri_boxes);
  std::vector<int> stamp(mesh.num_triangles(), -1);
  int count = 0;
  for (int e = 0; e < mesh.num_edges(); ++e) {
    const auto [a, b] = mesh.edges()[e];
    Aabb box;
    box.expand(x.col(a));
    box.expand(x.col(b));
    hash.query(box, [&](int t) {
      if (stamp[t] == e) return;
      stamp[t] = e;
      const auto& tv = mesh.triangles()[t];
      for (int v : tv) {
        if (v == a || v == b) return;
      }
      if (!box.overlaps(tri_boxes[t])) return;
      if (segment_triangle_intersect(x.col(a), x.col(b), x.col(tv[0]),
                                     x.col(tv[1]), x.col(tv[2]))) {
        ++count;
      }
    });
  }
  return count;
}

namespace {

// Real roots in [0, 1] of c0 + c1 t + c2 t^2 + c3 t^3 by bisection on
// monotone pieces.
std::vector<double> cubic_roots_unit(const std::array<double, 4>& c) {
  auto f = [&](double t) { return ((c[3] * t + c[2]) * t + c[1]) * t + c[0]; };
  std::vector<double> knots = {0.0, 1.0};
  // Critical points: 3 c3 t^2 + 2 c2 t + c1 = 0.
  const double qa = 3.0 * c[3], qb = 2.0 * c[2], qc = c[1];
  if (qa != 0.0) {
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      const double r = -0.5 * (qb + std::copysign(sq, qb));
      if (r != 0.0) {
        knots.push_back(r / qa);
        knots.push_back(qc / r);
      } else {
        knots.push_back(0.0);
      }
    }
  } else if (qb != 0.0) {
    knots.push_back(-qc / qb);
  }
  std::vector<double> pts;
  for (double k : knots) {
    if (k >= 0.0 && k <= 1.0) pts.push_back(k);
  }
  std::sort(pts.begin(), pts.end());
  std::vector<double> roots;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    double lo = pts[i], hi = pts[i + 1];
    double flo = f(lo), fhi = f(hi);
    if (flo == 0.0) {
      roots.push_back(lo);
      continue;
    }
    if (fhi == 0.0) {
      roots.push_back(hi);
      continue;
    }
    if ((flo < 0.0) == (fhi < 0.0)) continue;
    for (int it = 0; it < 100 && hi - lo > 1e-16; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double fm = f(mid);
      if ((fm < 0.0) == (flo < 0.0)) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
      }
    }
    roots.push_back(0.5 * (lo + hi));
  }
  return roots;
}

bool segments_cross_during(const Vec3d& a0, const Vec3d& a1, const Vec3d& b0,
                           const Vec3d& b1, const Vec3d& da0, const Vec3d& da1,
                           const Vec3d& db0, const Vec3d& db1) {
  // Coplanarity: det[a1 - a0, b0 - a0, b1 - a0](t) is cubic in t.
  const Vec3d p1 = a1 - a0, p2 = b0 - a0, p3 = b1 - a0;
  const Vec3d q1 = da1 - da0, q2 = db0 - da0, q3 = db1 - da0;
  const std::array<double, 4> c = {
      p1.dot(p2.cross(p3)),
      q1.dot(p2.cross(p3)) + p1.dot(q2.cross(p3)) + p1.dot(p2.cross(q3)),
      q1.dot(q2.cross(p3)) + q1.dot(p2.cross(q3)) + p1.dot(q2.cross(q3)),
      q1.dot(q2.cross(q3))};
  const double scale = std::max({p1.norm(), p2.norm(), p3.norm(),
                                 (p1 + q1).norm(), (p2 + q2).norm(), (p3 + q3).norm()});
  const double tol = 1e-9 * scale;
  auto touching = [&](double t) {
    return segment_segment_distance(a0 + t * da0, a1 + t * da1, b0 + t * db0,
                                    b1 + t * db1) < tol;
  };
  const double cubic_scale = scale * scale * scale;
  if (std::abs(c[0]) + std::abs(c[1]) + std::abs(c[2]) + std::abs(c[3]) <
      1e-14 * cubic_scale) {
    for (int k = 0; k <= 64; ++k) {
      if (touching(k / 64.0)) return true;
    }
    return false;
  }
  for (double t : cubic_roots_unit(c)) {
    if (touching(t)) return true;
  }
  return false;
}

}  // namespace

int swept_crossing_count(const CodimMesh& mesh, const Positions& x0,
                         const Positions& x1) {
  if (mesh.kind() != MeshKind::Rod) return 0;
  const Positions dx = x1 - x0;
  int count = 0;
  for_each_candidate(mesh, x0, &dx, 0.0, [&](const Stencil& s) {
    const auto& v = s.vertices;
    if (segments_cross_during(x0.col(v[0]), x0.col(v[1]), x0.col(v[2]),
                              x0.col(v[3]), dx.col(v[0]), dx.col(v[1]),
                              dx.col(v[2]), dx.col(v[3]))) {
      ++count;
    }
  });
  return count;
}

}  // namespace codim
