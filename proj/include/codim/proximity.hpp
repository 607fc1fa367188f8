#pragma once

// Primitive-pair distances with exact derivatives.
//
// A stencil is up to four points stored column-wise in a 3x4 matrix:
//   PointPoint    : [p, q]
//   PointEdge     : [p, e0, e1]
//   EdgeEdge      : [a0, a1, b0, b1]
//   PointTriangle : [p, t0, t1, t2]
// Unused trailing columns are ignored.
//
// The minimum is realized on a subcase of the stencil (an interior critical
// point or one of the boundary pieces). Every subcase is written as
//   D(x, u) = |sum_i w_i(u) x_i|^2,   w affine in the free parameters u,
// so the squared distance and its derivatives follow from the same formula.

#include "codim/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

namespace codim {

enum class PairKind { PointPoint, PointEdge, EdgeEdge, PointTriangle };

constexpr int vertex_count(PairKind kind) {
  switch (kind) {
    case PairKind::PointPoint:
      return 2;
    case PairKind::PointEdge:
      return 3;
    default:
      return 4;
  }
}

std::string to_string(PairKind kind);

template <typename Scalar>
using StencilPoints = Eigen::Matrix<Scalar, 3, 4>;

// The piece of the stencil on which the minimum is attained, given as an
// effective pair kind acting on local stencil vertices.
struct Subcase {
  PairKind kind = PairKind::PointPoint;
  std::array<int, 4> local = {0, 1, 2, 3};

  // True when the effective kind equals the stencil kind (no clamping).
  bool interior_of(PairKind stencil) const { return kind == stencil; }
  friend bool operator==(const Subcase&, const Subcase&) = default;
};

std::string describe(PairKind stencil, const Subcase& subcase);

template <typename Scalar>
struct Closest {
  Scalar squared = Scalar(0);
  Subcase subcase;
  // Free parameters of the subcase: t for PE, (s, t) for EE, (beta, gamma) for
  // PT. Unused for PP.
  std::array<Scalar, 2> params = {Scalar(0), Scalar(0)};
};

namespace detail {

template <typename Scalar>
Closest<Scalar> closest_pp(const Vec3<Scalar>& p, const Vec3<Scalar>& q,
                           int ip, int iq) {
  Closest<Scalar> c;
  c.squared = (p - q).squaredNorm();
  c.subcase.kind = PairKind::PointPoint;
  c.subcase.local = {ip, iq, -1, -1};
  return c;
}

template <typename Scalar>
Closest<Scalar> closest_pe(const Vec3<Scalar>& p, const Vec3<Scalar>& e0,
                           const Vec3<Scalar>& e1, int ip, int ie0, int ie1) {
  const Vec3<Scalar> e = e1 - e0;
  const Scalar len2 = e.squaredNorm();
  const Scalar t = (p - e0).dot(e) / len2;
  if (t <= Scalar(0)) return closest_pp(p, e0, ip, ie0);
  if (t >= Scalar(1)) return closest_pp(p, e1, ip, ie1);
  Closest<Scalar> c;
  c.squared = (p - e0 - t * e).squaredNorm();
  c.subcase.kind = PairKind::PointEdge;
  c.subcase.local = {ip, ie0, ie1, -1};
  c.params = {t, Scalar(0)};
  return c;
}

template <typename Scalar>
void keep_min(Closest<Scalar>& best, const Closest<Scalar>& c) {
  if (c.squared < best.squared) best = c;
}

}  // namespace detail

template <typename Scalar>
Closest<Scalar> closest(PairKind kind, const StencilPoints<Scalar>& x) {
  using std::abs;
  const Vec3<Scalar> x0 = x.col(0), x1 = x.col(1);
  switch (kind) {
    case PairKind::PointPoint:
      return detail::closest_pp<Scalar>(x0, x1, 0, 1);
    case PairKind::PointEdge:
      return detail::closest_pe<Scalar>(x0, x1, x.col(2), 0, 1, 2);
    case PairKind::EdgeEdge: {
      const Vec3<Scalar> x2 = x.col(2), x3 = x.col(3);
      // Interior critical point of |a0 + s da - b0 - t db|^2. The objective is
      // strictly convex for non-parallel edges, so an interior stationary point
      // is the global minimum.
      const Vec3<Scalar> da = x1 - x0, db = x3 - x2, r = x0 - x2;
      const Scalar a = da.squaredNorm(), b = da.dot(db), e = db.squaredNorm();
      const Scalar c = da.dot(r), f = db.dot(r);
      const Scalar denom = a * e - b * b;
      // Near-parallel edges fall back to the boundary pieces.
      if (denom > Scalar(1e-12) * a * e) {
        const Scalar s = (b * f - c * e) / denom;
        const Scalar t = (a * f - b * c) / denom;
        if (s > Scalar(0) && s < Scalar(1) && t > Scalar(0) && t < Scalar(1)) {
          Closest<Scalar> in;
          in.squared = (r + s * da - t * db).squaredNorm();
          in.subcase.kind = PairKind::EdgeEdge;
          in.subcase.local = {0, 1, 2, 3};
          in.params = {s, t};
          return in;
        }
      }
      Closest<Scalar> best = detail::closest_pe<Scalar>(x0, x2, x3, 0, 2, 3);
      detail::keep_min(best, detail::closest_pe<Scalar>(x1, x2, x3, 1, 2, 3));
      detail::keep_min(best, detail::closest_pe<Scalar>(x2, x0, x1, 2, 0, 1));
      detail::keep_min(best, detail::closest_pe<Scalar>(x3, x0, x1, 3, 0, 1));
      return best;
    }
    case PairKind::PointTriangle: {
      const Vec3<Scalar> x2 = x.col(2), x3 = x.col(3);
      const Vec3<Scalar> e1 = x2 - x1, e2 = x3 - x1, r = x0 - x1;
      const Scalar a = e1.squaredNorm(), b = e1.dot(e2), e = e2.squaredNorm();
      const Scalar c = e1.dot(r), f = e2.dot(r);
      const Scalar denom = a * e - b * b;
      const Scalar beta = (c * e - b * f) / denom;
      const Scalar gamma = (a * f - b * c) / denom;
      if (beta >= Scalar(0) && gamma >= Scalar(0) &&
          beta + gamma <= Scalar(1)) {
        Closest<Scalar> in;
        in.squared = (r - beta * e1 - gamma * e2).squaredNorm();
        in.subcase.kind = PairKind::PointTriangle;
        in.subcase.local = {0, 1, 2, 3};
        in.params = {beta, gamma};
        return in;
      }
      Closest<Scalar> best = detail::closest_pe<Scalar>(x0, x1, x2, 0, 1, 2);
      detail::keep_min(best, detail::closest_pe<Scalar>(x0, x2, x3, 0, 2, 3));
      detail::keep_min(best, detail::closest_pe<Scalar>(x0, x3, x1, 0, 3, 1));
      return best;
    }
  }
  return {};
}

template <typename Scalar>
Scalar distance(PairKind kind, const StencilPoints<Scalar>& x) {
  using std::sqrt;
  return sqrt(closest<Scalar>(kind, x).squared);
}

// Orthonormal basis of a subspace containing the distance gradient and the
// range of its Hessian (at most 5 columns).
using StencilBasis =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxStencilDofs, 5>;

struct DistanceResult {
  double value = 0.0;
  double squared = 0.0;
  Subcase subcase;
  StencilVector gradient;  // d(value)/dx, size 3 * vertex_count
  StencilMatrix hessian;   // d2(value)/dx2
  StencilBasis basis;
};

// Distance with exact derivatives of the active subcase. Throws
// DegenerateError for zero-length edges or zero-area triangles.
DistanceResult pair_distance(PairKind kind, const StencilPoints<double>& x);

// Value only, with the same classification as pair_distance.
double pair_distance_value(PairKind kind, const StencilPoints<double>& x);

// Weights w with closest-point difference sum_i w_i x_i on the active subcase.
Eigen::Vector4d closest_point_weights(PairKind kind,
                                      const StencilPoints<double>& x);

// Minimum distance between two segments is below tol.
bool segments_intersect(const Vec3d& a0, const Vec3d& a1, const Vec3d& b0,
                        const Vec3d& b1, double tol);

// The open segment (s0, s1) crosses the closed triangle (t0, t1, t2).
bool segment_triangle_intersect(const Vec3d& s0, const Vec3d& s1,
                                const Vec3d& t0, const Vec3d& t1,
                                const Vec3d& t2);

// Minimum distance between two segments, independent of PairKind dispatch.
double segment_segment_distance(const Vec3d& a0, const Vec3d& a1,
                                const Vec3d& b0, const Vec3d& b1);

}  // namespace codim
