#include "codim/proximity.hpp"

#include <Eigen/Dense>

#include <sstream>

namespace codim {

std::string to_string(PairKind kind) {
  switch (kind) {
    case PairKind::PointPoint:
      return "PP";
    case PairKind::PointEdge:
      return "PE";
    case PairKind::EdgeEdge:
      return "EE";
    case PairKind::PointTriangle:
      return "PT";
  }
  return "?";
}

std::string describe(PairKind stencil, const Subcase& subcase) {
  if (subcase.interior_of(stencil)) {
    return stencil == PairKind::EdgeEdge ? "interior-interior" : "interior";
  }
  std::ostringstream out;
  out << to_string(subcase.kind) << "(";
  const int n = vertex_count(subcase.kind);
  for (int i = 0; i < n; ++i) out << (i ? "," : "") << subcase.local[i];
  out << ")";
  return out.str();
}

namespace {

constexpr int kMaxParams = 2;

using WeightVector = Eigen::Matrix<double, 4, 1>;

// Affine weights of the active subcase and their parameter derivatives.
struct SubcaseWeights {
  WeightVector w = WeightVector::Zero();
  std::array<WeightVector, kMaxParams> dw = {WeightVector::Zero(),
                                            WeightVector::Zero()};
  int params = 0;
};

SubcaseWeights weights_of(const Closest<double>& c) {
  SubcaseWeights sw;
  const auto& l = c.subcase.local;
  switch (c.subcase.kind) {
    case PairKind::PointPoint:
      sw.w[l[0]] = 1.0;
      sw.w[l[1]] = -1.0;
      break;
    case PairKind::PointEdge: {
      const double t = c.params[0];
      sw.w[l[0]] = 1.0;
      sw.w[l[1]] = -(1.0 - t);
      sw.w[l[2]] = -t;
      sw.dw[0][l[1]] = 1.0;
      sw.dw[0][l[2]] = -1.0;
      sw.params = 1;
      break;
    }
    case PairKind::EdgeEdge: {
      const double s = c.params[0], t = c.params[1];
      sw.w << 1.0 - s, s, -(1.0 - t), -t;
      sw.dw[0] << -1.0, 1.0, 0.0, 0.0;
      sw.dw[1] << 0.0, 0.0, 1.0, -1.0;
      sw.params = 2;
      break;
    }
    case PairKind::PointTriangle: {
      const double beta = c.params[0], gamma = c.params[1];
      sw.w << 1.0, -(1.0 - beta - gamma), -beta, -gamma;
      sw.dw[0] << 0.0, 1.0, -1.0, 0.0;
      sw.dw[1] << 0.0, 1.0, 0.0, -1.0;
      sw.params = 2;
      break;
    }
  }
  return sw;
}

void check_degenerate(PairKind kind, const StencilPoints<double>& x) {
  auto zero_edge = [&](int a, int b) {
    return (x.col(a) - x.col(b)).squaredNorm() == 0.0;
  };
  switch (kind) {
    case PairKind::PointPoint:
      return;
    case PairKind::PointEdge:
      if (zero_edge(1, 2)) {
        throw DegenerateError("PointEdge stencil has a zero-length edge");
      }
      return;
    case PairKind::EdgeEdge:
      if (zero_edge(0, 1) || zero_edge(2, 3)) {
        throw DegenerateError("EdgeEdge stencil has a zero-length edge");
      }
      return;
    case PairKind::PointTriangle: {
      const Vec3d n = (x.col(2) - x.col(1)).cross(x.col(3) - x.col(1));
      if (n.squaredNorm() == 0.0) {
        throw DegenerateError("PointTriangle stencil has a zero-area triangle");
      }
      return;
    }
  }
}

// Modified Gram-Schmidt, dropping numerically dependent columns.
StencilBasis orthonormalize(const StencilMatrix& columns) {
  StencilBasis q(columns.rows(), 0);
  for (int c = 0; c < columns.cols(); ++c) {
    StencilVector v = columns.col(c);
    const double scale = v.norm();
    if (scale == 0.0) continue;
    for (int k = 0; k < q.cols(); ++k) v -= q.col(k).dot(v) * q.col(k);
    for (int k = 0; k < q.cols(); ++k) v -= q.col(k).dot(v) * q.col(k);
    const double n = v.norm();
    if (n <= 1e-10 * scale) continue;
    q.conservativeResize(Eigen::NoChange, q.cols() + 1);
    q.col(q.cols() - 1) = v / n;
  }
  return q;
}

}  // namespace

DistanceResult pair_distance(PairKind kind, const StencilPoints<double>& x) {
  check_degenerate(kind, x);
  const int n = vertex_count(kind);
  const int dofs = 3 * n;
  const Closest<double> c = closest<double>(kind, x);
  const SubcaseWeights sw = weights_of(c);

  const Vec3d r = x.leftCols(n) * sw.w.head(n);

  DistanceResult out;
  out.subcase = c.subcase;
  out.squared = r.squaredNorm();
  out.value = std::sqrt(out.squared);

  // Squared distance derivatives at fixed parameters.
  StencilVector grad_sq(dofs);
  StencilMatrix hess_sq = StencilMatrix::Zero(dofs, dofs);
  for (int i = 0; i < n; ++i) {
    grad_sq.segment<3>(3 * i) = 2.0 * sw.w[i] * r;
    for (int j = 0; j < n; ++j) {
      hess_sq.block<3, 3>(3 * i, 3 * j).diagonal().setConstant(
          2.0 * sw.w[i] * sw.w[j]);
    }
  }

  // Eliminate the free parameters: H = D_xx - D_xu D_uu^-1 D_ux.
  const int m = sw.params;
  if (m > 0) {
    Eigen::Matrix<double, 3, kMaxParams> cvec;
    for (int k = 0; k < m; ++k) cvec.col(k) = x.leftCols(n) * sw.dw[k].head(n);
    using Small = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0,
                                kMaxParams, kMaxParams>;
    using Tall = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0,
                               kMaxStencilDofs, kMaxParams>;
    const Small duu = 2.0 * cvec.leftCols(m).transpose() * cvec.leftCols(m);
    Tall dxu(dofs, m);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < m; ++k) {
        dxu.block<3, 1>(3 * i, k) =
            2.0 * (sw.w[i] * cvec.col(k) + sw.dw[k][i] * r);
      }
    }
    hess_sq -= dxu * duu.ldlt().solve(dxu.transpose());
  }

  const double d = out.value;
  out.gradient = grad_sq / (2.0 * d);
  out.hessian = hess_sq / (2.0 * d) -
                grad_sq * grad_sq.transpose() / (4.0 * d * d * d);

  StencilMatrix span(dofs, 3 + m);
  span.setZero();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) span(3 * i + j, j) = sw.w[i];
  }
  const Vec3d rhat = d > 0.0 ? Vec3d(r / d) : Vec3d::Zero();
  for (int k = 0; k < m; ++k) {
    for (int i = 0; i < n; ++i) span.block<3, 1>(3 * i, 3 + k) = sw.dw[k][i] * rhat;
  }
  out.basis = orthonormalize(span);
  return out;
}

Eigen::Vector4d closest_point_weights(PairKind kind,
                                      const StencilPoints<double>& x) {
  return weights_of(closest<double>(kind, x)).w;
}

double pair_distance_value(PairKind kind, const StencilPoints<double>& x) {
  return std::sqrt(closest<double>(kind, x).squared);
}

double segment_segment_distance(const Vec3d& a0, const Vec3d& a1,
                                const Vec3d& b0, const Vec3d& b1) {
  const bool a_point = (a1 - a0).squaredNorm() == 0.0;
  const bool b_point = (b1 - b0).squaredNorm() == 0.0;
  StencilPoints<double> x;
  if (a_point && b_point) return (a0 - b0).norm();
  if (a_point) {
    x << a0, b0, b1, Vec3d::Zero();
    return pair_distance_value(PairKind::PointEdge, x);
  }
  if (b_point) {
    x << b0, a0, a1, Vec3d::Zero();
    return pair_distance_value(PairKind::PointEdge, x);
  }
  x << a0, a1, b0, b1;
  return pair_distance_value(PairKind::EdgeEdge, x);
}

bool segments_intersect(const Vec3d& a0, const Vec3d& a1, const Vec3d& b0,
                        const Vec3d& b1, double tol) {
  return segment_segment_distance(a0, a1, b0, b1) < tol;
}

namespace {

double orient3d(const Vec3d& a, const Vec3d& b, const Vec3d& c,
                const Vec3d& d) {
  return (b - a).cross(c - a).dot(d - a);
}

double orient2d(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                const Eigen::Vector2d& c) {
  const Eigen::Vector2d u = b - a, v = c - a;
  return u.x() * v.y() - u.y() * v.x();
}

bool point_in_triangle_2d(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                          const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
  const double d0 = orient2d(a, b, p), d1 = orient2d(b, c, p),
               d2 = orient2d(c, a, p);
  const bool has_neg = d0 < 0 || d1 < 0 || d2 < 0;
  const bool has_pos = d0 > 0 || d1 > 0 || d2 > 0;
  return !(has_neg && has_pos);
}

bool segments_cross_2d(const Eigen::Vector2d& p0, const Eigen::Vector2d& p1,
                       const Eigen::Vector2d& q0, const Eigen::Vector2d& q1) {
  const double o1 = orient2d(p0, p1, q0), o2 = orient2d(p0, p1, q1);
  const double o3 = orient2d(q0, q1, p0), o4 = orient2d(q0, q1, p1);
  return ((o1 > 0 && o2 < 0) || (o1 < 0 && o2 > 0)) &&
         ((o3 > 0 && o4 < 0) || (o3 < 0 && o4 > 0));
}

}  // namespace

bool segment_triangle_intersect(const Vec3d& s0, const Vec3d& s1,
                                const Vec3d& t0, const Vec3d& t1,
                                const Vec3d& t2) {
  const Vec3d normal = (t1 - t0).cross(t2 - t0);
  if (normal.squaredNorm() == 0.0) {
    throw DegenerateError("segment_triangle_intersect: zero-area triangle");
  }
  const double o0 = orient3d(t0, t1, t2, s0);
  const double o1 = orient3d(t0, t1, t2, s1);
  if ((o0 > 0 && o1 > 0) || (o0 < 0 && o1 < 0)) return false;
  if (o0 == 0.0 && o1 == 0.0) {
    // Coplanar: project onto the dominant plane of the triangle.
    int drop = 0;
    normal.cwiseAbs().maxCoeff(&drop);
    auto proj = [drop](const Vec3d& p) {
      const int a = (drop + 1) % 3, b = (drop + 2) % 3;
      return Eigen::Vector2d(p[a], p[b]);
    };
    const Eigen::Vector2d p0 = proj(s0), p1 = proj(s1), a = proj(t0),
                          b = proj(t1), c = proj(t2);
    const Eigen::Vector2d mid = 0.5 * (p0 + p1);
    if (point_in_triangle_2d(mid, a, b, c)) return true;
    if (point_in_triangle_2d(p0, a, b, c) && p0 != p1) {
      // An endpoint inside: the open segment enters the triangle unless it
      // only touches the boundary.
      const Eigen::Vector2d near = p0 + 1e-9 * (p1 - p0);
      if (point_in_triangle_2d(near, a, b, c)) return true;
    }
    if (point_in_triangle_2d(p1, a, b, c) && p0 != p1) {
      const Eigen::Vector2d near = p1 + 1e-9 * (p0 - p1);
      if (point_in_triangle_2d(near, a, b, c)) return true;
    }
    return segments_cross_2d(p0, p1, a, b) || segments_cross_2d(p0, p1, b, c) ||
           segments_cross_2d(p0, p1, c, a);
  }
  // Exactly one endpoint on the plane: the open segment never reaches it.
  if (o0 == 0.0 || o1 == 0.0) return false;
  const double e0 = orient3d(s0, s1, t0, t1);
  const double e1 = orient3d(s0, s1, t1, t2);
  const double e2 = orient3d(s0, s1, t2, t0);
  const bool has_neg = e0 < 0 || e1 < 0 || e2 < 0;
  const bool has_pos = e0 > 0 || e1 > 0 || e2 > 0;
  return !(has_neg && has_pos);
}

}  // namespace codim
