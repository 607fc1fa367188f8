#include "doctest.h"
#include "helpers.hpp"

#include "codim/proximity.hpp"

using namespace codim;
using namespace codim::test;

namespace {

StencilPoints<double> make(std::initializer_list<Vec3d> pts) {
  StencilPoints<double> x = StencilPoints<double>::Zero();
  int i = 0;
  for (const auto& p : pts) x.col(i++) = p;
  return x;
}

// Clamped coordinate descent on the convex parametric objective.
double brute_ee(const StencilPoints<double>& x) {
  const Vec3d a0 = x.col(0), da = x.col(1) - x.col(0);
  const Vec3d b0 = x.col(2), db = x.col(3) - x.col(2);
  double best = std::numeric_limits<double>::infinity();
  for (int g = 0; g <= 10; ++g) {
    double s = g / 10.0, t = 1.0 - g / 10.0;
    for (int it = 0; it < 2000; ++it) {
      s = std::clamp((b0 + t * db - a0).dot(da) / da.squaredNorm(), 0.0, 1.0);
      t = std::clamp((a0 + s * da - b0).dot(db) / db.squaredNorm(), 0.0, 1.0);
    }
    best = std::min(best, (a0 + s * da - b0 - t * db).norm());
  }
  return best;
}

// Dense barycentric sampling refined by a shrinking pattern search.
double brute_pt(const StencilPoints<double>& x) {
  const Vec3d p = x.col(0), t0 = x.col(1), e1 = x.col(2) - t0, e2 = x.col(3) - t0;
  auto f = [&](double b, double c) { return (t0 + b * e1 + c * e2 - p).norm(); };
  double bb = 0, bc = 0, best = f(0, 0);
  const int n = 60;
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; i + j <= n; ++j) {
      const double v = f(double(i) / n, double(j) / n);
      if (v < best) best = v, bb = double(i) / n, bc = double(j) / n;
    }
  }
  for (double step = 1.0 / n; step > 1e-14; step *= 0.5) {
    bool moved = true;
    while (moved) {
      moved = false;
      for (auto [db, dc] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, -1}, {-1, 1}}) {
        const double b = bb + db * step, c = bc + dc * step;
        if (b < 0 || c < 0 || b + c > 1) continue;
        const double v = f(b, c);
        if (v < best) best = v, bb = b, bc = c, moved = true;
      }
    }
  }
  return best;
}

// Free parameters are at least margin from their bounds.
bool away_from_boundary(PairKind kind, const StencilPoints<double>& x,
                        double margin) {
  const Closest<double> c = closest<double>(kind, x);
  if (!c.subcase.interior_of(kind)) return false;
  const double u = c.params[0], v = c.params[1];
  switch (kind) {
    case PairKind::PointEdge:
      return u > margin && u < 1 - margin;
    case PairKind::EdgeEdge:
      return std::min({u, 1 - u, v, 1 - v}) > margin;
    case PairKind::PointTriangle:
      return std::min({u, v, 1 - u - v}) > margin;
    default:
      return true;
  }
}

void check_derivatives(PairKind kind, const StencilPoints<double>& x) {
  const int n = vertex_count(kind);
  const DistanceResult r = pair_distance(kind, x);
  const double h = 1e-6;
  StencilVector fd_grad(3 * n);
  StencilMatrix fd_hess(3 * n, 3 * n);
  for (int k = 0; k < 3 * n; ++k) {
    StencilPoints<double> xp = x, xm = x;
    xp(k % 3, k / 3) += h;
    xm(k % 3, k / 3) -= h;
    fd_grad[k] = (pair_distance_value(kind, xp) - pair_distance_value(kind, xm)) / (2 * h);
    fd_hess.col(k) = (pair_distance(kind, xp).gradient - pair_distance(kind, xm).gradient) / (2 * h);
  }
  CHECK(relative_error(r.gradient, fd_grad) < 1e-4);
  CHECK(relative_error(r.hessian, fd_hess) < 1e-4);
  // The basis spans the gradient and the Hessian range.
  const StencilMatrix proj = r.basis * r.basis.transpose();
  CHECK((proj * r.gradient - r.gradient).norm() < 1e-9 * r.gradient.norm());
  CHECK((proj * r.hessian - r.hessian).norm() < 1e-9 * std::max(1.0, r.hessian.norm()));
}

}  // namespace

TEST_CASE("distance examples") {
  const auto pp = pair_distance(PairKind::PointPoint, make({{0, 0, 0}, {3, 4, 0}}));
  CHECK(pp.value == doctest::Approx(5.0));

  const auto pe = pair_distance(PairKind::PointEdge,
                                make({{0, 1, 0}, {-1, 0, 0}, {1, 0, 0}}));
  CHECK(pe.value == doctest::Approx(1.0));
  CHECK(describe(PairKind::PointEdge, pe.subcase) == "interior");

  const auto ee = pair_distance(
      PairKind::EdgeEdge, make({{0, 0, 0}, {1, 0, 0}, {0.5, 1, -0.5}, {0.5, 1, 0.5}}));
  CHECK(ee.value == doctest::Approx(1.0));
  CHECK(describe(PairKind::EdgeEdge, ee.subcase) == "interior-interior");
  CHECK(ee.gradient.size() == 12);
  CHECK(ee.hessian.rows() == 12);
}

TEST_CASE("distances match minimization oracle values") {
  struct Case {
    PairKind kind;
    StencilPoints<double> x;
    double expected;
  };
  const std::vector<Case> cases = {
      {PairKind::EdgeEdge, make({{0, 0, 0}, {1, 0, 0}, {1.5, 0.5, 0.2}, {2.5, 1.0, -0.3}}), 0.734846922835},
      {PairKind::EdgeEdge, make({{0.1, -0.3, 0.2}, {1.2, 0.4, -0.1}, {0.3, 0.9, 0.8}, {-0.4, 0.2, 1.5}}), 1.186328075060},
      {PairKind::PointTriangle, make({{0.2, 0.3, 0.7}, {0, 0, 0}, {1, 0, 0}, {0, 1, 0}}), 0.7},
      {PairKind::PointTriangle, make({{1.0, 1.0, 0.5}, {0, 0, 0}, {1, 0, 0}, {0, 1, 0}}), 0.866025403784},
      {PairKind::PointTriangle, make({{-0.5, -0.25, 0.3}, {0, 0, 0}, {1, 0, 0}, {0, 1, 0}}), 0.634428877022},
      {PairKind::PointTriangle, make({{0.9, 0.7, -0.4}, {0.1, 0.2, 0.3}, {1.1, -0.2, 0.5}, {0.4, 1.3, -0.2}}), 0.518213172006},
  };
  for (const auto& c : cases) {
    CHECK(pair_distance(c.kind, c.x).value == doctest::Approx(c.expected).epsilon(1e-9));
  }
}

TEST_CASE("subcase labels") {
  const auto tri = make({{0.2, 0.3, 0.7}, {0, 0, 0}, {1, 0, 0}, {0, 1, 0}});
  CHECK(describe(PairKind::PointTriangle, pair_distance(PairKind::PointTriangle, tri).subcase) == "interior");
  const auto corner = make({{-0.5, -0.25, 0.3}, {0, 0, 0}, {1, 0, 0}, {0, 1, 0}});
  const auto r = pair_distance(PairKind::PointTriangle, corner);
  CHECK(r.subcase.kind == PairKind::PointPoint);
  CHECK(describe(PairKind::PointTriangle, r.subcase) == "PP(0,1)");
  const auto end = pair_distance(PairKind::PointEdge, make({{2, 1, 0}, {-1, 0, 0}, {1, 0, 0}}));
  CHECK(end.subcase.kind == PairKind::PointPoint);
  CHECK(end.value == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("random distances agree with brute force") {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const auto x = random_stencil(rng);
    CHECK(pair_distance_value(PairKind::EdgeEdge, x) == doctest::Approx(brute_ee(x)).epsilon(1e-7));
    CHECK(pair_distance_value(PairKind::PointTriangle, x) == doctest::Approx(brute_pt(x)).epsilon(1e-7));
  }
}

TEST_CASE("derivatives match finite differences") {
  Rng rng(11);
  for (PairKind kind : {PairKind::PointPoint, PairKind::PointEdge,
                        PairKind::EdgeEdge, PairKind::PointTriangle}) {
    int tested = 0;
    while (tested < 1000) {
      const auto x = random_stencil(rng);
      if (!away_from_boundary(kind, x, 1e-3)) continue;
      if (pair_distance_value(kind, x) < 1e-2) continue;
      check_derivatives(kind, x);
      ++tested;
    }
  }
}

TEST_CASE("clamped subcases have consistent derivatives") {
  Rng rng(12);
  int tested = 0;
  while (tested < 300) {
    const auto x = random_stencil(rng);
    for (PairKind kind : {PairKind::EdgeEdge, PairKind::PointTriangle}) {
      const Closest<double> c = closest<double>(kind, x);
      if (c.subcase.interior_of(kind)) continue;
      // Stay clear of switches between pieces under the FD perturbation.
      bool stable = true;
      for (int k = 0; k < 12 && stable; ++k) {
        StencilPoints<double> xp = x;
        xp(k % 3, k / 3) += 1e-5;
        stable = closest<double>(kind, xp).subcase == c.subcase;
        xp(k % 3, k / 3) -= 2e-5;
        stable = stable && closest<double>(kind, xp).subcase == c.subcase;
      }
      if (!stable || c.params[0] < 1e-3 || c.params[0] > 1 - 1e-3) continue;
      check_derivatives(kind, x);
      ++tested;
    }
  }
}

TEST_CASE("rigid invariance") {
  Rng rng(13);
  for (int i = 0; i < 1000; ++i) {
    const auto x = random_stencil(rng);
    const Eigen::Matrix3d rot = random_rotation(rng);
    const Vec3d shift = random_vec(rng, 5.0);
    StencilPoints<double> y = rot * x;
    y.colwise() += shift;
    for (PairKind kind : {PairKind::PointPoint, PairKind::PointEdge,
                          PairKind::EdgeEdge, PairKind::PointTriangle}) {
      CHECK(relative_error(pair_distance_value(kind, x), pair_distance_value(kind, y)) < 1e-12);
    }
  }
}

TEST_CASE("swapping primitives") {
  Rng rng(14);
  for (int i = 0; i < 1000; ++i) {
    const auto x = random_stencil(rng);
    StencilPoints<double> swapped;
    swapped << x.col(2), x.col(3), x.col(0), x.col(1);
    const auto a = pair_distance(PairKind::EdgeEdge, x);
    const auto b = pair_distance(PairKind::EdgeEdge, swapped);
    CHECK(relative_error(a.value, b.value) < 1e-12);
    StencilVector permuted(12);
    permuted << b.gradient.segment<6>(6), b.gradient.segment<6>(0);
    CHECK(relative_error(a.gradient, permuted) < 1e-9);

    StencilPoints<double> pp = x, qp;
    qp << x.col(1), x.col(0), x.col(2), x.col(3);
    const auto c = pair_distance(PairKind::PointPoint, pp);
    const auto d = pair_distance(PairKind::PointPoint, qp);
    CHECK(c.value == d.value);
    CHECK(relative_error(Vec3d(c.gradient.head<3>()), Vec3d(d.gradient.segment<3>(3))) < 1e-12);
  }
}

TEST_CASE("degenerate primitives are rejected") {
  CHECK_THROWS_AS(pair_distance(PairKind::PointEdge, make({{0, 1, 0}, {1, 0, 0}, {1, 0, 0}})), DegenerateError);
  CHECK_THROWS_AS(pair_distance(PairKind::PointTriangle,
                                make({{0, 0, 1}, {0, 0, 0}, {1, 0, 0}, {2, 0, 0}})),
                  DegenerateError);
  CHECK_THROWS_AS(segment_triangle_intersect({0, 0, 1}, {0, 0, -1}, {0, 0, 0}, {1, 0, 0}, {2, 0, 0}),
                  DegenerateError);
}

TEST_CASE("segment predicates") {
  CHECK(segments_intersect({-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, 1e-9));
  CHECK_FALSE(segments_intersect({0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}, 1e-9));
  CHECK(segments_intersect({0, 0, 0}, {1, 0, 0}, {1, 0, 0}, {2, 1, 0}, 1e-9));

  const Vec3d t0(0, 0, 0), t1(1, 0, 0), t2(0, 1, 0);
  const Vec3d centroid = (t0 + t1 + t2) / 3.0;
  CHECK(segment_triangle_intersect(centroid + Vec3d(0, 0, 1), centroid - Vec3d(0, 0, 1), t0, t1, t2));
  CHECK_FALSE(segment_triangle_intersect({0.2, 0.2, 0.5}, {0.3, 0.1, 2.0}, t0, t1, t2));
  CHECK_FALSE(segment_triangle_intersect({1, 1, 0}, {2, 0.5, 0}, t0, t1, t2));
}

TEST_CASE("coplanar segments agree with sampling") {
  Rng rng(15);
  const Vec3d t0(0, 0, 0), t1(1, 0, 0), t2(0, 1, 0);
  auto inside = [&](const Vec3d& p) { return p.x() >= 0 && p.y() >= 0 && p.x() + p.y() <= 1; };
  int outside_cases = 0;
  for (int i = 0; i < 500; ++i) {
    const Vec3d s0(uniform(rng, -1, 2), uniform(rng, -1, 2), 0);
    const Vec3d s1(uniform(rng, -1, 2), uniform(rng, -1, 2), 0);
    const int samples = static_cast<int>((s1 - s0).norm() / 1e-4) + 2;
    bool hit = false;
    for (int k = 1; k < samples && !hit; ++k) {
      hit = inside(s0 + (s1 - s0) * (double(k) / samples));
    }
    // Sampling at 1e-4 can miss grazing contacts; only assert on clear misses.
    if (!hit) {
      ++outside_cases;
      const double clearance = std::min({segment_segment_distance(s0, s1, t0, t1),
                                         segment_segment_distance(s0, s1, t1, t2),
                                         segment_segment_distance(s0, s1, t2, t0)});
      if (clearance > 1e-3) CHECK_FALSE(segment_triangle_intersect(s0, s1, t0, t1, t2));
    } else {
      CHECK(segment_triangle_intersect(s0, s1, t0, t1, t2));
    }
  }
  CHECK(outside_cases > 50);
}
