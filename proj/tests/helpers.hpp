#pragma once

#include "codim/proximity.hpp"

#include <Eigen/Dense>

#include <random>

namespace codim::test {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo = -1.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Vec3d random_vec(Rng& rng, double scale = 1.0) {
  return Vec3d(uniform(rng), uniform(rng), uniform(rng)) * scale;
}

inline StencilPoints<double> random_stencil(Rng& rng, double scale = 1.0) {
  StencilPoints<double> x;
  for (int i = 0; i < 4; ++i) x.col(i) = random_vec(rng, scale);
  return x;
}

inline Eigen::Matrix3d random_rotation(Rng& rng) {
  Eigen::Quaterniond q(uniform(rng), uniform(rng), uniform(rng), uniform(rng));
  return q.normalized().toRotationMatrix();
}

inline double relative_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

template <typename A, typename B>
double relative_error(const A& a, const B& b, double floor = 1e-8) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), floor});
}

}  // namespace codim::test
