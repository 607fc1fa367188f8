#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SparseCore>

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace codim {

template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
using Vec3d = Vec3<double>;

// Positions are stored column-wise: one column per vertex.
using Positions = Eigen::Matrix<double, 3, Eigen::Dynamic>;

// Stencil-local vectors and matrices never exceed 4 vertices (12 coordinates).
constexpr int kMaxStencilDofs = 12;
using StencilVector =
    Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxStencilDofs, 1>;
using StencilMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0,
                                    kMaxStencilDofs, kMaxStencilDofs>;

using Triplet = Eigen::Triplet<double>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a barrier would be evaluated at or below its core offset.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

class DegenerateError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Energy value with gradient and Hessian over the full coordinate vector
// (3 * vertex count). The Hessian is kept as unassembled triplets.
struct EnergyEval {
  double energy = 0.0;
  Eigen::VectorXd gradient;
  std::vector<Triplet> hessian;
};

// Receives stencil-local Hessian blocks. vertices[k] owns rows and columns
// 3k..3k+2 of local.
class HessianSink {
 public:
  virtual ~HessianSink() = default;
  virtual void add(const int* vertices, int count, const StencilMatrix& local) = 0;
};

// Appends every entry of each block as a triplet.
class TripletSink : public HessianSink {
 public:
  explicit TripletSink(std::vector<Triplet>& out) : out_(out) {}
  void add(const int* vertices, int count, const StencilMatrix& local) override {
    for (int i = 0; i < count; ++i) {
      for (int j = 0; j < count; ++j) {
        for (int a = 0; a < 3; ++a) {
          for (int b = 0; b < 3; ++b) {
            const double v = local(3 * i + a, 3 * j + b);
            if (v != 0.0) out_.emplace_back(3 * vertices[i] + a, 3 * vertices[j] + b, v);
          }
        }
      }
    }
  }

 private:
  std::vector<Triplet>& out_;
};

// Clamps negative eigenvalues of a symmetric matrix to zero.
void project_psd(StencilMatrix& m);

// Worker count from CODIM_THREADS (default 1).
int thread_count();

// Runs body(i) for i in [0, n) across thread_count() workers.
void parallel_for(int n, const std::function<void(int)>& body);

}  // namespace codim
