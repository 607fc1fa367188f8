#pragma once

#include "codim/autodiff.hpp"
#include "codim/mesh.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <variant>
#include <vector>

namespace codim {

struct RodMaterial {
  double youngs_modulus = 1e7;
  double density = 1000.0;
  double radius = 1.5e-4;  // h / 2

  void validate() const;
  double stretch_stiffness() const {
    return youngs_modulus * std::numbers::pi * radius * radius;
  }
  double bending_stiffness() const {
    return youngs_modulus * std::numbers::pi * std::pow(radius, 4) / 4.0;
  }
};

struct ShellMaterial {
  double youngs_modulus = 0.8e6;
  double poisson_ratio = 0.3;
  double density = 500.0;
  double thickness = 1e-3;

  void validate() const;
  // Plane-stress Lame parameters.
  double mu() const { return youngs_modulus / (2.0 * (1.0 + poisson_ratio)); }
  double lambda() const {
    return youngs_modulus * poisson_ratio / (1.0 - poisson_ratio * poisson_ratio);
  }
  double bending_stiffness() const {
    return youngs_modulus * std::pow(thickness, 3) /
           (24.0 * (1.0 - poisson_ratio * poisson_ratio));
  }
};

using Material = std::variant<RodMaterial, ShellMaterial>;

// Local energies, templated so that Dual2 instantiations give exact
// derivatives.

// 0.5 k (|e| / L - 1)^2 L.
template <typename S>
S stretch_energy(const Vec3<S>& x0, const Vec3<S>& x1, double rest_length,
                 double k) {
  using std::sqrt;
  const S strain = sqrt((x1 - x0).squaredNorm()) / rest_length - 1.0;
  return 0.5 * k * rest_length * strain * strain;
}

// Curvature binormal 2 (e1 x e2) / (|e1| |e2| + e1 . e2).
template <typename S>
Vec3<S> curvature_binormal(const Vec3<S>& x0, const Vec3<S>& x1,
                           const Vec3<S>& x2) {
  using std::sqrt;
  const Vec3<S> e1 = x1 - x0, e2 = x2 - x1;
  const S l1 = sqrt(e1.squaredNorm()), l2 = sqrt(e2.squaredNorm());
  const S denom = l1 * l2 + e1.dot(e2);
  if (!(value_of(denom) > 1e-12 * value_of(l1) * value_of(l2))) {
    throw DegenerateError("antiparallel adjacent rod edges");
  }
  return e1.cross(e2) * (S(2.0) / denom);
}

// B |kb|^2 / (2 voronoi_length).
template <typename S>
S bend_energy(const Vec3<S>& x0, const Vec3<S>& x1, const Vec3<S>& x2,
              double voronoi_length, double b) {
  return b * curvature_binormal(x0, x1, x2).squaredNorm() /
         (2.0 * voronoi_length);
}

// Thickness-scaled compressible Neo-Hookean membrane on one triangle.
// dm_inv maps reference tangent coordinates of (x1 - x0, x2 - x0).
template <typename S>
S membrane_energy(const Vec3<S>& x0, const Vec3<S>& x1, const Vec3<S>& x2,
                  const Eigen::Matrix2d& dm_inv, double area, double thickness,
                  double mu, double lambda) {
  using std::log;
  Eigen::Matrix<S, 3, 2> ds;
  ds.col(0) = x1 - x0;
  ds.col(1) = x2 - x0;
  const Eigen::Matrix<S, 3, 2> f = ds * dm_inv.cast<S>();
  const S c00 = f.col(0).squaredNorm(), c11 = f.col(1).squaredNorm();
  const S c01 = f.col(0).dot(f.col(1));
  const S det = c00 * c11 - c01 * c01;
  if (!(value_of(det) > 0.0)) {
    throw DegenerateError("degenerate or inverted membrane element");
  }
  const S log_j = 0.5 * log(det);
  const S psi = 0.5 * mu * (c00 + c11 - 2.0 - 2.0 * log_j) +
                0.5 * lambda * log_j * log_j;
  return thickness * area * psi;
}

// Signed bending angle across edge (x0, x1) with opposite vertices x2, x3;
// zero for a flat hinge. The interior dihedral angle is pi minus this.
template <typename S>
S hinge_angle(const Vec3<S>& x0, const Vec3<S>& x1, const Vec3<S>& x2,
              const Vec3<S>& x3) {
  using std::atan2;
  using std::sqrt;
  const Vec3<S> e = x1 - x0;
  const Vec3<S> n1 = e.cross(x2 - x0);
  const Vec3<S> n2 = (x3 - x0).cross(e);
  const S sin_part = n1.cross(n2).dot(e) / sqrt(e.squaredNorm());
  const S cos_part = n1.dot(n2);
  return atan2(sin_part, cos_part);
}

template <typename S>
S hinge_energy(const Vec3<S>& x0, const Vec3<S>& x1, const Vec3<S>& x2,
               const Vec3<S>& x3, double rest_angle, double weight) {
  const S d = hinge_angle(x0, x1, x2, x3) - rest_angle;
  return weight * d * d;
}

// Precomputed elastic elements for one mesh.
class ElasticModel {
 public:
  struct Stretch {
    std::array<int, 2> v;
    double rest_length;
    double k;
  };
  struct Bend {
    std::array<int, 3> v;
    double voronoi_length;
    double b;
  };
  struct Membrane {
    std::array<int, 3> v;
    Eigen::Matrix2d dm_inv;
    double area;
  };
  struct Hinge {
    std::array<int, 4> v;  // edge (v0, v1), opposite vertices v2, v3
    double rest_angle;
    double weight;
  };

  ElasticModel(const CodimMesh& mesh, const Material& material);

  const CodimMesh& mesh() const { return *mesh_; }
  const Material& material() const { return material_; }
  const std::vector<Stretch>& stretch() const { return stretch_; }
  const std::vector<Bend>& bend() const { return bend_; }
  const std::vector<Membrane>& membrane() const { return membrane_; }
  const std::vector<Hinge>& hinges() const { return hinges_; }

  enum Terms : unsigned {
    kStretch = 1,
    kBend = 2,
    kMembrane = 4,
    kHinge = 8,
    kAll = 15
  };

  double energy(const Positions& x, unsigned terms = kAll) const;
  // Adds scale * derivatives; element Hessians are projected when asked.
  double accumulate(const Positions& x, double scale, Eigen::VectorXd* grad,
                    HessianSink* hess, bool project,
                    unsigned terms = kAll) const;

 private:
  const CodimMesh* mesh_;
  Material material_;
  std::vector<Stretch> stretch_;
  std::vector<Bend> bend_;
  std::vector<Membrane> membrane_;
  std::vector<Hinge> hinges_;
};

EnergyEval rod_stretch(const Positions& x, const CodimMesh& mesh,
                       const RodMaterial& mat);
EnergyEval rod_bend(const Positions& x, const CodimMesh& mesh,
                    const RodMaterial& mat);
EnergyEval shell_membrane(const Positions& x, const CodimMesh& mesh,
                          const ShellMaterial& mat);
EnergyEval shell_bend(const Positions& x, const CodimMesh& mesh,
                      const ShellMaterial& mat);

Eigen::VectorXd lumped_mass(const CodimMesh& mesh, const Material& material);

}  // namespace codim
