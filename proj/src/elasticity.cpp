#include "codim/elasticity.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <numbers>
#include <string>

namespace codim {

void RodMaterial::validate() const {
  if (!(youngs_modulus > 0.0 && density > 0.0 && radius > 0.0)) {
    throw ConfigError("rod material parameters must be positive");
  }
}

void ShellMaterial::validate() const {
  if (!(youngs_modulus > 0.0)) throw ConfigError("shell Young's modulus must be positive");
  if (!(poisson_ratio >= 0.0 && poisson_ratio < 0.5)) {
    throw ConfigError("shell Poisson ratio must lie in [0, 0.5)");
  }
  if (!(density > 0.0)) throw ConfigError("shell density must be positive");
  if (!(thickness > 0.0)) throw ConfigError("shell thickness must be positive");
}

namespace {

template <int K>
using DualPoint = Vec3<Dual2<3 * K>>;

template <int K>
std::array<DualPoint<K>, K> seed(const Positions& x, const std::array<int, K>& v) {
  std::array<DualPoint<K>, K> p;
  for (int i = 0; i < K; ++i) {
    for (int a = 0; a < 3; ++a) {
      p[i][a] = Dual2<3 * K>::variable(x(a, v[i]), 3 * i + a);
    }
  }
  return p;
}

struct Local {
  double energy = 0.0;
  StencilVector grad;
  StencilMatrix hess;
};

template <int K, typename F>
Local differentiate(const Positions& x, const std::array<int, K>& v, F&& f) {
  const auto p = seed<K>(x, v);
  const Dual2<3 * K> e = f(p);
  Local out;
  out.energy = e.v;
  out.grad = e.g;
  out.hess = e.h;
  return out;
}

template <int K>
std::array<Vec3d, K> points(const Positions& x, const std::array<int, K>& v) {
  std::array<Vec3d, K> p;
  for (int i = 0; i < K; ++i) p[i] = x.col(v[i]);
  return p;
}

// Evaluates every element, chunked for deterministic parallel reduction,
// then scatters into grad / hess in element order.
template <typename Element, typename Eval>
double assemble(const std::vector<Element>& elements, double scale,
                Eigen::VectorXd* grad, HessianSink* hess, bool project,
                Eval&& eval) {
  if (elements.empty()) return 0.0;
  constexpr int kChunk = 1024;
  const int n = static_cast<int>(elements.size());
  const int chunks = (n + kChunk - 1) / kChunk;
  const bool derivs = grad || hess;
  std::vector<double> energy(chunks, 0.0);
  std::vector<std::vector<Local>> locals(derivs ? chunks : 0);
  parallel_for(chunks, [&](int c) {
    const int end = std::min(n, (c + 1) * kChunk);
    double sum = 0.0;
    for (int i = c * kChunk; i < end; ++i) {
      if (derivs) {
        Local l = eval(elements[i]);
        sum += l.energy;
        if (hess && project) project_psd(l.hess);
        locals[c].push_back(std::move(l));
      } else {
        sum += eval(elements[i]).energy;
      }
    }
    energy[c] = sum;
  });
  double total = 0.0;
  for (double e : energy) total += e;
  if (!derivs) return total;
  for (int c = 0; c < chunks; ++c) {
    for (std::size_t k = 0; k < locals[c].size(); ++k) {
      const auto& el = elements[c * kChunk + k];
      const Local& l = locals[c][k];
      const int count = static_cast<int>(el.v.size());
      if (grad) {
        for (int i = 0; i < count; ++i) {
          grad->segment<3>(3 * el.v[i]) += scale * l.grad.template segment<3>(3 * i);
        }
      }
      if (hess) {
        StencilMatrix scaled = scale * l.hess;
        hess->add(el.v.data(), count, scaled);
      }
    }
  }
  return total;
}

}  // namespace

ElasticModel::ElasticModel(const CodimMesh& mesh, const Material& material)
    : mesh_(&mesh), material_(material) {
  const Positions& ref = mesh.reference();
  if (const auto* rod = std::get_if<RodMaterial>(&material)) {
    rod->validate();
    if (mesh.kind() != MeshKind::Rod) throw ConfigError("rod material on a shell mesh");
    const double k = rod->stretch_stiffness();
    const double b = rod->bending_stiffness();
    for (int e = 0; e < mesh.num_edges(); ++e) {
      const double len = mesh.reference_edge_length(e);
      if (!(len > 0.0)) {
        throw DegenerateError("zero-length reference edge " + std::to_string(e));
      }
      stretch_.push_back({{mesh.edges()[e][0], mesh.edges()[e][1]}, len, k});
    }
    for (int v = 0; v < mesh.num_vertices(); ++v) {
      const auto& inc = mesh.vertex_edges()[v];
      if (inc.size() < 2) continue;
      if (inc.size() > 2) {
        throw ConfigError("rod vertex " + std::to_string(v) +
                          " has more than two incident edges");
      }
      auto other = [&](int e) {
        const auto& ed = mesh.edges()[e];
        return ed[0] == v ? ed[1] : ed[0];
      };
      const double voronoi =
          0.5 * (mesh.reference_edge_length(inc[0]) + mesh.reference_edge_length(inc[1]));
      bend_.push_back({{other(inc[0]), v, other(inc[1])}, voronoi, b});
    }
    return;
  }

  const auto& shell = std::get<ShellMaterial>(material);
  shell.validate();
  if (mesh.kind() != MeshKind::Shell) throw ConfigError("shell material on a rod mesh");
  std::vector<double> areas(mesh.num_triangles());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles()[t];
    const Vec3d e1 = ref.col(tri[1]) - ref.col(tri[0]);
    const Vec3d e2 = ref.col(tri[2]) - ref.col(tri[0]);
    const Vec3d n = e1.cross(e2);
    const double area = 0.5 * n.norm();
    if (!(area > 1e-14 * std::max(e1.squaredNorm(), e2.squaredNorm()))) {
      throw DegenerateError("degenerate reference triangle " + std::to_string(t));
    }
    // Reference tangent frame: t1 along e1, t2 = n x t1.
    const Vec3d t1 = e1.normalized();
    const Vec3d t2 = n.normalized().cross(t1);
    Eigen::Matrix2d dm;
    dm << e1.dot(t1), e2.dot(t1), e1.dot(t2), e2.dot(t2);
    areas[t] = area;
    membrane_.push_back({{tri[0], tri[1], tri[2]}, dm.inverse(), area});
  }

  const double kb = shell.bending_stiffness();
  for (int e = 0; e < mesh.num_edges(); ++e) {
    const auto& tris = mesh.edge_triangles()[e];
    if (tris.size() < 2) continue;
    if (tris.size() > 2) {
      throw ConfigError("non-manifold edge " + std::to_string(e));
    }
    const auto [a, b] = mesh.edges()[e];
    auto opposite = [&](int t) {
      for (int v : mesh.triangles()[t]) {
        if (v != a && v != b) return v;
      }
      return -1;
    };
    // Orient so that the first triangle lists (a, b) in order; then the
    // normals (x1-x0)x(x2-x0) and (x3-x0)x(x1-x0) agree for a flat hinge.
    int v0 = a, v1 = b;
    const auto& t0 = mesh.triangles()[tris[0]];
    for (int k = 0; k < 3; ++k) {
      if (t0[k] == b && t0[(k + 1) % 3] == a) std::swap(v0, v1);
    }
    const std::array<int, 4> hv = {v0, v1, opposite(tris[0]), opposite(tris[1])};
    const auto p = points<4>(ref, hv);
    const double rest = hinge_angle(p[0], p[1], p[2], p[3]);
    const double len2 = (p[1] - p[0]).squaredNorm();
    const double weight = kb * 3.0 * len2 / (areas[tris[0]] + areas[tris[1]]);
    hinges_.push_back({hv, rest, weight});
  }
}

double ElasticModel::energy(const Positions& x, unsigned terms) const {
  return accumulate(x, 1.0, nullptr, nullptr, false, terms);
}

double ElasticModel::accumulate(const Positions& x, double scale,
                                Eigen::VectorXd* grad, HessianSink* hess,
                                bool project, unsigned terms) const {
  const bool derivs = grad || hess;
  double total = 0.0;
  if (terms & kStretch) {
    total += assemble(stretch_, scale, grad, hess, project, [&](const Stretch& s) {
      if (!derivs) {
        const auto p = points<2>(x, s.v);
        return Local{stretch_energy(p[0], p[1], s.rest_length, s.k), {}, {}};
      }
      return differentiate<2>(x, s.v, [&](const auto& p) {
        return stretch_energy(p[0], p[1], s.rest_length, s.k);
      });
    });
  }
  if (terms & kBend) {
    total += assemble(bend_, scale, grad, hess, project, [&](const Bend& s) {
      if (!derivs) {
        const auto p = points<3>(x, s.v);
        return Local{bend_energy(p[0], p[1], p[2], s.voronoi_length, s.b), {}, {}};
      }
      return differentiate<3>(x, s.v, [&](const auto& p) {
        return bend_energy(p[0], p[1], p[2], s.voronoi_length, s.b);
      });
    });
  }
  if (const auto* shell = std::get_if<ShellMaterial>(&material_)) {
    const double h = shell->thickness, mu = shell->mu(), lambda = shell->lambda();
    if (terms & kMembrane) {
      total += assemble(membrane_, scale, grad, hess, project, [&](const Membrane& s) {
        if (!derivs) {
          const auto p = points<3>(x, s.v);
          return Local{membrane_energy(p[0], p[1], p[2], s.dm_inv, s.area, h, mu, lambda),
                       {}, {}};
        }
        return differentiate<3>(x, s.v, [&](const auto& p) {
          return membrane_energy(p[0], p[1], p[2], s.dm_inv, s.area, h, mu, lambda);
        });
      });
    }
    if (terms & kHinge) {
      total += assemble(hinges_, scale, grad, hess, project, [&](const Hinge& s) {
        if (!derivs) {
          const auto p = points<4>(x, s.v);
          return Local{hinge_energy(p[0], p[1], p[2], p[3], s.rest_angle, s.weight), {}, {}};
        }
        return differentiate<4>(x, s.v, [&](const auto& p) {
          return hinge_energy(p[0], p[1], p[2], p[3], s.rest_angle, s.weight);
        });
      });
    }
  }
  return scale * total;
}

namespace {

EnergyEval evaluate(const Positions& x, const ElasticModel& model, unsigned terms) {
  EnergyEval out;
  out.gradient = Eigen::VectorXd::Zero(x.size());
  TripletSink sink(out.hessian);
  out.energy = model.accumulate(x, 1.0, &out.gradient, &sink, false, terms);
  return out;
}

}  // namespace

EnergyEval rod_stretch(const Positions& x, const CodimMesh& mesh, const RodMaterial& mat) {
  return evaluate(x, ElasticModel(mesh, mat), ElasticModel::kStretch);
}

EnergyEval rod_bend(const Positions& x, const CodimMesh& mesh, const RodMaterial& mat) {
  return evaluate(x, ElasticModel(mesh, mat), ElasticModel::kBend);
}

EnergyEval shell_membrane(const Positions& x, const CodimMesh& mesh,
                          const ShellMaterial& mat) {
  return evaluate(x, ElasticModel(mesh, mat), ElasticModel::kMembrane);
}

EnergyEval shell_bend(const Positions& x, const CodimMesh& mesh, const ShellMaterial& mat) {
  return evaluate(x, ElasticModel(mesh, mat), ElasticModel::kHinge);
}

Eigen::VectorXd lumped_mass(const CodimMesh& mesh, const Material& material) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(mesh.num_vertices());
  const Positions& ref = mesh.reference();
  if (const auto* rod = std::get_if<RodMaterial>(&material)) {
    const double line_density = rod->density * std::numbers::pi * rod->radius * rod->radius;
    for (int e = 0; e < mesh.num_edges(); ++e) {
      const double half = 0.5 * line_density * mesh.reference_edge_length(e);
      m[mesh.edges()[e][0]] += half;
      m[mesh.edges()[e][1]] += half;
    }
    return m;
  }
  const auto& shell = std::get<ShellMaterial>(material);
  const double surface_density = shell.density * shell.thickness;
  for (const auto& t : mesh.triangles()) {
    const double area =
        0.5 * (ref.col(t[1]) - ref.col(t[0])).cross(ref.col(t[2]) - ref.col(t[0])).norm();
    for (int v : t) m[v] += surface_density * area / 3.0;
  }
  return m;
}

}  // namespace codim
