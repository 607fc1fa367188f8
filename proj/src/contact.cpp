#include "codim/contact.hpp"

#include "codim/spatial_hash.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <sstream>

namespace codim {

BarrierDerivatives barrier_derivatives(double d, double a, double eta) {
  const double dd = d - eta, aa = a - eta;
  if (!(dd > 0.0)) {
    throw InfeasibleError("barrier evaluated at or inside the core offset");
  }
  BarrierDerivatives out;
  if (dd >= aa) return out;
  const double g = dd - aa;
  const double l = std::log(dd / aa);
  out.value = -g * g * l;
  out.first = -2.0 * g * l - g * g / dd;
  out.second = -2.0 * l - 4.0 * g / dd + g * g / (dd * dd);
  return out;
}

void BarrierParams::validate() const {
  if (!(h > 0.0)) throw ConfigError("thickness h must be positive");
  if (!(eta >= 0.0 && eta < h)) throw ConfigError("eta must satisfy 0 <= eta < h");
  if (!(stiffness > 0.0)) throw ConfigError("barrier stiffness must be positive");
}

ContactMode ContactMode::culled(int radius) {
  if (radius < 1) throw ConfigError("culling radius must be at least 1");
  return {Tag::Culled, radius};
}

std::string to_string(const ContactMode& mode) {
  switch (mode.tag) {
    case ContactMode::Tag::PlainBarrier:
      return "barrier";
    case ContactMode::Tag::Culled:
      return "culled(" + std::to_string(mode.radius) + ")";
    case ContactMode::Tag::Filtered:
      return "filtered";
  }
  return "?";
}

namespace {

int component_of_side(const CodimMesh& mesh, const Stencil& s, int side) {
  const int v = side == 0 ? s.vertices[0]
                          : s.vertices[s.kind == PairKind::EdgeEdge ? 2 : 1];
  return mesh.component_ids()[v];
}

std::string name_of(const Stencil& s) {
  std::ostringstream out;
  out << to_string(s.kind) << "(" << s.a << "," << s.b << ")";
  return out.str();
}

}  // namespace

bool FilterTable::contains(const Stencil& s) const {
  const std::uint64_t key = s.key();
  auto it = std::lower_bound(
      filtered.begin(), filtered.end(), key,
      [](const std::pair<std::uint64_t, int>& e, std::uint64_t k) {
        return e.first < k;
      });
  return it != filtered.end() && it->first == key;
}

FilterTable build_filter_table(const CodimMesh& mesh,
                               const BarrierParams& params, double kappa) {
  params.validate();
  if (!(kappa >= 1.0)) throw ConfigError("kappa must be at least 1");
  const double window = kappa * params.h;
  const int nc = mesh.num_components();

  FilterTable table;
  table.d_min.assign(nc, kInfiniteDistance);
  table.candidate_count.assign(nc, 0);
  table.filtered_count.assign(nc, 0);
  table.phase = params.eta > 0.0 ? BarrierPhase::Biphasic
                                 : BarrierPhase::SinglePhase;

  const GeodesicBalls balls(mesh, window);
  for_each_candidate(mesh, mesh.reference(), nullptr, window,
                     [&](const Stencil& s) {
    const int c = component_of_side(mesh, s, 0);
    if (component_of_side(mesh, s, 1) != c) return;
    const double pd =
        balls.distance(mesh.primitive(s, 0), mesh.primitive(s, 1));
    if (!(pd < window)) return;
    ++table.candidate_count[c];
    const double d =
        pair_distance_value(s.kind, mesh.gather(s, mesh.reference()));
    if (d == 0.0) {
      throw ConfigError("reference mesh intersects itself at stencil " +
                        name_of(s));
    }
    if (d < params.h) {
      table.filtered.emplace_back(s.key(), c);
      ++table.filtered_count[c];
      table.d_min[c] = std::min(table.d_min[c], d);
    }
  });
  std::sort(table.filtered.begin(), table.filtered.end());
  return table;
}

Activation effective_activation(const Stencil& s, const FilterTable& table,
                                const BarrierParams& params) {
  const std::uint64_t key = s.key();
  auto it = std::lower_bound(
      table.filtered.begin(), table.filtered.end(), key,
      [](const std::pair<std::uint64_t, int>& e, std::uint64_t k) {
        return e.first < k;
      });
  if (it != table.filtered.end() && it->first == key) {
    return {table.d_min[it->second], 0.0};
  }
  return {params.h, params.eta};
}

bool contact_admissible(const Stencil& s, const CodimMesh& mesh,
                        const ContactMode& mode) {
  if (mode.tag != ContactMode::Tag::Culled) return true;
  const int hops = hop_distance(mesh, mesh.primitive(s, 0), mesh.primitive(s, 1));
  return hops < 0 || hops > mode.radius;
}

ContactModel::ContactModel(const CodimMesh& mesh, const BarrierParams& params,
                           const ContactMode& mode, double kappa)
    : mesh_(&mesh), params_(params), mode_(mode), kappa_(kappa) {
  params_.validate();
  if (mode_.tag == ContactMode::Tag::Culled) {
    if (mode_.radius < 1) throw ConfigError("culling radius must be at least 1");
    hops_ = std::make_shared<HopBalls>(mesh, mode_.radius);
  }
  if (mode_.tag == ContactMode::Tag::Filtered) {
    table_ = build_filter_table(mesh, params_, kappa_);
  } else {
    table_.d_min.assign(mesh.num_components(), kInfiniteDistance);
  }
}

ContactModel::ContactModel(const CodimMesh& mesh, const BarrierParams& params,
                           const ContactMode& mode, FilterTable table, double kappa)
    : mesh_(&mesh), params_(params), mode_(mode), kappa_(kappa) {
  params_.validate();
  if (mode_.tag == ContactMode::Tag::Culled) {
    if (mode_.radius < 1) throw ConfigError("culling radius must be at least 1");
    hops_ = std::make_shared<HopBalls>(mesh, mode_.radius);
  }
  if (mode_.tag == ContactMode::Tag::Filtered) {
    table_ = std::move(table);
    table_.phase = params_.eta > 0.0 ? BarrierPhase::Biphasic : BarrierPhase::SinglePhase;
  } else {
    table_.d_min.assign(mesh.num_components(), kInfiniteDistance);
  }
}

bool ContactModel::admissible(const Stencil& s) const {
  if (!hops_) return true;
  return !hops_->within(mesh_->primitive(s, 0), mesh_->primitive(s, 1));
}

Activation ContactModel::activation(const Stencil& s) const {
  if (mode_.tag != ContactMode::Tag::Filtered) return {params_.h, params_.eta};
  return effective_activation(s, table_, params_);
}

namespace {

constexpr int kChunk = 1024;

int chunk_count(std::size_t n) {
  return static_cast<int>((n + kChunk - 1) / kChunk);
}

[[noreturn]] void throw_infeasible(const Stencil& s, double d,
                                   const Activation& act) {
  std::ostringstream out;
  out << "stencil " << name_of(s) << " at distance " << d
      << " is at or inside its offset " << act.eta;
  throw InfeasibleError(out.str());
}

}  // namespace

double contact_energy_value(const ContactModel& model, const Positions& x,
                            const std::vector<Stencil>& pairs) {
  const int chunks = chunk_count(pairs.size());
  std::vector<double> partial(chunks, 0.0);
  const double k = model.params().stiffness;
  parallel_for(chunks, [&](int c) {
    const std::size_t end = std::min(pairs.size(), std::size_t(c + 1) * kChunk);
    double sum = 0.0;
    for (std::size_t i = std::size_t(c) * kChunk; i < end; ++i) {
      const Stencil& s = pairs[i];
      if (!model.admissible(s)) continue;
      const Activation act = model.activation(s);
      const double d = pair_distance_value(s.kind, model.mesh().gather(s, x));
      if (d >= act.a) continue;
      if (d <= act.eta) throw_infeasible(s, d, act);
      sum += k * barrier_derivatives(d, act.a, act.eta).value;
    }
    partial[c] = sum;
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

namespace {

// Active pair terms of one chunk of the pair list, in list order.
void chunk_terms(const ContactModel& model, const Positions& x,
                 const std::vector<Stencil>& pairs, int c, bool with_hessian,
                 bool project, std::vector<PairTerm>& out) {
  const double k = model.params().stiffness;
  const std::size_t end = std::min(pairs.size(), std::size_t(c + 1) * kChunk);
  out.reserve(out.size() + 64);
  for (std::size_t i = std::size_t(c) * kChunk; i < end; ++i) {
    const Stencil& s = pairs[i];
    if (!model.admissible(s)) continue;
    const Activation act = model.activation(s);
    const StencilPoints<double> pts = model.mesh().gather(s, x);
    const double dv = pair_distance_value(s.kind, pts);
    if (dv >= act.a) continue;
    if (dv <= act.eta) throw_infeasible(s, dv, act);
    const DistanceResult dr = pair_distance(s.kind, pts);
    const BarrierDerivatives b = barrier_derivatives(dr.value, act.a, act.eta);
    PairTerm term;
    term.stencil = s;
    term.distance = dr.value;
    term.energy = k * b.value;
    term.gradient = k * b.first * dr.gradient;
    if (with_hessian) {
      if (project) {
        // The distance gradient and Hessian live in the span of dr.basis.
        using Reduced = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 5, 5>;
        using ReducedVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 5, 1>;
        const StencilBasis& basis = dr.basis;
        const StencilBasis hb = dr.hessian.lazyProduct(basis);
        const ReducedVec gr = basis.transpose().lazyProduct(dr.gradient);
        Reduced m = basis.transpose().lazyProduct(hb);
        m = k * (b.second * gr * gr.transpose() + b.first * m);
        Eigen::SelfAdjointEigenSolver<Reduced> eig(m);
        const ReducedVec lambda = eig.eigenvalues().cwiseMax(0.0);
        const StencilBasis v = basis.lazyProduct(eig.eigenvectors());
        const StencilBasis vl = v * lambda.asDiagonal();
        term.hessian = vl.lazyProduct(v.transpose());
      } else {
        term.hessian = k * (b.second * dr.gradient * dr.gradient.transpose() +
                            b.first * dr.hessian);
      }
    }
    out.push_back(std::move(term));
  }
}

}  // namespace

std::vector<PairTerm> contact_terms(const ContactModel& model,
                                    const Positions& x,
                                    const std::vector<Stencil>& pairs,
                                    bool with_hessian, bool project) {
  const int chunks = chunk_count(pairs.size());
  std::vector<std::vector<PairTerm>> partial(chunks);
  parallel_for(chunks, [&](int c) {
    chunk_terms(model, x, pairs, c, with_hessian, project, partial[c]);
  });
  std::vector<PairTerm> out;
  for (auto& p : partial) {
    for (auto& t : p) out.push_back(std::move(t));
  }
  return out;
}

double accumulate_contact(const ContactModel& model, const Positions& x,
                          const std::vector<Stencil>& pairs, double scale,
                          Eigen::VectorXd* grad, HessianSink* hess,
                          bool project) {
  // Chunks are evaluated in bounded batches to cap memory on large scenes.
  const int chunks = chunk_count(pairs.size());
  const int batch = 16 * thread_count();
  double energy = 0.0;
  for (int first = 0; first < chunks; first += batch) {
    const int count = std::min(batch, chunks - first);
    std::vector<std::vector<PairTerm>> partial(count);
    parallel_for(count, [&](int c) {
      chunk_terms(model, x, pairs, first + c, hess != nullptr, project, partial[c]);
    });
    for (const auto& terms : partial) {
      for (const PairTerm& t : terms) {
        energy += t.energy;
        const int n = vertex_count(t.stencil.kind);
        if (grad) {
          for (int i = 0; i < n; ++i) {
            grad->segment<3>(3 * t.stencil.vertices[i]) +=
                scale * t.gradient.segment<3>(3 * i);
          }
        }
        if (hess) {
          const StencilMatrix scaled = scale * t.hessian;
          hess->add(t.stencil.vertices.data(), n, scaled);
        }
      }
    }
  }
  return scale * energy;
}

EnergyEval contact_energy(const CodimMesh& mesh, const Positions& x,
                          const std::vector<Stencil>& pairs,
                          const FilterTable& table, const BarrierParams& params,
                          const ContactMode& mode) {
  params.validate();
  EnergyEval out;
  out.gradient = Eigen::VectorXd::Zero(3 * mesh.num_vertices());
  TripletSink sink(out.hessian);
  const double k = params.stiffness;
  for (const Stencil& s : pairs) {
    if (!contact_admissible(s, mesh, mode)) continue;
    const Activation act = mode.tag == ContactMode::Tag::Filtered
                               ? effective_activation(s, table, params)
                               : Activation{params.h, params.eta};
    const StencilPoints<double> pts = mesh.gather(s, x);
    const double dv = pair_distance_value(s.kind, pts);
    if (dv >= act.a) continue;
    if (dv <= act.eta) throw_infeasible(s, dv, act);
    const DistanceResult dr = pair_distance(s.kind, pts);
    const BarrierDerivatives b = barrier_derivatives(dr.value, act.a, act.eta);
    out.energy += k * b.value;
    const int n = vertex_count(s.kind);
    for (int i = 0; i < n; ++i) {
      out.gradient.segment<3>(3 * s.vertices[i]) +=
          k * b.first * dr.gradient.segment<3>(3 * i);
    }
    const StencilMatrix h = k * (b.second * dr.gradient * dr.gradient.transpose() +
                                 b.first * dr.hessian);
    sink.add(s.vertices.data(), n, h);
  }
  return out;
}

std::vector<FrictionPair> lag_friction(const ContactModel& model,
                                       const Positions& x,
                                       const std::vector<Stencil>& pairs) {
  std::vector<FrictionPair> out;
  const double k = model.params().stiffness;
  for (const Stencil& s : pairs) {
    if (!model.admissible(s)) continue;
    const Activation act = model.activation(s);
    const StencilPoints<double> pts = model.mesh().gather(s, x);
    const double d = pair_distance_value(s.kind, pts);
    if (d >= act.a || d <= act.eta) continue;
    const BarrierDerivatives b = barrier_derivatives(d, act.a, act.eta);
    const int n = vertex_count(s.kind);
    const Eigen::Vector4d w = closest_point_weights(s.kind, pts);
    const Vec3d r = pts.leftCols(n) * w.head(n);
    const Vec3d normal = r.normalized();
    const Vec3d seed = std::abs(normal.x()) < 0.9 ? Vec3d::UnitX() : Vec3d::UnitY();
    const Vec3d t1 = normal.cross(seed).normalized();
    const Vec3d t2 = normal.cross(t1);

    FrictionPair fp;
    fp.stencil = s;
    fp.normal_force = -k * b.first;
    fp.start = pts;
    fp.tangent.setZero(3 * n, 2);
    for (int i = 0; i < n; ++i) {
      fp.tangent.block<3, 1>(3 * i, 0) = w[i] * t1;
      fp.tangent.block<3, 1>(3 * i, 1) = w[i] * t2;
    }
    out.push_back(std::move(fp));
  }
  return out;
}

double friction_f0(double y, double eps) {
  if (y >= eps) return y;
  return -y * y * y / (3.0 * eps * eps) + y * y / eps + eps / 3.0;
}

double friction_f1(double y, double eps) {
  if (y >= eps) return 1.0;
  return -y * y / (eps * eps) + 2.0 * y / eps;
}

double accumulate_friction(const CodimMesh& mesh, const Positions& x,
                           const std::vector<FrictionPair>& pairs, double mu,
                           double epsv, double dt, double scale,
                           Eigen::VectorXd* grad, HessianSink* hess) {
  if (mu == 0.0 || pairs.empty()) return 0.0;
  const double eps = epsv * dt;
  if (!(eps > 0.0)) throw ConfigError("friction threshold epsv * dt must be positive");
  double energy = 0.0;
  for (const FrictionPair& fp : pairs) {
    const int n = vertex_count(fp.stencil.kind);
    const StencilPoints<double> pts = mesh.gather(fp.stencil, x);
    StencilVector dx(3 * n);
    for (int i = 0; i < n; ++i) dx.segment<3>(3 * i) = pts.col(i) - fp.start.col(i);
    const Eigen::Vector2d u = fp.tangent.transpose() * dx;
    const double y = u.norm();
    const double c = mu * fp.normal_force;
    energy += c * friction_f0(y, eps);
    // f1(y) / y stays finite as y -> 0.
    const double f1_over_y = y < eps ? 2.0 / eps - y / (eps * eps) : 1.0 / y;
    if (grad) {
      const StencilVector g = scale * c * f1_over_y * (fp.tangent * u);
      for (int i = 0; i < n; ++i) {
        grad->segment<3>(3 * fp.stencil.vertices[i]) += g.segment<3>(3 * i);
      }
    }
    if (hess) {
      Eigen::Matrix2d h2;
      if (y >= eps) {
        const Eigen::Vector2d uh = u / y;
        h2 = (Eigen::Matrix2d::Identity() - uh * uh.transpose()) / y;
      } else if (y > 0.0) {
        h2 = f1_over_y * Eigen::Matrix2d::Identity() -
             u * u.transpose() / (eps * eps * y);
      } else {
        h2 = (2.0 / eps) * Eigen::Matrix2d::Identity();
      }
      const StencilMatrix local =
          scale * c * (fp.tangent * h2 * fp.tangent.transpose());
      hess->add(fp.stencil.vertices.data(), n, local);
    }
  }
  return scale * energy;
}

EnergyEval friction_force(const CodimMesh& mesh, const Positions& x,
                          const std::vector<FrictionPair>& pairs, double mu,
                          double epsv, double dt) {
  EnergyEval out;
  out.gradient = Eigen::VectorXd::Zero(3 * mesh.num_vertices());
  TripletSink sink(out.hessian);
  out.energy =
      accumulate_friction(mesh, x, pairs, mu, epsv, dt, 1.0, &out.gradient, &sink);
  return out;
}

}  // namespace codim
