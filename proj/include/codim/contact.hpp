#pragma once

#include "codim/autodiff.hpp"
#include "codim/mesh.hpp"

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace codim {

// Log barrier -(d - a)^2 ln(d / a), supported on (0, a).
template <typename Scalar>
Scalar barrier(const Scalar& d, const Scalar& a) {
  using std::log;
  if (!(value_of(d) > 0.0)) {
    throw InfeasibleError("barrier evaluated at non-positive distance");
  }
  if (value_of(d) >= value_of(a)) return Scalar(0);
  const Scalar g = d - a;
  return -g * g * log(d / a);
}

// Two-phase barrier b(d - eta, a - eta); diverges at the hard core d = eta.
template <typename Scalar>
Scalar barrier_biphasic(const Scalar& d, const Scalar& a, const Scalar& eta) {
  if (!(value_of(d) > value_of(eta))) {
    throw InfeasibleError("biphasic barrier evaluated inside the core offset");
  }
  return barrier<Scalar>(d - eta, a - eta);
}

// Value and first two derivatives in d of barrier_biphasic(d, a, eta).
struct BarrierDerivatives {
  double value = 0.0;
  double first = 0.0;
  double second = 0.0;
};
BarrierDerivatives barrier_derivatives(double d, double a, double eta = 0.0);

struct BarrierParams {
  double h = 1e-3;          // material thickness
  double eta = 0.0;         // hard-core offset
  double stiffness = 1.0;   // energy scale

  // Throws ConfigError unless 0 <= eta < h and stiffness > 0.
  void validate() const;
};

struct ContactMode {
  enum class Tag { PlainBarrier, Culled, Filtered };

  Tag tag = Tag::Filtered;
  int radius = 0;  // culling radius in edges (Culled only)

  static ContactMode plain() { return {Tag::PlainBarrier, 0}; }
  static ContactMode culled(int radius);
  static ContactMode filtered() { return {Tag::Filtered, 0}; }
};

std::string to_string(const ContactMode& mode);

struct Activation {
  double a = 0.0;
  double eta = 0.0;
  friend bool operator==(const Activation&, const Activation&) = default;
};

enum class BarrierPhase { SinglePhase, Biphasic };

struct FilterTable {
  // Per component; infinity where the component has no filtered pairs.
  std::vector<double> d_min;
  // Sorted by stencil key; second is the component label.
  std::vector<std::pair<std::uint64_t, int>> filtered;
  BarrierPhase phase = BarrierPhase::SinglePhase;
  // Per component bookkeeping for reporting.
  std::vector<std::size_t> candidate_count;
  std::vector<std::size_t> filtered_count;

  bool contains(const Stencil& s) const;
  std::size_t size() const { return filtered.size(); }
};

// Filters intrinsically close stencils: candidates have parametric distance
// below kappa * h within one component; those closer than h in the reference
// configuration are filtered and share their component's minimum distance.
FilterTable build_filter_table(const CodimMesh& mesh,
                               const BarrierParams& params, double kappa);

Activation effective_activation(const Stencil& s, const FilterTable& table,
                                const BarrierParams& params);

bool contact_admissible(const Stencil& s, const CodimMesh& mesh,
                        const ContactMode& mode);

// Bundles the per-scene contact configuration with cached lookups.
class ContactModel {
 public:
  ContactModel(const CodimMesh& mesh, const BarrierParams& params,
               const ContactMode& mode, double kappa = 2.0);
  // Reuses a table built by build_filter_table with the same h and kappa.
  ContactModel(const CodimMesh& mesh, const BarrierParams& params,
               const ContactMode& mode, FilterTable table, double kappa);

  const CodimMesh& mesh() const { return *mesh_; }
  const BarrierParams& params() const { return params_; }
  const ContactMode& mode() const { return mode_; }
  const FilterTable& table() const { return table_; }
  double kappa() const { return kappa_; }

  bool admissible(const Stencil& s) const;
  // Filter table lookup applies in filtered mode only.
  Activation activation(const Stencil& s) const;

 private:
  const CodimMesh* mesh_;
  BarrierParams params_;
  ContactMode mode_;
  double kappa_;
  FilterTable table_;
  std::shared_ptr<const HopBalls> hops_;
};

// One active pair's contribution.
struct PairTerm {
  Stencil stencil;
  double distance = 0.0;
  double energy = 0.0;
  StencilVector gradient;
  StencilMatrix hessian;
};

// Energy of admissible pairs from the list. Throws InfeasibleError naming the
// pair when some distance is at or below its offset.
double contact_energy_value(const ContactModel& model, const Positions& x,
                            const std::vector<Stencil>& pairs);

// Active pair terms in list order. With project set, each Hessian is
// projected to positive semi-definite.
std::vector<PairTerm> contact_terms(const ContactModel& model,
                                    const Positions& x,
                                    const std::vector<Stencil>& pairs,
                                    bool with_hessian, bool project);

// Adds scale * (contact energy) derivatives into grad (3n) and hess.
double accumulate_contact(const ContactModel& model, const Positions& x,
                          const std::vector<Stencil>& pairs, double scale,
                          Eigen::VectorXd* grad, HessianSink* hess,
                          bool project);

// Exact (unprojected) contact energy with full gradient and triplets.
EnergyEval contact_energy(const CodimMesh& mesh, const Positions& x,
                          const std::vector<Stencil>& pairs,
                          const FilterTable& table, const BarrierParams& params,
                          const ContactMode& mode);

// Lagged friction data frozen at the start of a step.
struct FrictionPair {
  Stencil stencil;
  double normal_force = 0.0;
  StencilPoints<double> start;  // stencil positions at the lag point
  // Maps stencil displacement to relative tangential displacement:
  // u = tangent^T * dx.
  Eigen::Matrix<double, Eigen::Dynamic, 2, 0, kMaxStencilDofs, 2> tangent;
};

std::vector<FrictionPair> lag_friction(const ContactModel& model,
                                       const Positions& x,
                                       const std::vector<Stencil>& pairs);

// Smoothed Coulomb mollifier f0 and its derivative f1 with threshold eps.
double friction_f0(double y, double eps);
double friction_f1(double y, double eps);

// Dissipative potential sum_k mu * lambda_k * f0(|u_k|), eps = epsv * dt.
// Adds scale * gradient and scale * Hessian when given.
double accumulate_friction(const CodimMesh& mesh, const Positions& x,
                           const std::vector<FrictionPair>& pairs, double mu,
                           double epsv, double dt, double scale,
                           Eigen::VectorXd* grad, HessianSink* hess);

EnergyEval friction_force(const CodimMesh& mesh, const Positions& x,
                          const std::vector<FrictionPair>& pairs, double mu,
                          double epsv, double dt);

}  // namespace codim
