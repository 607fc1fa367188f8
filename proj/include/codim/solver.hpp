#pragma once

#include "codim/collision.hpp"
#include "codim/contact.hpp"
#include "codim/elasticity.hpp"

#include <functional>
#include <limits>
#include <vector>

namespace codim {

// Auto factorizes small systems and switches to PCG once the assembled
// Hessian holds more than kAutoDirectBlocks 3x3 blocks.
enum class LinearSolver { Ldlt, Pcg, Auto };
inline constexpr std::size_t kAutoDirectBlocks = 500'000;

struct SolverParams {
  double dt = 0.04;
  // Newton stops when the largest free-coordinate update is below
  // newton_tol * dt * (bounding box diagonal).
  double newton_tol = 1e-4;
  int max_newton = 100;
  // Largest vertex displacement of one Newton step in meters; longer
  // directions are scaled down before the line search.
  double max_step = std::numeric_limits<double>::infinity();
  double armijo_c = 1e-4;
  double step_shrink = 0.5;
  double friction_mu = 0.0;
  double friction_epsv = 1e-3;  // m/s
  LinearSolver linear_solver = LinearSolver::Ldlt;
  double pcg_tol = 1e-6;
  // Reset velocities after every step (equilibrium relaxation).
  bool quasistatic = false;

  void validate() const;
};

struct SimState {
  Positions x;
  Positions v;
  Eigen::VectorXd masses;
  double t = 0.0;
  // Dirichlet vertices, sorted. Their coordinates are eliminated.
  std::vector<int> fixed;
};

// Writes the prescribed positions of the fixed vertices at time t into x.
using BoundaryFn = std::function<void(double t, Positions& x)>;

struct Scene {
  const CodimMesh* mesh = nullptr;
  const ElasticModel* elastic = nullptr;
  const ContactModel* contact = nullptr;
  Vec3d gravity = Vec3d::Zero();
  SolverParams solver;
  BoundaryFn boundary;
};

SimState initial_state(const Scene& scene, std::vector<int> fixed = {});

// x + dt v + dt^2 g, with fixed vertices at their prescribed positions.
Positions inertial_predictor(const SimState& state, const Scene& scene);

// 0.5 |x - xhat|_M^2 + dt^2 (elastic + contact + friction). Throws
// InfeasibleError when an admissible pair is at or inside its offset.
double incremental_potential(const Positions& x, const SimState& state,
                             const Scene& scene,
                             const std::vector<Stencil>* candidates = nullptr,
                             const std::vector<FrictionPair>* friction = nullptr);

// Per-step data shared by the Newton iterations of one time step.
struct StepContext {
  Positions predictor;
  std::vector<FrictionPair> friction;
  std::vector<int> free_index;  // vertex -> free position or -1
  int free_count = 0;
};

StepContext make_step_context(const SimState& state, const Scene& scene);

struct NewtonDirection {
  Positions p;          // zero on fixed vertices
  Eigen::VectorXd gradient;  // over all coordinates, zero on fixed
  double decrement = 0.0;    // -g^T p
  double regularization = 0.0;
};

// Projected Newton direction at x. candidates must cover every pair within
// the activation distance at x. The system matrix dominates the lumped mass,
// so |p| <= |g| / (smallest free mass); when that bound is at most skip_below
// the solve is skipped and p is zero.
NewtonDirection newton_step(const Positions& x, const SimState& state,
                            const Scene& scene, const StepContext& ctx,
                            const std::vector<Stencil>& candidates,
                            double skip_below = 0.0);

struct LineSearchResult {
  double alpha = 0.0;
  double ccd_bound = 1.0;
  double energy = 0.0;
};

// CCD-bounded Armijo backtracking along p from x. Throws SolverError when
// alpha underflows 1e-12.
LineSearchResult line_search(const Positions& x, const Positions& p,
                             double directional_derivative, double energy,
                             const SimState& state, const Scene& scene,
                             const StepContext& ctx,
                             const std::vector<Stencil>& swept_candidates);

struct StepStats {
  int newton_iters = 0;
  double final_decrement = 0.0;
  double final_step = 0.0;
  // Rods: segment pairs that passed through each other during the step.
  int swept_crossings = 0;
  bool converged = false;
  // Stopped because the accepted update fell below the tolerance while the
  // Newton direction did not.
  bool stalled = false;
};

// One implicit Euler step; state is updated in place.
StepStats advance(SimState& state, const Scene& scene);

struct RelaxResult {
  int steps = 0;
  double residual = 0.0;
  bool converged = false;
};

// Quasistatic stepping until the largest free vertex force falls below
// force_tol or all speeds stay below 1e-6 m/s for five consecutive steps.
// Throws SolverError with the residual after max_steps.
RelaxResult relax_to_equilibrium(SimState& state, const Scene& scene,
                                 double force_tol, int max_steps = 1000);

// Elastic, contact and gravity force on every vertex (rows: x, y, z).
Positions internal_force(const Positions& x, const Scene& scene,
                         const Eigen::VectorXd& masses);

// Largest per-vertex contact force magnitude at x.
double contact_force_norm(const ContactModel& model, const Positions& x);

// Current total edge length (rods) or triangle area (shells) over the
// reference value.
double expansion_ratio(const CodimMesh& mesh, const Positions& x);

struct PairDistanceSummary {
  double min_distance = kInfiniteDistance;  // admissible pairs within h
  double min_margin = kInfiniteDistance;    // distance minus offset
};

PairDistanceSummary pair_distance_summary(const ContactModel& model,
                                          const Positions& x);

}  // namespace codim
