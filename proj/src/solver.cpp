#include "codim/solver.hpp"

#include "codim/assembly.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace codim {

void SolverParams::validate() const {
  if (!(dt > 0.0)) throw ConfigError("time step must be positive");
  if (!(newton_tol > 0.0)) throw ConfigError("Newton tolerance must be positive");
  if (max_newton < 1) throw ConfigError("Newton iteration cap must be at least 1");
  if (!(max_step > 0.0)) throw ConfigError("max_step must be positive");
  if (!(armijo_c > 0.0 && armijo_c < 1.0)) throw ConfigError("Armijo constant must lie in (0, 1)");
  if (!(step_shrink > 0.0 && step_shrink < 1.0)) {
    throw ConfigError("backtracking factor must lie in (0, 1)");
  }
  if (!(friction_mu >= 0.0)) throw ConfigError("friction coefficient must be non-negative");
  if (friction_mu > 0.0 && !(friction_epsv > 0.0)) {
    throw ConfigError("friction velocity threshold must be positive");
  }
}

namespace {

double contact_h(const Scene& scene) { return scene.contact->params().h; }

std::vector<Stencil> static_candidates(const Scene& scene, const Positions& x) {
  return broadphase(*scene.mesh, x, nullptr, contact_h(scene));
}

double bbox_diagonal(const Positions& x) {
  if (x.cols() == 0) return 0.0;
  return (x.rowwise().maxCoeff() - x.rowwise().minCoeff()).norm();
}

double potential(const Positions& x, const SimState& state, const Scene& scene,
                 const StepContext& ctx, const std::vector<Stencil>& candidates) {
  const double dt2 = scene.solver.dt * scene.solver.dt;
  double inertia = 0.0;
  for (int v = 0; v < x.cols(); ++v) {
    if (ctx.free_index[v] < 0) continue;
    inertia += 0.5 * state.masses[v] * (x.col(v) - ctx.predictor.col(v)).squaredNorm();
  }
  double e = scene.elastic->energy(x);
  e += contact_energy_value(*scene.contact, x, candidates);
  e += accumulate_friction(*scene.mesh, x, ctx.friction, scene.solver.friction_mu,
                           scene.solver.friction_epsv, scene.solver.dt, 1.0, nullptr,
                           nullptr);
  return inertia + dt2 * e;
}

// Gradient over all coordinates with fixed entries zeroed; optionally the
// Hessian blocks (projected) including the mass diagonal.
Eigen::VectorXd gradient(const Positions& x, const SimState& state, const Scene& scene,
                         const StepContext& ctx, const std::vector<Stencil>& candidates,
                         BlockAssembler* hess) {
  const double dt2 = scene.solver.dt * scene.solver.dt;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
  scene.elastic->accumulate(x, dt2, &g, hess, true);
  accumulate_contact(*scene.contact, x, candidates, dt2, &g, hess, true);
  accumulate_friction(*scene.mesh, x, ctx.friction, scene.solver.friction_mu,
                      scene.solver.friction_epsv, scene.solver.dt, dt2, &g, hess);
  for (int v = 0; v < x.cols(); ++v) {
    if (ctx.free_index[v] < 0) {
      g.segment<3>(3 * v).setZero();
      continue;
    }
    g.segment<3>(3 * v) += state.masses[v] * (x.col(v) - ctx.predictor.col(v));
    if (hess) hess->add_diagonal(v, state.masses[v]);
  }
  return g;
}

Eigen::VectorXd free_part(const Eigen::VectorXd& full, const StepContext& ctx) {
  Eigen::VectorXd out(3 * ctx.free_count);
  for (std::size_t v = 0; v < ctx.free_index.size(); ++v) {
    const int f = ctx.free_index[v];
    if (f >= 0) out.segment<3>(3 * f) = full.segment<3>(3 * v);
  }
  return out;
}

bool solve_ldlt(const Eigen::SparseMatrix<double>& h, const Eigen::VectorXd& rhs,
                double mean_mass, Eigen::VectorXd& out, double& eps_used) {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower> ldlt;
  ldlt.analyzePattern(h);
  Eigen::SparseMatrix<double> identity(h.rows(), h.cols());
  identity.setIdentity();
  for (int k = -1; k <= 14; ++k) {
    const double eps = k < 0 ? 0.0 : mean_mass * std::pow(10.0, k - 8);
    if (k < 0) {
      ldlt.factorize(h);
    } else {
      ldlt.factorize(h + eps * identity);
    }
    if (ldlt.info() != Eigen::Success) continue;
    if (!(ldlt.vectorD().minCoeff() > 0.0)) continue;
    out = ldlt.solve(rhs);
    if (ldlt.info() != Eigen::Success || !out.allFinite()) continue;
    if (!(rhs.dot(out) > 0.0) && rhs.squaredNorm() > 0.0) continue;
    eps_used = eps;
    return true;
  }
  return false;
}

bool solve_pcg(const Eigen::SparseMatrix<double>& h, const Eigen::VectorXd& rhs,
               double tol, Eigen::VectorXd& out) {
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower,
                           Eigen::IncompleteCholesky<double, Eigen::Lower>>
      cg;
  cg.setTolerance(tol);
  cg.setMaxIterations(std::max<Eigen::Index>(1000, h.rows()));
  cg.compute(h);
  if (cg.info() != Eigen::Success) return false;
  out = cg.solve(rhs);
  return out.allFinite() && (rhs.squaredNorm() == 0.0 || rhs.dot(out) > 0.0);
}

}  // namespace

SimState initial_state(const Scene& scene, std::vector<int> fixed) {
  SimState s;
  s.x = scene.mesh->reference();
  s.v = Positions::Zero(3, s.x.cols());
  s.masses = lumped_mass(*scene.mesh, scene.elastic->material());
  std::sort(fixed.begin(), fixed.end());
  fixed.erase(std::unique(fixed.begin(), fixed.end()), fixed.end());
  for (int v : fixed) {
    if (v < 0 || v >= s.x.cols()) throw ConfigError("fixed vertex out of range");
  }
  s.fixed = std::move(fixed);
  return s;
}

Positions inertial_predictor(const SimState& state, const Scene& scene) {
  const double dt = scene.solver.dt;
  Positions xhat = state.x + dt * state.v;
  xhat.colwise() += dt * dt * scene.gravity;
  if (!state.fixed.empty()) {
    Positions target = state.x;
    if (scene.boundary) scene.boundary(state.t + dt, target);
    for (int v : state.fixed) xhat.col(v) = target.col(v);
  }
  return xhat;
}

StepContext make_step_context(const SimState& state, const Scene& scene) {
  StepContext ctx;
  ctx.predictor = inertial_predictor(state, scene);
  ctx.free_index.assign(state.x.cols(), 0);
  for (int v : state.fixed) ctx.free_index[v] = -1;
  for (auto& f : ctx.free_index) {
    if (f == 0) f = ctx.free_count++;
  }
  if (scene.solver.friction_mu > 0.0) {
    ctx.friction = lag_friction(*scene.contact, state.x, static_candidates(scene, state.x));
  }
  return ctx;
}

double incremental_potential(const Positions& x, const SimState& state, const Scene& scene,
                             const std::vector<Stencil>* candidates,
                             const std::vector<FrictionPair>* friction) {
  StepContext ctx = make_step_context(state, scene);
  if (friction) ctx.friction = *friction;
  std::vector<Stencil> local;
  if (!candidates) {
    local = static_candidates(scene, x);
    candidates = &local;
  }
  return potential(x, state, scene, ctx, *candidates);
}

NewtonDirection newton_step(const Positions& x, const SimState& state, const Scene& scene,
                            const StepContext& ctx, const std::vector<Stencil>& candidates,
                            double skip_below) {
  BlockAssembler hess(static_cast<int>(x.cols()));
  NewtonDirection out;
  out.gradient = gradient(x, state, scene, ctx, candidates, &hess);
  out.p = Positions::Zero(3, x.cols());
  if (ctx.free_count == 0) return out;
  const Eigen::VectorXd g = free_part(out.gradient, ctx);
  if (g.lpNorm<Eigen::Infinity>() == 0.0) return out;
  if (skip_below > 0.0) {
    double min_mass = std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < ctx.free_index.size(); ++v) {
      if (ctx.free_index[v] >= 0) min_mass = std::min(min_mass, state.masses[v]);
    }
    if (g.norm() <= skip_below * min_mass) return out;
  }

  const Eigen::SparseMatrix<double> h = hess.lower(ctx.free_index, ctx.free_count);
  const double mean_mass = state.masses.mean();
  Eigen::VectorXd p;
  bool ok = false;
  const LinearSolver kind = scene.solver.linear_solver;
  if (kind == LinearSolver::Pcg ||
      (kind == LinearSolver::Auto && hess.block_count() > kAutoDirectBlocks)) {
    ok = solve_pcg(h, -g, scene.solver.pcg_tol, p);
  }
  if (!ok) ok = solve_ldlt(h, -g, mean_mass, p, out.regularization);
  if (!ok) {
    throw SolverError("Newton system could not be solved after regularization up to " +
                      std::to_string(1e6 * mean_mass));
  }
  for (std::size_t v = 0; v < ctx.free_index.size(); ++v) {
    const int f = ctx.free_index[v];
    if (f >= 0) out.p.col(v) = p.segment<3>(3 * f);
  }
  out.decrement = -g.dot(p);
  return out;
}

LineSearchResult line_search(const Positions& x, const Positions& p,
                             double directional_derivative, double energy,
                             const SimState& state, const Scene& scene,
                             const StepContext& ctx,
                             const std::vector<Stencil>& swept_candidates) {
  LineSearchResult r;
  r.ccd_bound = scene_max_step(*scene.contact, x, p, &swept_candidates);
  double alpha = std::min(1.0, r.ccd_bound);
  const double c = scene.solver.armijo_c;
  while (alpha >= 1e-12) {
    const Positions trial = x + alpha * p;
    try {
      const double e = potential(trial, state, scene, ctx, swept_candidates);
      if (std::isfinite(e) && e <= energy + c * alpha * directional_derivative) {
        r.alpha = alpha;
        r.energy = e;
        return r;
      }
    } catch (const InfeasibleError&) {
    } catch (const DegenerateError&) {
    }
    alpha *= scene.solver.step_shrink;
  }
  std::ostringstream msg;
  msg << "line search step underflow (CCD bound " << r.ccd_bound
      << ", directional derivative " << directional_derivative << ")";
  throw SolverError(msg.str());
}

StepStats advance(SimState& state, const Scene& scene) {
  scene.solver.validate();
  const CodimMesh& mesh = *scene.mesh;
  const double dt = scene.solver.dt;
  StepContext ctx = make_step_context(state, scene);
  StepStats stats;

  // Starting point: predictor if reachable, else boundary motion alone.
  Positions x = state.x;
  if (!state.fixed.empty() || state.v.squaredNorm() > 0.0 || scene.gravity.squaredNorm() > 0.0) {
    Positions step = ctx.predictor - state.x;
    auto reachable = [&](const Positions& d) {
      const auto swept = broadphase(mesh, state.x, &d, contact_h(scene));
      return scene_max_step(*scene.contact, state.x, d, &swept) >= 1.0;
    };
    bool moved = false;
    if (reachable(step)) {
      moved = true;
    } else if (!state.fixed.empty()) {
      Positions boundary_only = Positions::Zero(3, x.cols());
      for (int v : state.fixed) boundary_only.col(v) = step.col(v);
      step = boundary_only;
      moved = reachable(step);
      if (!moved) throw SolverError("prescribed boundary motion is blocked by contact");
    }
    if (moved) {
      if (mesh.kind() == MeshKind::Rod) stats.swept_crossings += swept_crossing_count(mesh, x, x + step);
      x += step;
    }
  }

  const double scale = bbox_diagonal(mesh.reference());
  const double stop = scene.solver.newton_tol * dt * scale;
  std::vector<Stencil> candidates = static_candidates(scene, x);
  double energy = potential(x, state, scene, ctx, candidates);
  for (int it = 0; it < scene.solver.max_newton; ++it) {
    const NewtonDirection dir = newton_step(x, state, scene, ctx, candidates, stop);
    stats.final_decrement = dir.decrement;
    const double step_size = dir.p.lpNorm<Eigen::Infinity>();
    if (step_size <= stop) {
      stats.converged = true;
      break;
    }
    const double shrink = std::min(1.0, scene.solver.max_step / step_size);
    const Positions p = shrink * dir.p;
    std::vector<Stencil> swept = broadphase(mesh, x, &p, contact_h(scene));
    const LineSearchResult ls =
        line_search(x, p, -shrink * dir.decrement, energy, state, scene, ctx, swept);
    const Positions next = x + ls.alpha * p;
    if (mesh.kind() == MeshKind::Rod) stats.swept_crossings += swept_crossing_count(mesh, x, next);
    x = next;
    energy = ls.energy;
    // The swept list covers the new point; a long sweep carries many pairs
    // that are far apart again at its end.
    if (swept.size() > 2 * candidates.size()) {
      candidates = static_candidates(scene, x);
    } else {
      candidates = std::move(swept);
    }
    stats.newton_iters = it + 1;
    stats.final_step = ls.alpha * shrink * step_size;
    // A step that moves no coordinate by more than the tolerance cannot make
    // further progress; this happens at kinks of the unmollified distance.
    if (stats.final_step <= stop) {
      stats.converged = true;
      stats.stalled = true;
      break;
    }
  }

  state.v = scene.solver.quasistatic ? Positions::Zero(3, x.cols()) : Positions((x - state.x) / dt);
  state.x = std::move(x);
  state.t += dt;
  return stats;
}

Positions internal_force(const Positions& x, const Scene& scene,
                         const Eigen::VectorXd& masses) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
  scene.elastic->accumulate(x, 1.0, &g, nullptr, false);
  accumulate_contact(*scene.contact, x, static_candidates(scene, x), 1.0, &g, nullptr, false);
  Positions f = -Eigen::Map<const Positions>(g.data(), 3, x.cols());
  for (int v = 0; v < x.cols(); ++v) f.col(v) += masses[v] * scene.gravity;
  return f;
}

RelaxResult relax_to_equilibrium(SimState& state, const Scene& scene, double force_tol,
                                 int max_steps) {
  Scene quasi = scene;
  quasi.solver.quasistatic = true;
  std::vector<char> is_fixed(state.x.cols(), 0);
  for (int v : state.fixed) is_fixed[v] = 1;
  auto residual = [&]() {
    const Positions f = internal_force(state.x, scene, state.masses);
    double r = 0.0;
    for (int v = 0; v < f.cols(); ++v) {
      if (!is_fixed[v]) r = std::max(r, f.col(v).norm());
    }
    return r;
  };
  RelaxResult out;
  out.residual = residual();
  int slow = 0;
  while (out.residual >= force_tol) {
    if (out.steps >= max_steps) {
      std::ostringstream msg;
      msg << "equilibrium relaxation did not converge in " << max_steps
          << " steps (force residual " << out.residual << " N)";
      throw SolverError(msg.str());
    }
    const Positions before = state.x;
    advance(state, quasi);
    ++out.steps;
    out.residual = residual();
    const double speed =
        (state.x - before).colwise().norm().maxCoeff() / quasi.solver.dt;
    slow = speed < 1e-6 ? slow + 1 : 0;
    if (slow >= 5) break;
  }
  out.converged = true;
  return out;
}

double contact_force_norm(const ContactModel& model, const Positions& x) {
  if (x.cols() == 0) return 0.0;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
  const auto pairs = broadphase(model.mesh(), x, nullptr, model.params().h);
  accumulate_contact(model, x, pairs, 1.0, &g, nullptr, false);
  return g.reshaped(3, x.cols()).colwise().norm().maxCoeff();
}

double expansion_ratio(const CodimMesh& mesh, const Positions& x) {
  return total_measure(mesh, x) / total_measure(mesh, mesh.reference());
}

PairDistanceSummary pair_distance_summary(const ContactModel& model, const Positions& x) {
  PairDistanceSummary out;
  const auto pairs = broadphase(model.mesh(), x, nullptr, model.params().h);
  for (const Stencil& s : pairs) {
    if (!model.admissible(s)) continue;
    const double d = pair_distance_value(s.kind, model.mesh().gather(s, x));
    out.min_distance = std::min(out.min_distance, d);
    out.min_margin = std::min(out.min_margin, d - model.activation(s).eta);
  }
  return out;
}

}  // namespace codim
