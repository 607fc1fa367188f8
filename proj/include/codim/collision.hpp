#pragma once

#include "codim/contact.hpp"
#include "codim/spatial_hash.hpp"

namespace codim {

struct CcdQuery {
  PairKind kind = PairKind::PointPoint;
  StencilPoints<double> x0 = StencilPoints<double>::Zero();
  StencilPoints<double> dx = StencilPoints<double>::Zero();
  double offset = 0.0;
  double slack = 0.1;
  int max_iterations = 10000;
};

// Additive conservative advancement. Returns the largest verified fraction of
// dx in (0, 1] that keeps the gap above slack times the initial gap. Throws
// InfeasibleError when the start is at or inside the offset.
double accd_max_step(const CcdQuery& q);

// Minimum ACCD step over admissible candidates of the sweep x -> x + p, each
// with its own offset. When candidates is null the broadphase is run here.
double scene_max_step(const ContactModel& model, const Positions& x,
                      const Positions& p,
                      const std::vector<Stencil>* candidates = nullptr);

// Rods: non-adjacent segment pairs closer than 1e-12. Shells: crossings of
// an edge through a triangle that shares no vertex with it.
int intersection_count(const CodimMesh& mesh, const Positions& x);

// Rods only: non-adjacent segment pairs that pass through each other during
// the linear motion x0 -> x1.
int swept_crossing_count(const CodimMesh& mesh, const Positions& x0,
                         const Positions& x1);

}  // namespace codim
