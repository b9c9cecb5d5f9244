#pragma once

#include "capsense/potential.hpp"

namespace capsense::solver {

using geometry::SurfaceQuadrature;
using potential::BoundaryOperatorMatrix;
using potential::DensityVector;

/// Equilibrium state of the isolated conductor: density phi0 = du/dn solving
/// S[phi0] = 1 on the boundary, and the Gauss-integral capacity
/// cap = -(1/4pi) sum_i phi0_i w_i.
struct EquilibriumSolution {
  DensityVector phi0;
  double capacity = 0.0;
  double rcond = 0.0;   // reciprocal condition estimate of the dense S solve
  SurfaceQuadrature quad;
};

/// Direct dense solve of the first-kind equation S[phi0] = 1. Emits a
/// warning to stderr when the condition estimate exceeds 1e8 and throws
/// ConditioningError above 1e12. Reuses a pre-assembled S when given.
EquilibriumSolution solve_equilibrium(const SurfaceQuadrature& quad,
                                      const BoundaryOperatorMatrix* S = nullptr);

/// Exterior Dirichlet solution w with boundary data f, represented as
/// w = S[phi] - D[f] off-surface with S[phi] = (1/2 I + K)[f] on-surface and
/// phi = dw/dn|+.
struct DirichletSolution {
  DensityVector f;
  DensityVector phi;
  SurfaceQuadrature quad;
};

DirichletSolution solve_exterior_dirichlet(const SurfaceQuadrature& quad,
                                           const DensityVector& f,
                                           const BoundaryOperatorMatrix& S,
                                           const BoundaryOperatorMatrix& K);
DirichletSolution solve_exterior_dirichlet(const SurfaceQuadrature& quad,
                                           const DensityVector& f);

/// Potential values strictly outside the surface (NearFieldError inside the
/// quadrature's near-field margin).
double eval_potential(const EquilibriumSolution& sol, const Vec3& x);
double eval_potential(const DirichletSolution& sol, const Vec3& x);

/// Far-field 1/|x| coefficient: average of |x| u(x) over the 26 directions
/// of the {-1,0,1}^3 \ {0} stencil at the sample radius. Requires
/// sample_radius >= 50 * surface diameter.
double far_field_coefficient(const EquilibriumSolution& sol,
                             double sample_radius);

}  // namespace capsense::solver
