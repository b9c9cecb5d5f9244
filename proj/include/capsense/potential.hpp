#pragma once

#include <cstdint>

#include "capsense/geometry.hpp"
#include "capsense/types.hpp"

namespace capsense::potential {

using geometry::PerturbationField;
using geometry::SurfaceQuadrature;

/// Nodal values of a boundary density, bound to the quadrature it was
/// sampled on.
struct DensityVector {
  VecX values;
  std::uint64_t quad_id = 0;

  DensityVector() = default;
  DensityVector(VecX v, const SurfaceQuadrature& q)
      : values(std::move(v)), quad_id(q.id) {}
};

enum class OperatorKind { S, K, Kstar, S1, K1 };

/// Dense Nystrom discretization of a boundary operator. Immutable after
/// assembly and safe to share between threads.
struct BoundaryOperatorMatrix {
  MatX entries;
  OperatorKind kind = OperatorKind::S;
  std::uint64_t quad_id = 0;

  DensityVector apply(const DensityVector& d) const {
    if (d.quad_id != quad_id)
      throw MismatchError("density bound to a different quadrature");
    DensityVector out;
    out.values = entries * d.values;
    out.quad_id = quad_id;
    return out;
  }
};

/// Laplace fundamental solution Gamma(x) = -1/(4 pi |x|).
inline double fundamental_solution(const Vec3& d) {
  return -1.0 / (4.0 * std::numbers::pi * d.norm());
}

/// Single layer, NP operator K and its adjoint K*.
///
/// Weakly singular diagonals are completed by exact row-sum identities
/// evaluated on smooth anchor densities:
///   K:  K[1] = 1/2 (exact for the constant density);
///   S:  S[d(n_i . y)/dn] = (-1/2 I + K)[n_i . y], the boundary trace of
///       Green's representation for the interior-harmonic function n_i . y,
///       whose anchor density n_i . n(y) equals 1 at the target node.
/// Both rules absorb the local quadrature defect of the punctured sum at the
/// node where the kernel is singular.
BoundaryOperatorMatrix assemble_S(const SurfaceQuadrature& quad);
BoundaryOperatorMatrix assemble_K(const SurfaceQuadrature& quad);

/// K* as the transpose of K in the weighted discrete inner product
/// <a,b>_w = sum_i a_i b_i w_i, so the adjoint identity holds exactly.
BoundaryOperatorMatrix assemble_Kstar(const SurfaceQuadrature& quad,
                                      const BoundaryOperatorMatrix& K);
BoundaryOperatorMatrix assemble_Kstar(const SurfaceQuadrature& quad);

struct OperatorSet {
  BoundaryOperatorMatrix S, K, Kstar;
};
/// Assembles S, K and K* in one pass over the kernel evaluations.
OperatorSet assemble_all(const SurfaceQuadrature& quad);

/// Off-surface potentials by direct quadrature. Both throw NearFieldError
/// when x is closer to the surface than twice the local node spacing;
/// callers must refine or use an on-surface path.
double eval_single_layer(const SurfaceQuadrature& quad, const DensityVector& d,
                         const Vec3& x);
double eval_double_layer(const SurfaceQuadrature& quad, const DensityVector& d,
                         const Vec3& x);

/// Exterior trace of the normal derivative of the single layer,
/// (1/2 I + K*)[phi] (jump relation, "+" side).
DensityVector exterior_normal_derivative_S(const BoundaryOperatorMatrix& Kstar,
                                           const DensityVector& phi);

/// First-order perturbed single layer
///   S1[psi] = -2 S[tau h psi] + h d(S[psi])/dn|+ + D[h psi]|+ .
BoundaryOperatorMatrix assemble_S1(const SurfaceQuadrature& quad,
                                   const PerturbationField& h,
                                   const BoundaryOperatorMatrix& S,
                                   const BoundaryOperatorMatrix& K,
                                   const BoundaryOperatorMatrix& Kstar);

/// First-order perturbed normal derivative of the single layer
///   K1[psi] = 2 (tau h d(S[psi])/dn - d(S[tau h psi])/dn)|+
///           + d(D[h psi])/dn
///           - (1/sqrt(det G)) div( h sqrt(det G) G^{-1} grad S[psi] ).
/// The hypersingular middle term is evaluated through the representation
/// formula: d(D[g])/dn|+ = S^{-1} (1/2 I + K)(-1/2 I + K)[g], which has no
/// jump across the surface.
BoundaryOperatorMatrix assemble_K1(const SurfaceQuadrature& quad,
                                   const PerturbationField& h,
                                   const BoundaryOperatorMatrix& S,
                                   const BoundaryOperatorMatrix& K,
                                   const BoundaryOperatorMatrix& Kstar);

/// Polar-coordinate patch integral of a layer kernel over one node's
/// (xi,theta) tensor cell, aimed at an arbitrary target point. The polar
/// Jacobian cancels the 1/|x-y| singularity when the target sits in the
/// cell. kind selects the Gamma kernel (S) or its source-normal derivative
/// (D).
enum class PatchKernel { SingleLayer, DoubleLayer };
double cell_patch_integral(const SurfaceQuadrature& quad, int node,
                           const Vec3& target, PatchKernel kind);

/// Self-cell patch rule for the weakly singular diagonal of S (the target is
/// the node itself). Kept as an independent reference for the row-sum
/// completion used by assemble_S.
double polar_patch_self_integral(const SurfaceQuadrature& quad, int node);

/// Evaluation rows for targets inside the near-field margin: plain weighted
/// kernels with every cell within two local spacings of the target replaced
/// by its patch integral. The dot product with nodal density values gives
/// the potential; the jump-relation checks reuse rows across densities.
VecX single_layer_eval_row(const SurfaceQuadrature& quad, const Vec3& x);
VecX double_layer_eval_row(const SurfaceQuadrature& quad, const Vec3& x);

double eval_single_layer_near(const SurfaceQuadrature& quad,
                              const DensityVector& d, const Vec3& x);
double eval_double_layer_near(const SurfaceQuadrature& quad,
                              const DensityVector& d, const Vec3& x);

/// Weighted discrete inner product and norm on a quadrature.
double inner_w(const SurfaceQuadrature& quad, const VecX& a, const VecX& b);
double norm_w(const SurfaceQuadrature& quad, const VecX& a);

/// True when the (target i, source j) pair is close in space but far apart
/// in index space -- the signature of the umbilical fold arcs of the
/// curvature-line ellipsoid chart, where the plain punctured sum is
/// unresolved. Such entries are replaced by patch integrals of the kernel
/// over the source cell; only midpoint-sampled charts qualify because there
/// the node weight equals the cell measure exactly.
bool needs_patch_correction(const SurfaceQuadrature& quad, int i, int j);

namespace detail {
/// Plain Nystrom entries (source weight times kernel) for S and K at one
/// (target, source) pair; shared by the OpenMP assembly and the serial
/// reference so that both produce bitwise-identical matrices.
void plain_entries(const SurfaceQuadrature& quad, int i, int j, double* s_entry,
                   double* k_entry);
}  // namespace detail

}  // namespace capsense::potential
