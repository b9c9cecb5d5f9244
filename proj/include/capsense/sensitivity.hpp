#pragma once

#include <string>
#include <vector>

#include "capsense/solver.hpp"

namespace capsense::sensitivity {

using geometry::ParametricSurface;
using geometry::PerturbationField;
using geometry::PerturbationProfile;
using geometry::SurfaceQuadrature;
using potential::BoundaryOperatorMatrix;
using potential::DensityVector;
using solver::DirichletSolution;
using solver::EquilibriumSolution;

/// Exterior corrector v: harmonic outside, v = -h du/dn on the boundary,
/// decaying at infinity. dv/dn on the boundary is the solved density.
struct CorrectorSolution {
  DirichletSolution dirichlet;
  const DensityVector& dvdn() const { return dirichlet.phi; }
};

CorrectorSolution solve_corrector(const EquilibriumSolution& eq,
                                  const PerturbationField& h,
                                  const BoundaryOperatorMatrix& S,
                                  const BoundaryOperatorMatrix& K);

/// First-order current prediction pulled back to the base surface:
/// du_eps/dn ~ du/dn + eps (2 tau h du/dn + dv/dn).
DensityVector predict_current(const EquilibriumSolution& eq,
                              const CorrectorSolution& corrector,
                              const PerturbationField& h, double eps);

/// T1 = (1/4pi) sum_i h_i phi0_i^2 w_i, the first-order capacity coefficient;
/// cap(Omega_eps) ~ cap(Omega) + eps T1.
double capacity_first_order(const EquilibriumSolution& eq,
                            const PerturbationField& h);

/// u_eps(x) ~ u(x) + eps T1 / |x| at far exterior points
/// (|x| >= 50 * diameter).
double predict_farfield(const EquilibriumSolution& eq,
                        const PerturbationField& h, double eps, const Vec3& x);

/// First eigenvector of K* at eigenvalue 1/2: the equilibrium density
/// normalized in the weighted discrete L2 norm.
DensityVector np_first_eigenvector(const EquilibriumSolution& eq);

/// First-order prediction of the perturbed eigenvector pulled back:
/// phi0 + 2 eps tau h phi0 + eps vt - eps <tau h phi0 + vt, phi0>_w phi0,
/// with vt = (dv/dn)/||du/dn||_w and phi0 the normalized eigenvector.
DensityVector predict_eigenvector(const EquilibriumSolution& eq,
                                  const CorrectorSolution& corrector,
                                  const PerturbationField& h, double eps);

/// Ground truth on the perturbed surface: the same parameter nodes pushed
/// through Psi_eps and re-solved, so pullback is node-index identity.
struct PerturbedResolve {
  double eps = 0.0;
  SurfaceQuadrature quad;
  EquilibriumSolution eq;
};

PerturbedResolve resolve_perturbed(const EquilibriumSolution& base,
                                   const PerturbationProfile& h, double eps);

/// Integral pairing of the eigenvector perturbation:
///   lhs  = sum_i (phi0_eps(x_i~) - phi0(x_i)) phi0(x_i) w_i   (base weights)
///   rhs1 = eps sum_i tau_i h_i phi0_i^2 w_i
/// with phi0_eps normalized on the perturbed surface and sign-aligned.
std::pair<double, double> eigenvector_pairing(const EquilibriumSolution& eq,
                                              const PerturbationField& h,
                                              const PerturbedResolve& truth);
std::pair<double, double> eigenvector_pairing(const EquilibriumSolution& eq,
                                              const PerturbationProfile& h,
                                              double eps);

/// `count` largest-magnitude eigenvalues of the discrete K*, descending.
/// Uses the weighted similarity transform to a symmetric problem on exact
/// spheres and a nonsymmetric subspace iteration otherwise.
std::vector<double> np_spectrum_check(const SurfaceQuadrature& quad, int count);
std::vector<double> np_spectrum_check(const SurfaceQuadrature& quad,
                                      const BoundaryOperatorMatrix& Kstar,
                                      int count);

enum class StudyKind { Current, Capacity, FarField, Eigenvector, Pairing };

StudyKind study_kind_from_name(const std::string& name);
std::string study_kind_name(StudyKind kind);

struct StudyConfig {
  int resolution = 48;
  int floor_resolution = 0;       // 0 -> 3/2 of resolution
  double farfield_radius = 0.0;   // 0 -> 50 * diameter
  double slope_lo = 1.7, slope_hi = 2.3;
};

/// Predicted-vs-resolved sweep over the epsilon list with a fitted
/// convergence order. Residuals below 10x the discretization-error floor
/// (capacity self-error between the study resolution and floor_resolution on
/// the unperturbed surface, scaled to the quantity) are excluded from the
/// fit; if fewer than two residuals survive, the verdict is "floor-limited".
struct ExpansionReport {
  StudyKind kind = StudyKind::Capacity;
  std::vector<double> eps;
  std::vector<double> predicted;   // scalar kinds: values; vector kinds: ||pred||_w
  std::vector<double> truth;
  std::vector<double> residual;
  std::vector<double> zeroth_residual;  // ||truth - base||_w (current/eigenvector)
  double floor = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
  double zeroth_slope = 0.0;
  std::vector<int> used_in_fit;
  std::string verdict;  // "pass" | "fail" | "floor-limited"
  double slope_lo = 1.7, slope_hi = 2.3;
};

ExpansionReport run_expansion_study(StudyKind kind,
                                    const ParametricSurface& surface,
                                    const PerturbationProfile& h,
                                    const std::vector<double>& eps,
                                    const StudyConfig& config = {});

/// Least-squares slope of log|residual| against log(eps) over the given
/// index subset.
double fit_log_slope(const std::vector<double>& eps,
                     const std::vector<double>& residual,
                     const std::vector<int>& subset, double* intercept = nullptr);

}  // namespace capsense::sensitivity
