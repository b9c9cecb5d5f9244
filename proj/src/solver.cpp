#include "capsense/solver.hpp"

#include <cmath>
#include <iostream>

namespace capsense::solver {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kCondWarn = 1e8;
constexpr double kCondFail = 1e12;

Eigen::PartialPivLU<MatX> factorize_checked(const MatX& S) {
  Eigen::PartialPivLU<MatX> lu(S);
  const double rc = lu.rcond();
  const double cond = rc > 0 ? 1.0 / rc : std::numeric_limits<double>::infinity();
  if (cond > kCondFail)
    throw ConditioningError(
        "single-layer system too ill-conditioned (estimate " +
            std::to_string(cond) + ")",
        cond);
  if (cond > kCondWarn)
    std::cerr << "capsense: warning: single-layer condition estimate " << cond
              << "\n";
  return lu;
}
}  // namespace

EquilibriumSolution solve_equilibrium(const SurfaceQuadrature& quad,
                                      const BoundaryOperatorMatrix* S) {
  BoundaryOperatorMatrix local;
  if (S == nullptr) {
    local = potential::assemble_S(quad);
    S = &local;
  }
  if (S->quad_id != quad.id)
    throw MismatchError("S bound to a different quadrature");
  auto lu = factorize_checked(S->entries);
  EquilibriumSolution out;
  out.quad = quad;
  out.rcond = lu.rcond();
  out.phi0 = DensityVector(lu.solve(VecX::Ones(quad.size())), quad);
  out.capacity = -out.phi0.values.dot(quad.w) / (4.0 * kPi);
  return out;
}

DirichletSolution solve_exterior_dirichlet(const SurfaceQuadrature& quad,
                                           const DensityVector& f,
                                           const BoundaryOperatorMatrix& S,
                                           const BoundaryOperatorMatrix& K) {
  if (f.quad_id != quad.id)
    throw MismatchError("boundary data bound to a different quadrature");
  if (S.quad_id != quad.id || K.quad_id != quad.id)
    throw MismatchError("operator bound to a different quadrature");
  DirichletSolution out;
  out.quad = quad;
  out.f = f;
  const VecX rhs = 0.5 * f.values + K.entries * f.values;
  auto lu = factorize_checked(S.entries);
  out.phi = DensityVector(lu.solve(rhs), quad);
  return out;
}

DirichletSolution solve_exterior_dirichlet(const SurfaceQuadrature& quad,
                                           const DensityVector& f) {
  const auto ops = potential::assemble_all(quad);
  return solve_exterior_dirichlet(quad, f, ops.S, ops.K);
}

double eval_potential(const EquilibriumSolution& sol, const Vec3& x) {
  return potential::eval_single_layer(sol.quad, sol.phi0, x);
}

double eval_potential(const DirichletSolution& sol, const Vec3& x) {
  return potential::eval_single_layer(sol.quad, sol.phi, x) -
         potential::eval_double_layer(sol.quad, sol.f, x);
}

double far_field_coefficient(const EquilibriumSolution& sol,
                             double sample_radius) {
  if (sample_radius < 50.0 * sol.quad.surface.diameter)
    throw ConfigError("far-field sample radius below 50 surface diameters");
  double acc = 0.0;
  int count = 0;
  for (int ix = -1; ix <= 1; ++ix)
    for (int iy = -1; iy <= 1; ++iy)
      for (int iz = -1; iz <= 1; ++iz) {
        if (ix == 0 && iy == 0 && iz == 0) continue;
        Vec3 dir(ix, iy, iz);
        dir.normalize();
        const Vec3 x = sample_radius * dir;
        acc += sample_radius * eval_potential(sol, x);
        ++count;
      }
  return acc / count;
}

}  // namespace capsense::solver
