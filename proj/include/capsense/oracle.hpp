#pragma once

#include "capsense/geometry.hpp"
#include "capsense/types.hpp"

namespace capsense::oracle {

/// cap(B_R) = R.
double sphere_capacity(double R);

/// Capacity of the solid ellipsoid with semi-axes a,b,c:
///   2 / integral_0^inf ds / sqrt((a^2+s)(b^2+s)(c^2+s)),
/// evaluated by adaptive quadrature after the substitution s = tan^2 t
/// (absolute tolerance 1e-10).
double ellipsoid_capacity(double a, double b, double c);

/// Same integral by a refined composite midpoint rule; kept as the second,
/// independent route of the dual-quadrature check.
double ellipsoid_capacity_midpoint(double a, double b, double c);

/// Surface area of the ellipsoid by 2-D adaptive quadrature of the standard
/// (non-orthogonal) chart's area element. Independent of the library's
/// quadrature machinery.
double ellipsoid_area(double a, double b, double c);

/// Exterior equilibrium field of the sphere of radius R: u = R/|x|,
/// grad u = -R x/|x|^3. Throws EvaluationError for |x| <= R.
std::pair<double, Vec3> sphere_exterior_field(double R, const Vec3& x);

/// Central-difference shape derivative of the capacity along the normal
/// perturbation profile h, using full equilibrium re-solves at +/- delta.
double fd_capacity_derivative(const geometry::ParametricSurface& surface,
                              const geometry::PerturbationProfile& h,
                              double delta, int resolution);

/// NP eigenvalues of the sphere: lambda_l = 1 / (2 (2l+1)).
double sphere_np_eigenvalue(int l);

}  // namespace capsense::oracle
