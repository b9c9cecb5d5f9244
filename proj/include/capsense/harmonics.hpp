#pragma once

#include "capsense/types.hpp"

namespace capsense {

/// Real orthonormal spherical harmonics up to degree 4 (no Condon-Shortley
/// phase), normalized so that the square integrates to 1 over the unit
/// sphere. solid_harmonic returns the degree-l homogeneous polynomial
/// r^l * Y_lm(x/r); the table of coefficients was generated symbolically and
/// each entry is verified harmonic and unit-norm by the tests.
inline constexpr int kMaxHarmonicDegree = 4;

double solid_harmonic(int l, int m, const Vec3& x);
Vec3 solid_harmonic_gradient(int l, int m, const Vec3& x);

/// Y_lm evaluated on the direction of x (any nonzero x).
double sphere_harmonic(int l, int m, const Vec3& x);

/// Ambient gradient of x -> Y_lm(x/|x|), i.e. of the degree-0 homogeneous
/// extension. Tangential to spheres centered at the origin.
Vec3 sphere_harmonic_gradient(int l, int m, const Vec3& x);

}  // namespace capsense
