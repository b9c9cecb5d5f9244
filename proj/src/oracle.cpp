#include "capsense/oracle.hpp"

#include <cmath>
#include <functional>

#include "capsense/solver.hpp"

namespace capsense::oracle {

namespace {

constexpr double kPi = std::numbers::pi;

double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double fa, double fm, double fb, double whole,
                        double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 48);
}

// integrand of the capacity integral after s = tan^2 t (smooth on [0,pi/2])
std::function<double(double)> capacity_integrand(double a, double b, double c) {
  return [a, b, c](double t) {
    const double ct = std::cos(t), st = std::sin(t);
    if (ct == 0.0) return 2.0;  // limit value as t -> pi/2
    const double tn2 = st * st / (ct * ct);
    const double val = 2.0 * st / (ct * ct * ct) /
                       std::sqrt((a * a + tn2) * (b * b + tn2) * (c * c + tn2));
    return val;
  };
}

void check_axes(double a, double b, double c) {
  if (!(a > 0) || !(b > 0) || !(c > 0))
    throw ConfigError("ellipsoid semi-axes must be positive");
}

}  // namespace

double sphere_capacity(double R) {
  if (!(R > 0)) throw ConfigError("sphere radius must be positive");
  return R;
}

double ellipsoid_capacity(double a, double b, double c) {
  check_axes(a, b, c);
  return 2.0 / integrate(capacity_integrand(a, b, c), 0.0, kPi / 2, 1e-10);
}

double ellipsoid_capacity_midpoint(double a, double b, double c) {
  check_axes(a, b, c);
  const auto f = capacity_integrand(a, b, c);
  double prev = 0.0;
  for (int n = 64; n <= (1 << 22); n *= 2) {
    const double h = (kPi / 2) / n;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += f((i + 0.5) * h);
    acc *= h;
    if (n > 64 && std::abs(acc - prev) < 0.5e-9) return 2.0 / acc;
    prev = acc;
  }
  return 2.0 / prev;
}

double ellipsoid_area(double a, double b, double c) {
  check_axes(a, b, c);
  auto area_element = [a, b, c](double xi, double th) {
    const double sx = std::sin(xi), cx = std::cos(xi);
    const double st = std::sin(th), ct = std::cos(th);
    const Vec3 xxi{a * cx * ct, b * cx * st, -c * sx};
    const Vec3 xth{-a * sx * st, b * sx * ct, 0.0};
    return xxi.cross(xth).norm();
  };
  auto inner = [&](double th) {
    return integrate([&](double xi) { return area_element(xi, th); }, 0.0, kPi,
                     1e-11);
  };
  return integrate(inner, 0.0, 2 * kPi, 1e-9);
}

std::pair<double, Vec3> sphere_exterior_field(double R, const Vec3& x) {
  if (!(R > 0)) throw ConfigError("sphere radius must be positive");
  const double r = x.norm();
  if (r <= R) throw EvaluationError("field requested inside the sphere");
  return {R / r, (-R / (r * r * r)) * x};
}

double fd_capacity_derivative(const geometry::ParametricSurface& surface,
                              const geometry::PerturbationProfile& h,
                              double delta, int resolution) {
  if (!(delta > 0)) throw ConfigError("finite-difference step must be positive");
  const auto plus = geometry::perturb_surface(surface, h, delta);
  const auto minus = geometry::perturb_surface(surface, h, -delta);
  const double cap_p =
      solver::solve_equilibrium(geometry::build_quadrature(plus, resolution))
          .capacity;
  const double cap_m =
      solver::solve_equilibrium(geometry::build_quadrature(minus, resolution))
          .capacity;
  return (cap_p - cap_m) / (2.0 * delta);
}

double sphere_np_eigenvalue(int l) {
  if (l < 0) throw ConfigError("NP eigenvalue index must be nonnegative");
  return 1.0 / (2.0 * (2 * l + 1));
}

}  // namespace capsense::oracle
