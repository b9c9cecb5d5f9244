#include <doctest.h>

#include "capsense/reference.hpp"
#include "test_helpers.hpp"

using namespace capsense;

namespace {

double max_abs_diff(const MatX& a, const MatX& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("serial reference and OpenMP assembly agree bitwise") {
  for (const geometry::ShapeSpec spec :
       {geometry::ShapeSpec{"sphere", {1.0}},
        geometry::ShapeSpec{"ellipsoid", {2.0, 1.0, 0.5}}}) {
    const auto quad =
        geometry::build_quadrature(geometry::make_surface(spec), 20);
    const auto par = potential::assemble_all(quad);
    const auto ser = reference::assemble_all_serial(quad);
    CHECK(max_abs_diff(par.S.entries, ser.S.entries) == 0.0);
    CHECK(max_abs_diff(par.K.entries, ser.K.entries) == 0.0);
    CHECK(max_abs_diff(par.Kstar.entries, ser.Kstar.entries) == 0.0);
  }
}

TEST_CASE("results are independent of the worker thread count") {
  const auto surface = geometry::make_surface({"sphere", {1.0}});
  const int saved = thread_count();

  set_thread_count(1);
  const auto q1 = geometry::build_quadrature(surface, 24);
  const auto ops1 = potential::assemble_all(q1);
  const auto eq1 = solver::solve_equilibrium(q1, &ops1.S);

  set_thread_count(2);
  const auto q2 = geometry::build_quadrature(surface, 24);
  const auto ops2 = potential::assemble_all(q2);
  const auto eq2 = solver::solve_equilibrium(q2, &ops2.S);

  set_thread_count(saved);

  // quadrature and assembly are schedule-independent, hence bitwise equal
  CHECK((q1.x - q2.x).cwiseAbs().maxCoeff() == 0.0);
  CHECK((q1.w - q2.w).cwiseAbs().maxCoeff() == 0.0);
  CHECK(max_abs_diff(ops1.S.entries, ops2.S.entries) == 0.0);
  CHECK(max_abs_diff(ops1.K.entries, ops2.K.entries) == 0.0);
  // dense solves must agree to 1e-12 relative across thread counts
  CHECK(std::abs(eq1.capacity - eq2.capacity) <=
        1e-12 * std::abs(eq1.capacity));
  CHECK((eq1.phi0.values - eq2.phi0.values).cwiseAbs().maxCoeff() <=
        1e-12 * eq1.phi0.values.cwiseAbs().maxCoeff());

  // eigen-iterations are matvec-based and must not drift either
  set_thread_count(1);
  const auto v1 = sensitivity::np_spectrum_check(q1, ops1.Kstar, 4);
  set_thread_count(2);
  const auto v2 = sensitivity::np_spectrum_check(q2, ops2.Kstar, 4);
  set_thread_count(saved);
  for (int i = 0; i < 4; ++i)
    CHECK(std::abs(v1[i] - v2[i]) <= 1e-12);
}
