// Benchmark of the OpenMP operator assembly against the serial reference,
// plus a parity check that both produce identical matrices.
#include <chrono>
#include <cstring>
#include <iostream>

#include "capsense/reference.hpp"

using namespace capsense;

namespace {

double seconds(std::chrono::steady_clock::time_point a,
               std::chrono::steady_clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

int run_case(const char* shape_name, const geometry::ShapeSpec& spec, int res,
             int reps) {
  const auto surface = geometry::make_surface(spec);
  const auto quad = geometry::build_quadrature(surface, res);

  double t_par = 1e300, t_ser = 1e300;
  potential::OperatorSet par, ser;
  for (int r = 0; r < reps; ++r) {
    const auto a = std::chrono::steady_clock::now();
    par = potential::assemble_all(quad);
    const auto b = std::chrono::steady_clock::now();
    ser = reference::assemble_all_serial(quad);
    const auto c = std::chrono::steady_clock::now();
    t_par = std::min(t_par, seconds(a, b));
    t_ser = std::min(t_ser, seconds(b, c));
  }

  const bool same = par.S.entries == ser.S.entries &&
                    par.K.entries == ser.K.entries &&
                    par.Kstar.entries == ser.Kstar.entries;
  std::printf("%-18s res %3d nodes %6d  serial %8.3fs  openmp(%d) %8.3fs  speedup %5.2fx  bitwise %s\n",
              shape_name, res, quad.size(), t_ser, thread_count(), t_par,
              t_ser / t_par, same ? "OK" : "MISMATCH");
  return same ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  const bool smoke = argc > 1 && std::strcmp(argv[1], "--smoke") == 0;
  int rc = 0;
  if (smoke) {
    rc |= run_case("sphere", {"sphere", {1.0}}, 16, 1);
    rc |= run_case("ellipsoid", {"ellipsoid", {2.0, 1.0, 0.5}}, 16, 1);
    return rc;
  }
  for (int res : {24, 32, 48, 64}) rc |= run_case("sphere", {"sphere", {1.0}}, res, 2);
  for (int res : {24, 32, 48}) rc |= run_case("ellipsoid", {"ellipsoid", {2.0, 1.0, 0.5}}, res, 2);
  return rc;
}
