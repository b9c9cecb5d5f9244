#include "capsense/reference.hpp"

namespace capsense::reference {

using geometry::SurfaceQuadrature;
using potential::BoundaryOperatorMatrix;
using potential::OperatorKind;
using potential::OperatorSet;

// Serial mirror of potential::assemble_all: one flat loop over target nodes,
// no pragmas, same entry formulas and accumulation order.
OperatorSet assemble_all_serial(const SurfaceQuadrature& quad) {
  const int N = quad.size();
  OperatorSet ops;
  ops.S.entries.resize(N, N);
  ops.K.entries.resize(N, N);
  std::vector<double> srow(static_cast<size_t>(N)), krow(srow);

  for (int i = 0; i < N; ++i) {
    const Vec3 xi = quad.x.row(i);
    const Vec3 ni = quad.n.row(i);
    for (int j = 0; j < N; ++j) {
      if (j == i) {
        srow[j] = 0.0;
        krow[j] = 0.0;
        continue;
      }
      potential::detail::plain_entries(quad, i, j, &srow[j], &krow[j]);
      if (potential::needs_patch_correction(quad, i, j)) {
        srow[j] = potential::cell_patch_integral(
            quad, j, xi, potential::PatchKernel::SingleLayer);
        krow[j] = potential::cell_patch_integral(
            quad, j, xi, potential::PatchKernel::DoubleLayer);
      }
    }
    double ksum = 0.0;
    for (int j = 0; j < N; ++j) ksum += krow[j];
    krow[i] = 0.5 - ksum;
    double rhs = -0.5 * ni.dot(xi);
    double off = 0.0;
    for (int j = 0; j < N; ++j) {
      rhs += krow[j] * ni.dot(Vec3(quad.x.row(j)));
      if (j != i) off += srow[j] * ni.dot(Vec3(quad.n.row(j)));
    }
    srow[i] = rhs - off;
    for (int j = 0; j < N; ++j) {
      ops.S.entries(i, j) = srow[j];
      ops.K.entries(i, j) = krow[j];
    }
  }

  ops.S.kind = OperatorKind::S;
  ops.K.kind = OperatorKind::K;
  ops.S.quad_id = ops.K.quad_id = quad.id;
  ops.Kstar.kind = OperatorKind::Kstar;
  ops.Kstar.quad_id = quad.id;
  ops.Kstar.entries = quad.w.cwiseInverse().asDiagonal() *
                      ops.K.entries.transpose() * quad.w.asDiagonal();
  return ops;
}

}  // namespace capsense::reference
