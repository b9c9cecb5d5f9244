#include "capsense/potential.hpp"

#include <cmath>
#include <limits>

namespace capsense::potential {

namespace {

constexpr double kPi = std::numbers::pi;

inline double kernel_S(const Vec3& x, const Vec3& y) {
  return -1.0 / (4.0 * kPi * (x - y).norm());
}

// d(Gamma(x-y))/dn(y); PV trace on the surface is the K kernel
inline double kernel_D(const Vec3& x, const Vec3& y, const Vec3& ny) {
  const Vec3 d = x - y;
  const double r = d.norm();
  return (ny.dot(-d)) / (4.0 * kPi * r * r * r);
}

// 12-point Gauss-Legendre on (-1,1)
constexpr int kGL = 12;
const double* gl_nodes() {
  static const double v[kGL] = {
      -0.9815606342467192, -0.9041172563704749, -0.7699026741943047,
      -0.5873179542866175, -0.3678314989981802, -0.1252334085114689,
      0.1252334085114689,  0.3678314989981802,  0.5873179542866175,
      0.7699026741943047,  0.9041172563704749,  0.9815606342467192};
  return v;
}
const double* gl_weights() {
  static const double v[kGL] = {
      0.0471753363865118, 0.1069393259953184, 0.1600783285433462,
      0.2031674267230659, 0.2334925365383548, 0.2491470458134028,
      0.2491470458134028, 0.2334925365383548, 0.2031674267230659,
      0.1600783285433462, 0.1069393259953184, 0.0471753363865118};
  return v;
}

int grid_of(const SurfaceQuadrature& quad, int node) {
  return quad.chart_id[node];
}

}  // namespace

double cell_patch_integral(const SurfaceQuadrature& quad, int node,
                           const Vec3& target, PatchKernel kind) {
  const auto& g = quad.grids[grid_of(quad, node)];
  const auto& chart = quad.surface.charts[g.chart];
  const int local = node - g.node_offset;
  const int ixi = local / g.n_theta;
  const double xi0 = quad.xi[node];
  const double th0 = quad.theta[node];
  const double xa = g.xi_cell_lo[ixi], xb = g.xi_cell_hi[ixi];
  const double ya = th0 - 0.5 * g.theta_step, yb = th0 + 0.5 * g.theta_step;

  const double* gx = gl_nodes();
  const double* gw = gl_weights();
  const double dist = (target - Vec3(quad.x.row(node))).norm();

  double total = 0.0;
  const double corner_x[2] = {xb - xi0, xi0 - xa};   // extents, signed below
  const double corner_y[2] = {yb - th0, th0 - ya};
  for (int qx = 0; qx < 2; ++qx) {
    const double sx = qx == 0 ? 1.0 : -1.0;
    const double A = corner_x[qx];
    for (int qy = 0; qy < 2; ++qy) {
      const double sy = qy == 0 ? 1.0 : -1.0;
      const double B = corner_y[qy];
      if (A <= 0 || B <= 0) continue;
      const double split = std::atan2(B, A);
      const double wedge[2][2] = {{0.0, split}, {split, kPi / 2}};
      for (int wdg = 0; wdg < 2; ++wdg) {
        const double a0 = wedge[wdg][0], a1 = wedge[wdg][1];
        if (a1 <= a0) continue;
        for (int ia = 0; ia < kGL; ++ia) {
          const double alpha = 0.5 * (a0 + a1) + 0.5 * (a1 - a0) * gx[ia];
          const double wa = 0.5 * (a1 - a0) * gw[ia];
          const double rmax =
              wdg == 0 ? A / std::cos(alpha) : B / std::sin(alpha);
          // split the radial integral at the off-surface distance scale so
          // targets hovering above the cell stay resolved
          double rsplit = rmax;
          if (dist > 0 && 4.0 * dist < rmax) rsplit = 4.0 * dist;
          const double seg[2][2] = {{0.0, rsplit}, {rsplit, rmax}};
          double acc = 0.0;
          for (int s = 0; s < 2; ++s) {
            const double r0 = seg[s][0], r1 = seg[s][1];
            if (r1 <= r0) continue;
            for (int ir = 0; ir < kGL; ++ir) {
              const double rho = 0.5 * (r0 + r1) + 0.5 * (r1 - r0) * gx[ir];
              const double wr = 0.5 * (r1 - r0) * gw[ir];
              const double xi = xi0 + sx * rho * std::cos(alpha);
              const double th = th0 + sy * rho * std::sin(alpha);
              const geometry::ChartJet j = chart.jet(xi, th);
              const Vec3 W = j.x_xi.cross(j.x_theta);
              const double J = W.norm();
              double k;
              if (kind == PatchKernel::SingleLayer)
                k = kernel_S(target, j.x);
              else
                k = kernel_D(target, j.x, W / J);
              acc += wr * k * J * rho;
            }
          }
          total += wa * acc;
        }
      }
    }
  }
  return total;
}

double polar_patch_self_integral(const SurfaceQuadrature& quad, int node) {
  return cell_patch_integral(quad, node, quad.x.row(node),
                             PatchKernel::SingleLayer);
}

namespace detail {

void plain_entries(const SurfaceQuadrature& quad, int i, int j, double* s_entry,
                   double* k_entry) {
  const Vec3 d = Vec3(quad.x.row(i)) - Vec3(quad.x.row(j));
  const double r = d.norm();
  const double w = quad.w[j];
  *s_entry = -w / (4.0 * kPi * r);
  *k_entry = w * Vec3(quad.n.row(j)).dot(-d) / (4.0 * kPi * r * r * r);
}

}  // namespace detail

bool needs_patch_correction(const SurfaceQuadrature& quad, int i, int j) {
  const int cj = quad.chart_id[j];
  if (quad.surface.charts[cj].sampling != geometry::XiSampling::MidpointXi)
    return false;
  if (quad.chart_id[i] != cj) return true;
  const auto& g = quad.grids[cj];
  const int li = i - g.node_offset, lj = j - g.node_offset;
  const int dxi = std::abs(li / g.n_theta - lj / g.n_theta);
  int dth = std::abs(li % g.n_theta - lj % g.n_theta);
  dth = std::min(dth, g.n_theta - dth);
  if (dxi <= 3 && dth <= 3) return false;
  const double dist = (Vec3(quad.x.row(i)) - Vec3(quad.x.row(j))).norm();
  if (dist >= 2.0 * std::max(quad.spacing[i], quad.spacing[j])) return false;
  // fold signature: much closer in space than the index offset implies
  const double exi = 0.5 * (quad.spacing_xi[i] + quad.spacing_xi[j]);
  const double eth = 0.5 * (quad.spacing_theta[i] + quad.spacing_theta[j]);
  const double implied = std::hypot(dxi * exi, dth * eth);
  return dist < 0.5 * implied;
}

namespace {

// Assembly core for one target node: plain entries, fold-arc patch
// corrections, then the row-sum diagonal for K and the anchored diagonal
// S[n_i . n(y)](x_i) = (-1/2 I + K)[n_i . y](x_i) for S.
void assemble_row(const SurfaceQuadrature& quad, int i, double* srow,
                  double* krow) {
  const int N = quad.size();
  const Vec3 xi = quad.x.row(i);
  const Vec3 ni = quad.n.row(i);
  for (int j = 0; j < N; ++j) {
    if (j == i) {
      srow[j] = 0.0;
      krow[j] = 0.0;
      continue;
    }
    detail::plain_entries(quad, i, j, &srow[j], &krow[j]);
    if (needs_patch_correction(quad, i, j)) {
      srow[j] = cell_patch_integral(quad, j, xi, PatchKernel::SingleLayer);
      krow[j] = cell_patch_integral(quad, j, xi, PatchKernel::DoubleLayer);
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
}

}  // namespace

OperatorSet assemble_all(const SurfaceQuadrature& quad) {
  const int N = quad.size();
  OperatorSet ops;
  ops.S.entries.resize(N, N);
  ops.K.entries.resize(N, N);
  std::vector<double> srow(static_cast<size_t>(N)), krow(srow);
#pragma omp parallel for schedule(static) firstprivate(srow, krow)
  for (int i = 0; i < N; ++i) {
    assemble_row(quad, i, srow.data(), krow.data());
    for (int j = 0; j < N; ++j) {
      ops.S.entries(i, j) = srow[j];
      ops.K.entries(i, j) = krow[j];
    }
  }
  ops.S.kind = OperatorKind::S;
  ops.K.kind = OperatorKind::K;
  ops.S.quad_id = ops.K.quad_id = quad.id;
  ops.Kstar = assemble_Kstar(quad, ops.K);
  return ops;
}

BoundaryOperatorMatrix assemble_S(const SurfaceQuadrature& quad) {
  return assemble_all(quad).S;
}

BoundaryOperatorMatrix assemble_K(const SurfaceQuadrature& quad) {
  // one shared code path with assemble_all keeps the discretization rules
  // (fold corrections, row-sum diagonal) in a single place
  return assemble_all(quad).K;
}

BoundaryOperatorMatrix assemble_Kstar(const SurfaceQuadrature& quad,
                                      const BoundaryOperatorMatrix& K) {
  if (K.quad_id != quad.id)
    throw MismatchError("K bound to a different quadrature");
  BoundaryOperatorMatrix Ks;
  Ks.kind = OperatorKind::Kstar;
  Ks.quad_id = quad.id;
  // K* = W^{-1} K^T W
  Ks.entries = quad.w.cwiseInverse().asDiagonal() * K.entries.transpose() *
               quad.w.asDiagonal();
  return Ks;
}

BoundaryOperatorMatrix assemble_Kstar(const SurfaceQuadrature& quad) {
  return assemble_Kstar(quad, assemble_K(quad));
}

namespace {

int nearest_node(const SurfaceQuadrature& quad, const Vec3& x, double* dist) {
  int best = 0;
  double bd = std::numeric_limits<double>::max();
  for (int j = 0; j < quad.size(); ++j) {
    const double d = (x - Vec3(quad.x.row(j))).norm();
    if (d < bd) {
      bd = d;
      best = j;
    }
  }
  *dist = bd;
  return best;
}

void check_density(const SurfaceQuadrature& quad, const DensityVector& d) {
  if (d.quad_id != quad.id)
    throw MismatchError("density bound to a different quadrature");
  if (d.values.size() != quad.size())
    throw MismatchError("density length does not match the quadrature");
}

}  // namespace

double eval_single_layer(const SurfaceQuadrature& quad, const DensityVector& d,
                         const Vec3& x) {
  check_density(quad, d);
  double dist;
  const int near = nearest_node(quad, x, &dist);
  if (dist < 2.0 * quad.spacing[near])
    throw NearFieldError(
        "evaluation point within two node spacings of the surface");
  double acc = 0.0;
  for (int j = 0; j < quad.size(); ++j)
    acc += kernel_S(x, quad.x.row(j)) * d.values[j] * quad.w[j];
  return acc;
}

double eval_double_layer(const SurfaceQuadrature& quad, const DensityVector& d,
                         const Vec3& x) {
  check_density(quad, d);
  double dist;
  const int near = nearest_node(quad, x, &dist);
  if (dist < 2.0 * quad.spacing[near])
    throw NearFieldError(
        "evaluation point within two node spacings of the surface");
  double acc = 0.0;
  for (int j = 0; j < quad.size(); ++j)
    acc += kernel_D(x, quad.x.row(j), quad.n.row(j)) * d.values[j] * quad.w[j];
  return acc;
}

namespace {

VecX eval_row(const SurfaceQuadrature& quad, const Vec3& x, PatchKernel kind) {
  VecX row(quad.size());
  for (int j = 0; j < quad.size(); ++j) {
    const double dist = (x - Vec3(quad.x.row(j))).norm();
    if (dist < 2.0 * quad.spacing[j]) {
      row[j] = cell_patch_integral(quad, j, x, kind);
    } else if (kind == PatchKernel::SingleLayer) {
      row[j] = kernel_S(x, quad.x.row(j)) * quad.w[j];
    } else {
      row[j] = kernel_D(x, quad.x.row(j), quad.n.row(j)) * quad.w[j];
    }
  }
  return row;
}

}  // namespace

VecX single_layer_eval_row(const SurfaceQuadrature& quad, const Vec3& x) {
  return eval_row(quad, x, PatchKernel::SingleLayer);
}

VecX double_layer_eval_row(const SurfaceQuadrature& quad, const Vec3& x) {
  return eval_row(quad, x, PatchKernel::DoubleLayer);
}

double eval_single_layer_near(const SurfaceQuadrature& quad,
                              const DensityVector& d, const Vec3& x) {
  check_density(quad, d);
  return single_layer_eval_row(quad, x).dot(d.values);
}

double eval_double_layer_near(const SurfaceQuadrature& quad,
                              const DensityVector& d, const Vec3& x) {
  check_density(quad, d);
  return double_layer_eval_row(quad, x).dot(d.values);
}

DensityVector exterior_normal_derivative_S(const BoundaryOperatorMatrix& Kstar,
                                           const DensityVector& phi) {
  if (Kstar.kind != OperatorKind::Kstar)
    throw MismatchError("exterior_normal_derivative_S expects K*");
  DensityVector out = Kstar.apply(phi);
  out.values += 0.5 * phi.values;
  return out;
}

BoundaryOperatorMatrix assemble_S1(const SurfaceQuadrature& quad,
                                   const PerturbationField& h,
                                   const BoundaryOperatorMatrix& S,
                                   const BoundaryOperatorMatrix& K,
                                   const BoundaryOperatorMatrix& Kstar) {
  if (h.quad_id != quad.id)
    throw MismatchError("perturbation field bound to a different quadrature");
  if (S.quad_id != quad.id || K.quad_id != quad.id || Kstar.quad_id != quad.id)
    throw MismatchError("operator bound to a different quadrature");
  const int N = quad.size();
  const VecX tau_h = quad.tau.cwiseProduct(h.h);
  BoundaryOperatorMatrix out;
  out.kind = OperatorKind::S1;
  out.quad_id = quad.id;
  out.entries = -2.0 * (S.entries * tau_h.asDiagonal());
  out.entries.noalias() +=
      h.h.asDiagonal() * (0.5 * MatX::Identity(N, N) + Kstar.entries);
  out.entries.noalias() +=
      (-0.5 * MatX::Identity(N, N) + K.entries) * h.h.asDiagonal();
  return out;
}

BoundaryOperatorMatrix assemble_K1(const SurfaceQuadrature& quad,
                                   const PerturbationField& h,
                                   const BoundaryOperatorMatrix& S,
                                   const BoundaryOperatorMatrix& K,
                                   const BoundaryOperatorMatrix& Kstar) {
  if (h.quad_id != quad.id)
    throw MismatchError("perturbation field bound to a different quadrature");
  if (S.quad_id != quad.id || K.quad_id != quad.id || Kstar.quad_id != quad.id)
    throw MismatchError("operator bound to a different quadrature");
  const int N = quad.size();
  const VecX tau_h = quad.tau.cwiseProduct(h.h);
  const MatX dSdn = 0.5 * MatX::Identity(N, N) + Kstar.entries;

  BoundaryOperatorMatrix out;
  out.kind = OperatorKind::K1;
  out.quad_id = quad.id;
  out.entries = 2.0 * (tau_h.asDiagonal() * dSdn - dSdn * tau_h.asDiagonal());

  // d(D[h psi])/dn through the representation formula (no jump):
  // S^{-1} (1/2 I + K)(-1/2 I + K) diag(h) = S^{-1} (K^2 - 1/4 I) diag(h)
  MatX rhs = K.entries * K.entries;
  rhs.diagonal().array() -= 0.25;
  rhs = rhs * h.h.asDiagonal();
  Eigen::PartialPivLU<MatX> lu(S.entries);
  out.entries.noalias() += lu.solve(rhs);

  // -(1/sqrt g) div( h sqrt g G^{-1} grad S[psi] )
  out.entries.noalias() -=
      geometry::weighted_laplace_beltrami_matrix(quad, h.h) * S.entries;
  return out;
}

double inner_w(const SurfaceQuadrature& quad, const VecX& a, const VecX& b) {
  return (a.array() * b.array() * quad.w.array()).sum();
}

double norm_w(const SurfaceQuadrature& quad, const VecX& a) {
  return std::sqrt(inner_w(quad, a, a));
}

}  // namespace capsense::potential
