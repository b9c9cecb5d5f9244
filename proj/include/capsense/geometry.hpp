#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "capsense/types.hpp"

namespace capsense::geometry {

/// Chart evaluation at one parameter pair: position and first/second
/// parameter derivatives.
struct ChartJet {
  Vec3 x;
  Vec3 x_xi, x_theta;
  Vec3 x_xixi, x_xitheta, x_thetatheta;
};

/// Node placement rule along the xi direction. theta is always sampled on a
/// uniform periodic grid. Spherical-type charts use Gauss-Legendre nodes in
/// cos(xi) so that poles are never hit and weights stay accurate on smooth
/// data. The triaxial curvature-line chart uses midpoint nodes in xi: its
/// area element does not vanish at the xi boundary (which maps onto the
/// umbilical arcs), so cos-clustering would place nodes asymptotically too
/// close to the arcs, and midpoint weights equal the cell measure exactly,
/// which the near-arc patch corrections in the operator assembly rely on.
enum class XiSampling { GaussInCosXi, GaussInXi, MidpointXi };

struct Chart {
  double xi_lo = 0.0;
  double xi_hi = 0.0;
  XiSampling sampling = XiSampling::GaussInCosXi;
  std::function<ChartJet(double, double)> jet;
};

struct ShapeSpec {
  std::string name;              // "sphere" | "ellipsoid" | "star"
  std::vector<double> params;    // sphere: R; ellipsoid: a,b,c;
                                 // star: R then (l, m, c) triples
};

struct ParametricSurface {
  std::vector<Chart> charts;
  std::string name;
  bool is_sphere = false;        // exact round sphere (enables symmetric eigensolves)
  double diameter = 2.0;
};

/// Builds one of the closed-form shapes. Throws ConfigError for unknown
/// names or non-positive size parameters.
ParametricSurface make_surface(const ShapeSpec& spec);

/// Mean curvature, signed so that tau = -1/R on the sphere of radius R with
/// outward normal, evaluated from the chart jet. Throws EvaluationError at
/// chart-degenerate points.
double mean_curvature(const ParametricSurface& surface, double xi, double theta,
                      int chart = 0);

class SurfaceQuadrature {
 public:
  // Node data in fixed (chart, xi index, theta index) order.
  MatX3 x;          // positions
  MatX3 n;          // outward unit normals
  MatX3 t_xi;       // orthonormal tangent frame, first leg along X_xi
  MatX3 t_theta;
  VecX w;           // area weights
  VecX tau;         // mean curvature (tau = -1/R on the sphere of radius R)
  VecX xi, theta;   // chart coordinates of each node
  VecX spacing;     // local node spacing (near-field margin scale)
  VecX spacing_xi, spacing_theta;  // per-direction spacings
  std::vector<Mat2> metric;   // first fundamental form at each node
  std::vector<int> chart_id;

  struct Grid {
    int chart = 0;
    int n_xi = 0, n_theta = 0;
    int node_offset = 0;
    std::vector<double> xi_nodes;
    std::vector<double> xi_cell_lo, xi_cell_hi;  // xi cell bounds per row
    double theta_step = 0.0;                     // theta cells are uniform
  };
  std::vector<Grid> grids;

  ParametricSurface surface;   // retained for patch integration / refinement
  std::uint64_t id = 0;
  int resolution = 0;

  int size() const { return static_cast<int>(w.size()); }
  int node_index(int chart, int ixi, int itheta) const;
  double area() const { return w.sum(); }
};

/// Tensor quadrature with `resolution` nodes per chart direction.
/// Requires resolution >= 8 (ConfigError otherwise).
SurfaceQuadrature build_quadrature(const ParametricSurface& surface, int resolution);

/// Closed-form perturbation amplitude profile h with ambient gradient, so the
/// perturbed chart and the first-order expansion terms stay analytic.
struct PerturbationProfile {
  std::string name;
  std::function<double(const Vec3&)> value;
  std::function<Vec3(const Vec3&)> gradient;
  bool is_zero = false;
};

/// Profile library: "zero", "one" (or "const:c"), "x", "y", "z",
/// "Ylm" with l<=4 (e.g. "Y20"), "gauss:cx,cy,cz,width[,amp]".
PerturbationProfile make_profile(const std::string& name,
                                 const std::vector<double>& params = {});

struct PerturbationField {
  VecX h;           // nodal amplitude values
  MatX3 grad_t;     // nodal tangential gradients of h
  std::uint64_t quad_id = 0;
};

PerturbationField sample_profile(const PerturbationProfile& profile,
                                 const SurfaceQuadrature& quad);

/// Surface with boundary { x + eps*h(x) n(x) }. First chart derivatives are
/// differentiated analytically; second derivatives (only consumed by
/// curvature diagnostics) use central differences of the analytic first
/// derivatives. eps = 0 or h == 0 return the base surface unchanged.
/// Throws PerturbationError when |eps*h*tau| >= 1/2 anywhere on a probe grid.
ParametricSurface perturb_surface(const ParametricSurface& surface,
                                  const PerturbationProfile& h, double eps);

/// First-order expansion of the perturbed outward normal at a node:
/// n_eps = n0 + eps*n1 + O(eps^2) with n0 the base normal and
/// n1 = -(dh/dT) T = -grad_T h.
std::pair<Vec3, Vec3> normal_expansion(const SurfaceQuadrature& quad,
                                       const PerturbationField& h, int node);

/// First-order expansion of the perturbed area element relative to the base:
/// sigma0 = 1, sigma1 = -2 h tau.
std::pair<double, double> area_element_expansion(const SurfaceQuadrature& quad,
                                                 const PerturbationField& h,
                                                 int node);

/// Chart-coordinate partial derivative operators (3-point stencils on the
/// non-uniform xi grid, periodic centered differences in theta), shared by
/// the surface differential operators below and the perturbed-operator
/// assembly.
Eigen::SparseMatrix<double> d_xi_matrix(const SurfaceQuadrature& quad);
Eigen::SparseMatrix<double> d_theta_matrix(const SurfaceQuadrature& quad);

/// Surface gradient of a nodal scalar field, returned as tangential
/// 3-vectors. Exact on constants.
MatX3 tangential_gradient(const SurfaceQuadrature& quad, const VecX& field);

/// Laplace-Beltrami operator in divergence form,
/// (1/sqrt(det G)) d_i( sqrt(det G) G^{ij} d_j w ),
/// discretized chart-wise with the stencils above. Exact on constants.
VecX laplace_beltrami(const SurfaceQuadrature& quad, const VecX& field);

/// Divergence-form operator with a nodal coefficient a:
/// w -> (1/sqrt(det G)) d_i( a sqrt(det G) G^{ij} d_j w ).
/// laplace_beltrami is the a == 1 case; the perturbed-operator assembly uses
/// a = h. Returned dense for composition with boundary operator matrices.
MatX weighted_laplace_beltrami_matrix(const SurfaceQuadrature& quad,
                                      const VecX& a);

}  // namespace capsense::geometry
