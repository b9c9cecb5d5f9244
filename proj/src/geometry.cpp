#include "capsense/geometry.hpp"

#include <omp.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "capsense/harmonics.hpp"

namespace capsense {

void set_thread_count(int n) {
  if (n < 1) throw ConfigError("thread count must be >= 1");
  omp_set_num_threads(n);
  Eigen::setNbThreads(n);
}

int thread_count() { return omp_get_max_threads(); }

}  // namespace capsense

namespace capsense::geometry {

namespace {

constexpr double kPi = std::numbers::pi;

// ---------------------------------------------------------------------------
// Gauss-Legendre nodes/weights on (-1,1), Newton iteration on Legendre P_n.
// ---------------------------------------------------------------------------
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double t = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      pp = n * (t * p1 - p0) / (t * t - 1.0);
      double dt = p1 / pp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    x[i] = -t;
    x[n - 1 - i] = t;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - t * t) * pp * pp);
  }
}

Chart sphere_chart(double R) {
  Chart ch;
  ch.xi_lo = 0.0;
  ch.xi_hi = kPi;
  ch.sampling = XiSampling::GaussInCosXi;
  ch.jet = [R](double xi, double th) {
    const double sx = std::sin(xi), cx = std::cos(xi);
    const double st = std::sin(th), ct = std::cos(th);
    ChartJet j;
    j.x = {R * sx * ct, R * sx * st, R * cx};
    j.x_xi = {R * cx * ct, R * cx * st, -R * sx};
    j.x_theta = {-R * sx * st, R * sx * ct, 0.0};
    j.x_xixi = -j.x;
    j.x_xitheta = {-R * cx * st, R * cx * ct, 0.0};
    j.x_thetatheta = {-R * sx * ct, -R * sx * st, 0.0};
    return j;
  };
  return ch;
}

// Revolution chart about the local z axis: equatorial semi-axis ae, polar ap.
Chart spheroid_chart(double ae, double ap) {
  Chart ch;
  ch.xi_lo = 0.0;
  ch.xi_hi = kPi;
  ch.sampling = XiSampling::GaussInCosXi;
  ch.jet = [ae, ap](double xi, double th) {
    const double sx = std::sin(xi), cx = std::cos(xi);
    const double st = std::sin(th), ct = std::cos(th);
    ChartJet j;
    j.x = {ae * sx * ct, ae * sx * st, ap * cx};
    j.x_xi = {ae * cx * ct, ae * cx * st, -ap * sx};
    j.x_theta = {-ae * sx * st, ae * sx * ct, 0.0};
    j.x_xixi = {-ae * sx * ct, -ae * sx * st, -ap * cx};
    j.x_xitheta = {-ae * cx * st, ae * cx * ct, 0.0};
    j.x_thetatheta = {-ae * sx * ct, -ae * sx * st, 0.0};
    return j;
  };
  return ch;
}

// Curvature-line (Jacobi) chart of the triaxial ellipsoid with semi-axes
// a > b > c along the local x,y,z axes, written in colatitude form:
//   X(xi,th) = ( a cos(th) A(xi), b sin(xi) sin(th), c cos(xi) C(th) ),
//   A = sqrt(1 - kp2 cos^2 xi),  C = sqrt(1 - k2 cos^2 th),
//   k2 = (a^2-b^2)/(a^2-c^2),    kp2 = (b^2-c^2)/(a^2-c^2).
// The coordinate curves are the curvature lines, so X_xi . X_theta = 0
// identically (a^2 kp2 + c^2 k2 = b^2). The xi in {0,pi} boundary lines map
// onto the two umbilical arcs of the xz principal ellipse, where the area
// element stays bounded away from zero except at the four umbilics.
Chart jacobi_chart(double a, double b, double c) {
  Chart ch;
  ch.xi_lo = 0.0;
  ch.xi_hi = kPi;
  ch.sampling = XiSampling::MidpointXi;
  const double k2 = (a * a - b * b) / (a * a - c * c);
  const double kp2 = (b * b - c * c) / (a * a - c * c);
  ch.jet = [a, b, c, k2, kp2](double xi, double th) {
    const double sx = std::sin(xi), cx = std::cos(xi);
    const double st = std::sin(th), ct = std::cos(th);
    const double A = std::sqrt(1.0 - kp2 * cx * cx);
    const double C = std::sqrt(1.0 - k2 * ct * ct);
    const double dA = kp2 * sx * cx / A;
    const double dC = k2 * ct * st / C;
    const double d2A = kp2 * (cx * cx - sx * sx) / A - dA * dA / A;
    const double d2C = k2 * (ct * ct - st * st) / C - dC * dC / C;
    ChartJet j;
    j.x = {a * ct * A, b * sx * st, c * cx * C};
    j.x_xi = {a * ct * dA, b * cx * st, -c * sx * C};
    j.x_theta = {-a * st * A, b * sx * ct, c * cx * dC};
    j.x_xixi = {a * ct * d2A, -b * sx * st, -c * cx * C};
    j.x_xitheta = {-a * st * dA, b * cx * ct, -c * sx * dC};
    j.x_thetatheta = {-a * ct * A, -b * sx * st, c * cx * d2C};
    return j;
  };
  return ch;
}

// Applies a coordinate permutation to a chart, reversing theta when the
// permutation is odd so normals keep pointing outward.
Chart permute_chart(Chart base, const std::array<int, 3>& perm) {
  const bool identity = perm == std::array<int, 3>{0, 1, 2};
  if (identity) return base;
  int parity = 0;
  for (int i = 0; i < 3; ++i)
    for (int k = i + 1; k < 3; ++k)
      if (perm[i] > perm[k]) ++parity;
  const bool reverse_theta = (parity % 2) != 0;
  Chart ch = base;
  ch.jet = [inner = base.jet, perm, reverse_theta](double xi, double th) {
    ChartJet s = inner(xi, reverse_theta ? -th : th);
    const double tsign = reverse_theta ? -1.0 : 1.0;
    ChartJet j;
    for (int k = 0; k < 3; ++k) {
      j.x[perm[k]] = s.x[k];
      j.x_xi[perm[k]] = s.x_xi[k];
      j.x_theta[perm[k]] = tsign * s.x_theta[k];
      j.x_xixi[perm[k]] = s.x_xixi[k];
      j.x_xitheta[perm[k]] = tsign * s.x_xitheta[k];
      j.x_thetatheta[perm[k]] = s.x_thetatheta[k];
    }
    return j;
  };
  return ch;
}

// Chart adapter computing second derivatives by central differences of the
// analytic first derivatives. Used where closed-form second derivatives
// would require third derivatives of an underlying chart (perturbed
// surfaces) or Hessians of the radial profile (star shapes). Only curvature
// diagnostics consume these entries.
Chart jet_from_first_derivatives(
    double xi_lo, double xi_hi, XiSampling sampling,
    std::function<void(double, double, Vec3&, Vec3&, Vec3&)> first) {
  Chart ch;
  ch.xi_lo = xi_lo;
  ch.xi_hi = xi_hi;
  ch.sampling = sampling;
  ch.jet = [first](double xi, double th) {
    ChartJet j;
    first(xi, th, j.x, j.x_xi, j.x_theta);
    const double d = 1e-5;
    Vec3 xp, e1p, e2p, xm, e1m, e2m;
    first(xi + d, th, xp, e1p, e2p);
    first(xi - d, th, xm, e1m, e2m);
    j.x_xixi = (e1p - e1m) / (2 * d);
    j.x_xitheta = (e2p - e2m) / (2 * d);
    first(xi, th + d, xp, e1p, e2p);
    first(xi, th - d, xm, e1m, e2m);
    j.x_thetatheta = (e2p - e2m) / (2 * d);
    return j;
  };
  return ch;
}

Chart star_chart(double R, std::vector<std::array<double, 3>> modes) {
  auto radius = [R, modes](const Vec3& dir, double& r, Vec3& grad) {
    r = 1.0;
    grad.setZero();
    for (const auto& m : modes) {
      const int l = static_cast<int>(m[0]), mm = static_cast<int>(m[1]);
      r += m[2] * sphere_harmonic(l, mm, dir);
      grad += m[2] * sphere_harmonic_gradient(l, mm, dir);
    }
    r *= R;
    grad *= R;
  };
  auto first = [radius](double xi, double th, Vec3& x, Vec3& e1, Vec3& e2) {
    const double sx = std::sin(xi), cx = std::cos(xi);
    const double st = std::sin(th), ct = std::cos(th);
    const Vec3 dir{sx * ct, sx * st, cx};
    const Vec3 dir_xi{cx * ct, cx * st, -sx};
    const Vec3 dir_th{-sx * st, sx * ct, 0.0};
    double r;
    Vec3 grad;  // ambient gradient of the degree-0 radial profile
    radius(dir, r, grad);
    const double r_xi = grad.dot(dir_xi);
    const double r_th = grad.dot(dir_th);
    x = r * dir;
    e1 = r_xi * dir + r * dir_xi;
    e2 = r_th * dir + r * dir_th;
  };
  return jet_from_first_derivatives(0.0, kPi, XiSampling::GaussInCosXi, first);
}

}  // namespace

ParametricSurface make_surface(const ShapeSpec& spec) {
  ParametricSurface s;
  s.name = spec.name;
  if (spec.name == "sphere") {
    if (spec.params.size() != 1)
      throw ConfigError("sphere expects one parameter (radius)");
    const double R = spec.params[0];
    if (!(R > 0)) throw ConfigError("sphere radius must be positive");
    s.charts.push_back(sphere_chart(R));
    s.is_sphere = true;
    s.diameter = 2 * R;
    return s;
  }
  if (spec.name == "ellipsoid") {
    if (spec.params.size() != 3)
      throw ConfigError("ellipsoid expects three semi-axes");
    for (double p : spec.params)
      if (!(p > 0)) throw ConfigError("ellipsoid semi-axes must be positive");
    // sort the semi-axes descending and remember where each one came from
    std::array<int, 3> order{0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int i, int k) {
      return spec.params[i] > spec.params[k];
    });
    const double a = spec.params[order[0]], b = spec.params[order[1]],
                 c = spec.params[order[2]];
    std::array<int, 3> perm{};  // sorted slot -> original axis
    for (int k = 0; k < 3; ++k) perm[k] = order[k];
    const double rel = 1e-14 * a;
    Chart ch;
    if (a - c <= rel) {
      ch = sphere_chart(a);
      s.is_sphere = true;
    } else if (a - b <= rel) {
      // oblate: revolution about the shortest (local z) axis
      ch = spheroid_chart(a, c);
    } else if (b - c <= rel) {
      // prolate: revolution about the longest axis; rotate slots so the
      // symmetry axis is local z
      ch = spheroid_chart(b, a);
      perm = {order[1], order[2], order[0]};
    } else {
      ch = jacobi_chart(a, b, c);
    }
    s.charts.push_back(permute_chart(ch, perm));
    s.diameter = 2 * a;
    return s;
  }
  if (spec.name == "star") {
    if (spec.params.empty() || (spec.params.size() - 1) % 3 != 0)
      throw ConfigError("star expects R followed by (l,m,c) triples");
    const double R = spec.params[0];
    if (!(R > 0)) throw ConfigError("star base radius must be positive");
    std::vector<std::array<double, 3>> modes;
    double amp = 0.0;
    for (size_t i = 1; i + 2 <= spec.params.size(); i += 3) {
      const int l = static_cast<int>(spec.params[i]);
      const int m = static_cast<int>(spec.params[i + 1]);
      if (l < 0 || l > kMaxHarmonicDegree || std::abs(m) > l)
        throw ConfigError("star mode (l,m) out of range");
      modes.push_back({spec.params[i], spec.params[i + 1], spec.params[i + 2]});
      amp += std::abs(spec.params[i + 2]);
    }
    if (amp > 0.5)
      throw ConfigError("star modal amplitudes too large for a radial graph");
    s.charts.push_back(star_chart(R, modes));
    s.diameter = 2 * R * (1 + amp);
    return s;
  }
  throw ConfigError("unknown shape: " + spec.name);
}

double mean_curvature(const ParametricSurface& surface, double xi, double theta,
                      int chart) {
  if (chart < 0 || chart >= static_cast<int>(surface.charts.size()))
    throw ConfigError("chart index out of range");
  const ChartJet j = surface.charts[chart].jet(xi, theta);
  const Vec3 W = j.x_xi.cross(j.x_theta);
  const double J = W.norm();
  const double scale = j.x_xi.norm() + j.x_theta.norm();
  if (J <= 1e-12 * scale * scale)
    throw EvaluationError("mean curvature at a chart-degenerate point");
  const Vec3 nrm = W / J;
  const double E = j.x_xi.dot(j.x_xi);
  const double F = j.x_xi.dot(j.x_theta);
  const double G = j.x_theta.dot(j.x_theta);
  const double L = nrm.dot(j.x_xixi);
  const double M = nrm.dot(j.x_xitheta);
  const double N = nrm.dot(j.x_thetatheta);
  return 0.5 * (L * G - 2 * M * F + N * E) / (E * G - F * F);
}

int SurfaceQuadrature::node_index(int chart, int ixi, int itheta) const {
  const Grid& g = grids.at(chart);
  return g.node_offset + ixi * g.n_theta + itheta;
}

namespace {
std::uint64_t next_quadrature_id() {
  static std::uint64_t counter = 0;
  return ++counter;
}
}  // namespace

SurfaceQuadrature build_quadrature(const ParametricSurface& surface,
                                   int resolution) {
  if (resolution < 8)
    throw ConfigError("quadrature resolution must be at least 8");
  SurfaceQuadrature q;
  q.surface = surface;
  q.resolution = resolution;
  q.id = next_quadrature_id();

  const int n = resolution;
  int total = 0;
  for (size_t c = 0; c < surface.charts.size(); ++c) total += n * n;
  q.x.resize(total, 3);
  q.n.resize(total, 3);
  q.t_xi.resize(total, 3);
  q.t_theta.resize(total, 3);
  q.w.resize(total);
  q.tau.resize(total);
  q.xi.resize(total);
  q.theta.resize(total);
  q.spacing.resize(total);
  q.spacing_xi.resize(total);
  q.spacing_theta.resize(total);
  q.metric.resize(total);
  q.chart_id.resize(total);

  int offset = 0;
  for (size_t c = 0; c < surface.charts.size(); ++c) {
    const Chart& ch = surface.charts[c];
    SurfaceQuadrature::Grid grid;
    grid.chart = static_cast<int>(c);
    grid.n_xi = n;
    grid.n_theta = n;
    grid.node_offset = offset;
    grid.theta_step = 2 * kPi / n;
    grid.xi_nodes.resize(n);
    grid.xi_cell_lo.resize(n);
    grid.xi_cell_hi.resize(n);

    std::vector<double> gx, gw;
    gauss_legendre(n, gx, gw);
    std::vector<double> xi_meas(n);  // quadrature measure in xi, per row
    if (ch.sampling == XiSampling::MidpointXi) {
      const double step = (ch.xi_hi - ch.xi_lo) / n;
      for (int i = 0; i < n; ++i) {
        grid.xi_nodes[i] = ch.xi_lo + (i + 0.5) * step;
        xi_meas[i] = step;
        grid.xi_cell_lo[i] = ch.xi_lo + i * step;
        grid.xi_cell_hi[i] = ch.xi_lo + (i + 1) * step;
      }
    } else if (ch.sampling == XiSampling::GaussInCosXi) {
      // nodes at xi = acos(u), u Gauss-Legendre on (-1,1); the substitution
      // absorbs d(cos xi), so the row measure is the plain GL weight and the
      // area element must be divided by sin(xi) when weighting.
      for (int i = 0; i < n; ++i) {
        const double u = gx[n - 1 - i];
        grid.xi_nodes[i] = std::acos(u);
        xi_meas[i] = gw[n - 1 - i] / std::sqrt(1.0 - u * u);
      }
      grid.xi_cell_lo[0] = ch.xi_lo;
      grid.xi_cell_hi[n - 1] = ch.xi_hi;
      for (int i = 0; i + 1 < n; ++i) {
        const double mid =
            std::acos(0.5 * (gx[n - 1 - i] + gx[n - 2 - i]));
        grid.xi_cell_hi[i] = mid;
        grid.xi_cell_lo[i + 1] = mid;
      }
    } else {
      const double half = 0.5 * (ch.xi_hi - ch.xi_lo);
      const double midp = 0.5 * (ch.xi_hi + ch.xi_lo);
      for (int i = 0; i < n; ++i) {
        grid.xi_nodes[i] = midp + half * gx[i];
        xi_meas[i] = half * gw[i];
      }
      grid.xi_cell_lo[0] = ch.xi_lo;
      grid.xi_cell_hi[n - 1] = ch.xi_hi;
      for (int i = 0; i + 1 < n; ++i) {
        const double mid = 0.5 * (grid.xi_nodes[i] + grid.xi_nodes[i + 1]);
        grid.xi_cell_hi[i] = mid;
        grid.xi_cell_lo[i + 1] = mid;
      }
    }

#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < n; ++k) {
        const int idx = offset + i * n + k;
        const double xi = grid.xi_nodes[i];
        const double th = k * grid.theta_step;
        const ChartJet j = ch.jet(xi, th);
        const Vec3 W = j.x_xi.cross(j.x_theta);
        const double J = W.norm();
        const Vec3 nrm = W / J;
        q.x.row(idx) = j.x;
        q.n.row(idx) = nrm;
        q.xi[idx] = xi;
        q.theta[idx] = th;
        q.chart_id[idx] = static_cast<int>(c);
        q.w[idx] = J * xi_meas[i] * grid.theta_step;
        Mat2 G;
        G << j.x_xi.dot(j.x_xi), j.x_xi.dot(j.x_theta),
             j.x_xi.dot(j.x_theta), j.x_theta.dot(j.x_theta);
        q.metric[idx] = G;
        const Vec3 txi = j.x_xi.normalized();
        Vec3 tth = j.x_theta - j.x_theta.dot(txi) * txi;
        tth.normalize();
        q.t_xi.row(idx) = txi;
        q.t_theta.row(idx) = tth;
        q.tau[idx] = 0.5 *
            (nrm.dot(j.x_xixi) * G(1, 1) - 2 * nrm.dot(j.x_xitheta) * G(0, 1) +
             nrm.dot(j.x_thetatheta) * G(0, 0)) /
            (G(0, 0) * G(1, 1) - G(0, 1) * G(0, 1));
        const double dxi_cell = grid.xi_cell_hi[i] - grid.xi_cell_lo[i];
        q.spacing_xi[idx] = j.x_xi.norm() * dxi_cell;
        q.spacing_theta[idx] = j.x_theta.norm() * grid.theta_step;
        q.spacing[idx] = std::max(q.spacing_xi[idx], q.spacing_theta[idx]);
      }
    }
    q.grids.push_back(grid);
    offset += n * n;
  }

  for (int i = 0; i < q.size(); ++i)
    if (!(q.w[i] > 0))
      throw EvaluationError("non-positive quadrature weight (degenerate chart)");
  return q;
}

PerturbationProfile make_profile(const std::string& name,
                                 const std::vector<double>& params) {
  PerturbationProfile p;
  p.name = name;
  auto amp_or = [&](size_t i, double d) {
    return params.size() > i ? params[i] : d;
  };
  if (name == "zero") {
    p.is_zero = true;
    p.value = [](const Vec3&) { return 0.0; };
    p.gradient = [](const Vec3&) { return Vec3::Zero().eval(); };
    return p;
  }
  if (name == "one" || name == "const") {
    const double a = amp_or(0, 1.0);
    p.is_zero = (a == 0.0);
    p.value = [a](const Vec3&) { return a; };
    p.gradient = [](const Vec3&) { return Vec3::Zero().eval(); };
    return p;
  }
  if (name == "x" || name == "y" || name == "z") {
    const int k = name == "x" ? 0 : (name == "y" ? 1 : 2);
    const double a = amp_or(0, 1.0);
    p.value = [k, a](const Vec3& v) { return a * v[k]; };
    p.gradient = [k, a](const Vec3&) {
      Vec3 g = Vec3::Zero();
      g[k] = a;
      return g;
    };
    return p;
  }
  if (name.size() >= 3 && name[0] == 'Y') {
    const int l = name[1] - '0';
    const int m = (name[2] == '-') ? -(name[3] - '0') : name[2] - '0';
    if (l < 0 || l > kMaxHarmonicDegree || std::abs(m) > l)
      throw ConfigError("harmonic profile out of range: " + name);
    const double a = amp_or(0, 1.0);
    p.value = [l, m, a](const Vec3& v) { return a * sphere_harmonic(l, m, v); };
    p.gradient = [l, m, a](const Vec3& v) {
      return (a * sphere_harmonic_gradient(l, m, v)).eval();
    };
    return p;
  }
  if (name == "gauss") {
    if (params.size() < 4)
      throw ConfigError("gauss profile expects cx,cy,cz,width[,amp]");
    const Vec3 c{params[0], params[1], params[2]};
    const double width = params[3];
    if (!(width > 0)) throw ConfigError("gauss width must be positive");
    const double a = amp_or(4, 1.0);
    p.value = [c, width, a](const Vec3& v) {
      return a * std::exp(-(v - c).squaredNorm() / (2 * width * width));
    };
    p.gradient = [c, width, a](const Vec3& v) {
      const double g = a * std::exp(-(v - c).squaredNorm() / (2 * width * width));
      return (-(v - c) * (g / (width * width))).eval();
    };
    return p;
  }
  throw ConfigError("unknown perturbation profile: " + name);
}

PerturbationField sample_profile(const PerturbationProfile& profile,
                                 const SurfaceQuadrature& quad) {
  PerturbationField f;
  f.quad_id = quad.id;
  const int N = quad.size();
  f.h.resize(N);
  f.grad_t.resize(N, 3);
  for (int i = 0; i < N; ++i) {
    const Vec3 x = quad.x.row(i);
    const Vec3 nrm = quad.n.row(i);
    f.h[i] = profile.value(x);
    const Vec3 g = profile.gradient(x);
    f.grad_t.row(i) = g - g.dot(nrm) * nrm;
  }
  return f;
}

ParametricSurface perturb_surface(const ParametricSurface& surface,
                                  const PerturbationProfile& h, double eps) {
  if (eps == 0.0 || h.is_zero) return surface;

  // immersion margin |eps h tau| < 1/2 on a probe grid
  const int probe = 48;
  for (const Chart& ch : surface.charts) {
    for (int i = 0; i < probe; ++i) {
      const double xi =
          ch.xi_lo + (ch.xi_hi - ch.xi_lo) * (i + 0.5) / probe;
      for (int k = 0; k < probe; ++k) {
        const double th = 2 * kPi * k / probe;
        const ChartJet j = ch.jet(xi, th);
        const Vec3 W = j.x_xi.cross(j.x_theta);
        const Vec3 nrm = W.normalized();
        const Mat2 G = (Mat2() << j.x_xi.dot(j.x_xi), j.x_xi.dot(j.x_theta),
                        j.x_xi.dot(j.x_theta), j.x_theta.dot(j.x_theta))
                           .finished();
        const double tau = 0.5 *
            (nrm.dot(j.x_xixi) * G(1, 1) - 2 * nrm.dot(j.x_xitheta) * G(0, 1) +
             nrm.dot(j.x_thetatheta) * G(0, 0)) /
            (G(0, 0) * G(1, 1) - G(0, 1) * G(0, 1));
        if (std::abs(eps * h.value(j.x) * tau) >= 0.5)
          throw PerturbationError(
              "perturbation violates the immersion margin |eps*h*tau| < 1/2");
      }
    }
  }

  ParametricSurface out;
  out.name = surface.name + "+" + std::to_string(eps) + "*" + h.name;
  out.is_sphere = false;
  double hmax = 0.0;

  for (const Chart& base : surface.charts) {
    auto first = [inner = base.jet, value = h.value, grad = h.gradient, eps](
                     double xi, double th, Vec3& x, Vec3& e1, Vec3& e2) {
      const ChartJet j = inner(xi, th);
      const Vec3 W = j.x_xi.cross(j.x_theta);
      const double J = W.norm();
      const Vec3 nrm = W / J;
      // n_xi = (I - n n^T) d(Xxi x Xth)/dxi / J, same for theta
      const Vec3 W_xi = j.x_xixi.cross(j.x_theta) + j.x_xi.cross(j.x_xitheta);
      const Vec3 W_th =
          j.x_xitheta.cross(j.x_theta) + j.x_xi.cross(j.x_thetatheta);
      const Vec3 n_xi = (W_xi - nrm.dot(W_xi) * nrm) / J;
      const Vec3 n_th = (W_th - nrm.dot(W_th) * nrm) / J;
      const double hv = value(j.x);
      const Vec3 hg = grad(j.x);
      const double h_xi = hg.dot(j.x_xi);
      const double h_th = hg.dot(j.x_theta);
      x = j.x + eps * hv * nrm;
      e1 = j.x_xi + eps * (h_xi * nrm + hv * n_xi);
      e2 = j.x_theta + eps * (h_th * nrm + hv * n_th);
    };
    out.charts.push_back(jet_from_first_derivatives(base.xi_lo, base.xi_hi,
                                                    base.sampling, first));
    // crude bound for the new diameter
    for (int i = 1; i < 8; ++i) {
      const double xi = base.xi_lo + (base.xi_hi - base.xi_lo) * i / 8.0;
      for (int k = 0; k < 8; ++k)
        hmax = std::max(hmax, std::abs(h.value(base.jet(xi, kPi * k / 4).x)));
    }
  }
  out.diameter = surface.diameter + 2 * std::abs(eps) * hmax;
  return out;
}

std::pair<Vec3, Vec3> normal_expansion(const SurfaceQuadrature& quad,
                                       const PerturbationField& h, int node) {
  if (h.quad_id != quad.id)
    throw MismatchError("perturbation field bound to a different quadrature");
  return {quad.n.row(node), -h.grad_t.row(node)};
}

std::pair<double, double> area_element_expansion(const SurfaceQuadrature& quad,
                                                 const PerturbationField& h,
                                                 int node) {
  if (h.quad_id != quad.id)
    throw MismatchError("perturbation field bound to a different quadrature");
  return {1.0, -2.0 * h.h[node] * quad.tau[node]};
}

namespace {

// quadratic-fit derivative weights for three abscissae, evaluated at x0
std::array<double, 3> stencil3(double x0, double xa, double xb, double xc) {
  const double la = ((x0 - xb) + (x0 - xc)) / ((xa - xb) * (xa - xc));
  const double lb = ((x0 - xa) + (x0 - xc)) / ((xb - xa) * (xb - xc));
  const double lc = ((x0 - xa) + (x0 - xb)) / ((xc - xa) * (xc - xb));
  return {la, lb, lc};
}

void check_field(const SurfaceQuadrature& quad, const VecX& field) {
  if (field.size() != quad.size())
    throw MismatchError("field length does not match the quadrature");
}

}  // namespace

Eigen::SparseMatrix<double> d_xi_matrix(const SurfaceQuadrature& quad) {
  std::vector<Eigen::Triplet<double>> trip;
  for (const auto& g : quad.grids) {
    const auto& xs = g.xi_nodes;
    for (int i = 0; i < g.n_xi; ++i) {
      int ia = i - 1, ib = i, ic = i + 1;
      if (i == 0) { ia = 0; ib = 1; ic = 2; }
      if (i == g.n_xi - 1) { ia = i - 2; ib = i - 1; ic = i; }
      const auto cw = stencil3(xs[i], xs[ia], xs[ib], xs[ic]);
      for (int k = 0; k < g.n_theta; ++k) {
        const int row = g.node_offset + i * g.n_theta + k;
        trip.emplace_back(row, g.node_offset + ia * g.n_theta + k, cw[0]);
        trip.emplace_back(row, g.node_offset + ib * g.n_theta + k, cw[1]);
        trip.emplace_back(row, g.node_offset + ic * g.n_theta + k, cw[2]);
      }
    }
  }
  Eigen::SparseMatrix<double> D(quad.size(), quad.size());
  D.setFromTriplets(trip.begin(), trip.end());
  return D;
}

Eigen::SparseMatrix<double> d_theta_matrix(const SurfaceQuadrature& quad) {
  std::vector<Eigen::Triplet<double>> trip;
  for (const auto& g : quad.grids) {
    const double c = 1.0 / (2.0 * g.theta_step);
    for (int i = 0; i < g.n_xi; ++i) {
      for (int k = 0; k < g.n_theta; ++k) {
        const int row = g.node_offset + i * g.n_theta + k;
        const int kp = (k + 1) % g.n_theta;
        const int km = (k + g.n_theta - 1) % g.n_theta;
        trip.emplace_back(row, g.node_offset + i * g.n_theta + kp, c);
        trip.emplace_back(row, g.node_offset + i * g.n_theta + km, -c);
      }
    }
  }
  Eigen::SparseMatrix<double> D(quad.size(), quad.size());
  D.setFromTriplets(trip.begin(), trip.end());
  return D;
}

MatX3 tangential_gradient(const SurfaceQuadrature& quad, const VecX& field) {
  check_field(quad, field);
  const auto Dxi = d_xi_matrix(quad);
  const auto Dth = d_theta_matrix(quad);
  const VecX fx = Dxi * field;
  const VecX ft = Dth * field;
  MatX3 out(quad.size(), 3);
  for (int i = 0; i < quad.size(); ++i) {
    const Mat2& G = quad.metric[i];
    const Eigen::Vector2d rhs{fx[i], ft[i]};
    const Eigen::Vector2d ab = G.inverse() * rhs;
    const Vec3 exi = quad.t_xi.row(i) * std::sqrt(G(0, 0));
    // reconstruct X_theta from the stored orthonormal frame
    const Vec3 eth = quad.t_xi.row(i) * (G(0, 1) / std::sqrt(G(0, 0))) +
                     quad.t_theta.row(i) *
                         std::sqrt(G(1, 1) - G(0, 1) * G(0, 1) / G(0, 0));
    out.row(i) = ab[0] * exi + ab[1] * eth;
  }
  return out;
}

namespace {

// contravariant flux components a sqrt(det G) G^{-1} (f_xi, f_theta)
void flux_coefficients(const SurfaceQuadrature& quad, const VecX& a, int i,
                       double& c11, double& c12, double& c21, double& c22,
                       double& sqrtg) {
  const Mat2& G = quad.metric[i];
  const double det = G(0, 0) * G(1, 1) - G(0, 1) * G(0, 1);
  sqrtg = std::sqrt(det);
  const double f = a[i] * sqrtg / det;
  c11 = f * G(1, 1);
  c12 = -f * G(0, 1);
  c21 = -f * G(0, 1);
  c22 = f * G(0, 0);
}

}  // namespace

VecX laplace_beltrami(const SurfaceQuadrature& quad, const VecX& field) {
  if (quad.resolution < 16)
    throw ConfigError("laplace_beltrami needs resolution >= 16");
  check_field(quad, field);
  const auto Dxi = d_xi_matrix(quad);
  const auto Dth = d_theta_matrix(quad);
  const VecX fx = Dxi * field;
  const VecX ft = Dth * field;
  const int N = quad.size();
  VecX F1(N), F2(N), sg(N);
  const VecX ones = VecX::Ones(N);
  for (int i = 0; i < N; ++i) {
    double c11, c12, c21, c22;
    flux_coefficients(quad, ones, i, c11, c12, c21, c22, sg[i]);
    F1[i] = c11 * fx[i] + c12 * ft[i];
    F2[i] = c21 * fx[i] + c22 * ft[i];
  }
  const VecX div = Dxi * F1 + Dth * F2;
  return div.cwiseQuotient(sg);
}

MatX weighted_laplace_beltrami_matrix(const SurfaceQuadrature& quad,
                                      const VecX& a) {
  check_field(quad, a);
  const auto Dxi = d_xi_matrix(quad);
  const auto Dth = d_theta_matrix(quad);
  const int N = quad.size();
  VecX c11(N), c12(N), c21(N), c22(N), sg(N);
  for (int i = 0; i < N; ++i)
    flux_coefficients(quad, a, i, c11[i], c12[i], c21[i], c22[i], sg[i]);
  Eigen::SparseMatrix<double> op =
      Dxi * (c11.asDiagonal() * Dxi) + Dxi * (c12.asDiagonal() * Dth) +
      Dth * (c21.asDiagonal() * Dxi) + Dth * (c22.asDiagonal() * Dth);
  return sg.cwiseInverse().asDiagonal() * MatX(op);
}

}  // namespace capsense::geometry
