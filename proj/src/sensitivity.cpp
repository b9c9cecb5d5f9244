#include "capsense/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace capsense::sensitivity {

namespace {
constexpr double kPi = std::numbers::pi;

using potential::inner_w;
using potential::norm_w;
}  // namespace

CorrectorSolution solve_corrector(const EquilibriumSolution& eq,
                                  const PerturbationField& h,
                                  const BoundaryOperatorMatrix& S,
                                  const BoundaryOperatorMatrix& K) {
  if (h.quad_id != eq.quad.id)
    throw MismatchError("perturbation field bound to a different quadrature");
  DensityVector f(-h.h.cwiseProduct(eq.phi0.values), eq.quad);
  return CorrectorSolution{solver::solve_exterior_dirichlet(eq.quad, f, S, K)};
}

DensityVector predict_current(const EquilibriumSolution& eq,
                              const CorrectorSolution& corrector,
                              const PerturbationField& h, double eps) {
  const VecX first = 2.0 * eq.quad.tau.cwiseProduct(h.h).cwiseProduct(
                               eq.phi0.values) +
                     corrector.dvdn().values;
  return DensityVector(eq.phi0.values + eps * first, eq.quad);
}

double capacity_first_order(const EquilibriumSolution& eq,
                            const PerturbationField& h) {
  if (h.quad_id != eq.quad.id)
    throw MismatchError("perturbation field bound to a different quadrature");
  return inner_w(eq.quad, h.h, eq.phi0.values.cwiseAbs2()) / (4.0 * kPi);
}

double predict_farfield(const EquilibriumSolution& eq,
                        const PerturbationField& h, double eps, const Vec3& x) {
  const double r = x.norm();
  // small slack so points at exactly 50 diameters survive roundoff
  if (r < 50.0 * eq.quad.surface.diameter * (1.0 - 1e-12))
    throw ConfigError("far-field prediction point below 50 surface diameters");
  return solver::eval_potential(eq, x) +
         eps * capacity_first_order(eq, h) / r;
}

DensityVector np_first_eigenvector(const EquilibriumSolution& eq) {
  const double nrm = norm_w(eq.quad, eq.phi0.values);
  return DensityVector(eq.phi0.values / nrm, eq.quad);
}

DensityVector predict_eigenvector(const EquilibriumSolution& eq,
                                  const CorrectorSolution& corrector,
                                  const PerturbationField& h, double eps) {
  const double nrm = norm_w(eq.quad, eq.phi0.values);
  const VecX phi = eq.phi0.values / nrm;
  const VecX vt = corrector.dvdn().values / nrm;
  const VecX tau_h_phi = eq.quad.tau.cwiseProduct(h.h).cwiseProduct(phi);
  const double proj = inner_w(eq.quad, tau_h_phi + vt, phi);
  return DensityVector(phi + eps * (2.0 * tau_h_phi + vt - proj * phi),
                       eq.quad);
}

PerturbedResolve resolve_perturbed(const EquilibriumSolution& base,
                                   const PerturbationProfile& h, double eps) {
  PerturbedResolve out;
  out.eps = eps;
  const auto perturbed = geometry::perturb_surface(base.quad.surface, h, eps);
  out.quad = geometry::build_quadrature(perturbed, base.quad.resolution);
  out.eq = solver::solve_equilibrium(out.quad);
  return out;
}

std::pair<double, double> eigenvector_pairing(const EquilibriumSolution& eq,
                                              const PerturbationField& h,
                                              const PerturbedResolve& truth) {
  if (h.quad_id != eq.quad.id)
    throw MismatchError("perturbation field bound to a different quadrature");
  if (truth.quad.size() != eq.quad.size())
    throw MismatchError("perturbed resolve does not match the base quadrature");
  const VecX phi0 = np_first_eigenvector(eq).values;
  // ground-truth eigenvector, normalized with the perturbed weights, pulled
  // back by node identity
  VecX phi_eps = truth.eq.phi0.values /
                 norm_w(truth.quad, truth.eq.phi0.values);
  if (inner_w(eq.quad, phi_eps, phi0) < 0) phi_eps = -phi_eps;
  const double lhs = inner_w(eq.quad, phi_eps - phi0, phi0);
  const double rhs1 =
      truth.eps *
      inner_w(eq.quad, eq.quad.tau.cwiseProduct(h.h), phi0.cwiseAbs2());
  return {lhs, rhs1};
}

std::pair<double, double> eigenvector_pairing(const EquilibriumSolution& eq,
                                              const PerturbationProfile& h,
                                              double eps) {
  if (h.is_zero || eps == 0.0) return {0.0, 0.0};
  const auto field = geometry::sample_profile(h, eq.quad);
  return eigenvector_pairing(eq, field, resolve_perturbed(eq, h, eps));
}

namespace {

// deterministic starting block for the subspace iteration
MatX deterministic_block(int n, int m) {
  MatX Q(n, m);
  std::uint64_t state = 0x9e3779b97f4a7c15ull;
  for (int k = 0; k < m; ++k)
    for (int i = 0; i < n; ++i) {
      state = state * 6364136223846793005ull + 1442695040888963407ull;
      Q(i, k) = (static_cast<double>(state >> 11) /
                 static_cast<double>(1ull << 53)) -
                0.5;
    }
  return Q;
}

std::vector<double> subspace_eigenvalues(const MatX& B, bool symmetric,
                                         int count) {
  const int n = static_cast<int>(B.rows());
  const int m = std::min(n, std::max(2 * count + 10, 24));
  MatX Q = Eigen::HouseholderQR<MatX>(deterministic_block(n, m))
               .householderQ() *
           MatX::Identity(n, m);
  std::vector<double> prev(count, 1e300);
  std::vector<double> vals;
  for (int it = 0; it < 600; ++it) {
    const MatX Z = B * Q;
    Q = Eigen::HouseholderQR<MatX>(Z).householderQ() * MatX::Identity(n, m);
    const MatX H = Q.transpose() * (B * Q);
    vals.clear();
    if (symmetric) {
      Eigen::SelfAdjointEigenSolver<MatX> es(0.5 * (H + H.transpose()));
      if (es.info() != Eigen::Success)
        throw EigensolveError("symmetric Ritz eigensolve failed");
      for (int i = 0; i < m; ++i) vals.push_back(es.eigenvalues()[i]);
    } else {
      Eigen::EigenSolver<MatX> es(H);
      if (es.info() != Eigen::Success)
        throw EigensolveError("Ritz eigensolve failed");
      for (int i = 0; i < m; ++i) {
        if (std::abs(es.eigenvalues()[i].imag()) > 1e-6)
          continue;  // noise-level complex pair in the tail
        vals.push_back(es.eigenvalues()[i].real());
      }
    }
    std::sort(vals.begin(), vals.end(), [](double a, double b) {
      return std::abs(a) > std::abs(b);
    });
    if (static_cast<int>(vals.size()) >= count) {
      double delta = 0.0;
      for (int i = 0; i < count; ++i)
        delta = std::max(delta, std::abs(vals[i] - prev[i]));
      if (delta < 1e-13) break;
      prev.assign(vals.begin(), vals.begin() + count);
    }
  }
  if (static_cast<int>(vals.size()) < count)
    throw EigensolveError("subspace iteration returned too few eigenvalues");
  vals.resize(count);
  return vals;
}

}  // namespace

std::vector<double> np_spectrum_check(const SurfaceQuadrature& quad,
                                      const BoundaryOperatorMatrix& Kstar,
                                      int count) {
  if (Kstar.quad_id != quad.id)
    throw MismatchError("K* bound to a different quadrature");
  if (count < 1 || count > quad.size())
    throw ConfigError("eigenvalue count out of range");
  // similarity transform B = W^{1/2} K* W^{-1/2}; exactly symmetric on the
  // sphere, similar to K* in general
  const VecX sq = quad.w.cwiseSqrt();
  const MatX B =
      sq.asDiagonal() * Kstar.entries * sq.cwiseInverse().asDiagonal();
  return subspace_eigenvalues(B, quad.surface.is_sphere, count);
}

std::vector<double> np_spectrum_check(const SurfaceQuadrature& quad,
                                      int count) {
  return np_spectrum_check(quad, potential::assemble_Kstar(quad), count);
}

StudyKind study_kind_from_name(const std::string& name) {
  if (name == "current") return StudyKind::Current;
  if (name == "capacity") return StudyKind::Capacity;
  if (name == "farfield") return StudyKind::FarField;
  if (name == "eigenvector") return StudyKind::Eigenvector;
  if (name == "pairing") return StudyKind::Pairing;
  throw ConfigError("unknown study kind: " + name);
}

std::string study_kind_name(StudyKind kind) {
  switch (kind) {
    case StudyKind::Current: return "current";
    case StudyKind::Capacity: return "capacity";
    case StudyKind::FarField: return "farfield";
    case StudyKind::Eigenvector: return "eigenvector";
    case StudyKind::Pairing: return "pairing";
  }
  return "?";
}

double fit_log_slope(const std::vector<double>& eps,
                     const std::vector<double>& residual,
                     const std::vector<int>& subset, double* intercept) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(subset.size());
  for (int i : subset) {
    const double lx = std::log(eps[i]);
    const double ly = std::log(std::max(residual[i], 1e-300));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  if (intercept) *intercept = (sy - slope * sx) / n;
  return slope;
}

namespace {

std::vector<Vec3> farfield_directions() {
  std::vector<Vec3> dirs;
  for (int ix = -1; ix <= 1; ++ix)
    for (int iy = -1; iy <= 1; ++iy)
      for (int iz = -1; iz <= 1; ++iz) {
        if (ix == 0 && iy == 0 && iz == 0) continue;
        dirs.push_back(Vec3(ix, iy, iz).normalized());
      }
  return dirs;
}

}  // namespace

ExpansionReport run_expansion_study(StudyKind kind,
                                    const ParametricSurface& surface,
                                    const PerturbationProfile& h,
                                    const std::vector<double>& eps,
                                    const StudyConfig& config) {
  if (eps.empty()) throw ConfigError("expansion study needs a nonempty eps list");
  for (double e : eps)
    if (!(e > 0)) throw ConfigError("expansion study eps values must be positive");

  ExpansionReport rep;
  rep.kind = kind;
  rep.eps = eps;
  rep.slope_lo = config.slope_lo;
  rep.slope_hi = config.slope_hi;

  const auto quad = geometry::build_quadrature(surface, config.resolution);
  const auto ops = potential::assemble_all(quad);
  const auto eq = solver::solve_equilibrium(quad, &ops.S);
  const auto field = geometry::sample_profile(h, quad);
  const auto corrector = solve_corrector(eq, field, ops.S, ops.K);
  const VecX phi_hat = np_first_eigenvector(eq).values;
  const double T1 = capacity_first_order(eq, field);

  // discretization-error floor: capacity self-error against a finer
  // unperturbed solve, scaled to the quantity compared in this study
  const int floor_res = config.floor_resolution > 0
                            ? config.floor_resolution
                            : (3 * config.resolution) / 2;
  const auto fine =
      solver::solve_equilibrium(geometry::build_quadrature(surface, floor_res));
  const double rel_floor =
      std::abs(eq.capacity - fine.capacity) / std::abs(eq.capacity);

  const double radius = config.farfield_radius > 0
                            ? config.farfield_radius
                            : 50.0 * surface.diameter;
  const auto dirs = farfield_directions();

  switch (kind) {
    case StudyKind::Capacity:
      rep.floor = rel_floor * std::abs(eq.capacity);
      break;
    case StudyKind::FarField:
      rep.floor = rel_floor * std::abs(eq.capacity) / radius;
      break;
    case StudyKind::Current:
      rep.floor = rel_floor * norm_w(quad, eq.phi0.values);
      break;
    case StudyKind::Eigenvector:
    case StudyKind::Pairing:
      rep.floor = rel_floor;  // quantities normalized to unit scale
      break;
  }

  for (double e : eps) {
    const auto truth = resolve_perturbed(eq, h, e);
    switch (kind) {
      case StudyKind::Capacity: {
        const double pred = eq.capacity + e * T1;
        rep.predicted.push_back(pred);
        rep.truth.push_back(truth.eq.capacity);
        rep.residual.push_back(std::abs(truth.eq.capacity - pred));
        break;
      }
      case StudyKind::FarField: {
        double worst = 0.0, pred_avg = 0.0, truth_avg = 0.0;
        for (const Vec3& d : dirs) {
          const Vec3 x = radius * d;
          const double pred = predict_farfield(eq, field, e, x);
          const double tru = solver::eval_potential(truth.eq, x);
          worst = std::max(worst, std::abs(tru - pred));
          pred_avg += pred / dirs.size();
          truth_avg += tru / dirs.size();
        }
        rep.predicted.push_back(pred_avg);
        rep.truth.push_back(truth_avg);
        rep.residual.push_back(worst);
        break;
      }
      case StudyKind::Current: {
        const VecX pred = predict_current(eq, corrector, field, e).values;
        const VecX& tru = truth.eq.phi0.values;  // pullback = node identity
        rep.predicted.push_back(norm_w(quad, pred));
        rep.truth.push_back(norm_w(quad, tru));
        rep.residual.push_back(norm_w(quad, tru - pred));
        rep.zeroth_residual.push_back(norm_w(quad, tru - eq.phi0.values));
        break;
      }
      case StudyKind::Eigenvector: {
        const VecX pred = predict_eigenvector(eq, corrector, field, e).values;
        VecX tru = truth.eq.phi0.values / norm_w(truth.quad, truth.eq.phi0.values);
        if (inner_w(quad, tru, pred) < 0) tru = -tru;
        rep.predicted.push_back(norm_w(quad, pred));
        rep.truth.push_back(norm_w(quad, tru));
        rep.residual.push_back(norm_w(quad, tru - pred));
        rep.zeroth_residual.push_back(norm_w(quad, tru - phi_hat));
        break;
      }
      case StudyKind::Pairing: {
        const auto [lhs, rhs1] = eigenvector_pairing(eq, field, truth);
        rep.predicted.push_back(rhs1);
        rep.truth.push_back(lhs);
        rep.residual.push_back(std::abs(lhs - rhs1));
        break;
      }
    }
  }

  for (int i = 0; i < static_cast<int>(eps.size()); ++i)
    if (rep.residual[i] >= 10.0 * rep.floor) rep.used_in_fit.push_back(i);

  if (rep.used_in_fit.size() < 2) {
    rep.verdict = "floor-limited";
  } else {
    rep.slope = fit_log_slope(rep.eps, rep.residual, rep.used_in_fit,
                              &rep.intercept);
    rep.verdict = (rep.slope >= rep.slope_lo && rep.slope <= rep.slope_hi)
                      ? "pass"
                      : "fail";
  }
  if (!rep.zeroth_residual.empty() && eps.size() >= 2) {
    std::vector<int> all(eps.size());
    std::iota(all.begin(), all.end(), 0);
    rep.zeroth_slope = fit_log_slope(rep.eps, rep.zeroth_residual, all);
  }
  return rep;
}

}  // namespace capsense::sensitivity
