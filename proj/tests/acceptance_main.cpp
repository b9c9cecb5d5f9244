// Acceptance suite: one pass/fail line per criterion, exit code = number of
// failed criteria. Each criterion pins its tolerances in code.
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "capsense/cli.hpp"
#include "capsense/harmonics.hpp"
#include "capsense/oracle.hpp"
#include "capsense/reference.hpp"
#include "capsense/sensitivity.hpp"

using namespace capsense;
using potential::inner_w;
using potential::norm_w;

namespace {

int g_failures = 0;

void criterion(const std::string& name, const std::function<bool(std::string&)>& body) {
  std::string detail;
  bool ok = false;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double dt =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  std::printf("%s  %-34s (%6.1fs)  %s\n", ok ? "PASS" : "FAIL", name.c_str(),
              dt, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

struct Solved {
  geometry::SurfaceQuadrature quad;
  potential::OperatorSet ops;
  solver::EquilibriumSolution eq;
};

Solved solve_shape(const geometry::ShapeSpec& spec, int res) {
  Solved s;
  s.quad = geometry::build_quadrature(geometry::make_surface(spec), res);
  s.ops = potential::assemble_all(s.quad);
  s.eq = solver::solve_equilibrium(s.quad, &s.ops.S);
  return s;
}

VecX smooth_density(const geometry::SurfaceQuadrature& quad, unsigned seed) {
  std::uint64_t state = 0x243f6a8885a308d3ull ^ (seed * 0x9e3779b97f4a7c15ull);
  auto next = [&state]() {
    state = state * 6364136223846793005ull + 1442695040888963407ull;
    return (static_cast<double>(state >> 11) / (1ull << 53)) - 0.5;
  };
  std::vector<std::pair<std::pair<int, int>, double>> modes;
  for (int l = 0; l <= 3; ++l)
    for (int m = -l; m <= l; ++m) modes.push_back({{l, m}, next()});
  VecX out = VecX::Zero(quad.size());
  for (int i = 0; i < quad.size(); ++i)
    for (const auto& [lm, c] : modes)
      out[i] += c * sphere_harmonic(lm.first, lm.second, Vec3(quad.x.row(i)));
  return out;
}

char buf[512];

}  // namespace

int main() {
  std::printf("capsense acceptance suite\n");

  // shared solves
  const auto sphere64 = solve_shape({"sphere", {1.0}}, 64);
  const auto sphere48 = solve_shape({"sphere", {1.0}}, 48);
  const auto sphere_surface = geometry::make_surface({"sphere", {1.0}});
  const auto one = geometry::make_profile("one");
  const auto y20 = geometry::make_profile("Y20");

  // 1. capacity against the analytic oracles
  criterion("1 capacity oracles", [&](std::string& d) {
    const auto t0 = std::chrono::steady_clock::now();
    const double cap_s = sphere64.eq.capacity;
    const double ts =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    const auto t1 = std::chrono::steady_clock::now();
    const auto ell = solve_shape({"ellipsoid", {2.0, 1.0, 0.5}}, 64);
    const double te =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t1)
            .count();
    const double ref = oracle::ellipsoid_capacity(2.0, 1.0, 0.5);
    std::snprintf(buf, sizeof buf,
                  "sphere %.6f (err %.1e), ellipsoid %.6f vs %.6f (err %.1e)",
                  cap_s, std::abs(cap_s - 1.0), ell.eq.capacity, ref,
                  std::abs(ell.eq.capacity - ref) / ref);
    d = buf;
    return std::abs(cap_s - 1.0) <= 0.005 &&
           std::abs(ell.eq.capacity - ref) <= 0.01 * ref && ts <= 60.0 &&
           te <= 60.0;
  });

  // 2. constant-density identities of the double layer and NP operator
  criterion("2 double-layer identities", [&](std::string& d) {
    const auto& st = sphere64;
    const VecX k1 = st.ops.K.entries * VecX::Ones(st.quad.size());
    const double k_err = (k1.array() - 0.5).abs().maxCoeff();
    potential::DensityVector ones(VecX::Ones(st.quad.size()), st.quad);
    const double d_out =
        std::abs(potential::eval_double_layer(st.quad, ones, Vec3(4, 1, 2)));
    const double d_in = std::abs(
        potential::eval_double_layer(st.quad, ones, Vec3(0.03, -0.02, 0.01)) -
        1.0);
    std::snprintf(buf, sizeof buf, "K[1]-1/2: %.1e, D[1] out: %.1e, in: %.1e",
                  k_err, d_out, d_in);
    d = buf;
    return k_err <= 1e-3 && d_out <= 1e-3 && d_in <= 1e-3;
  });

  // 3. jump-relation closure for 20 random smooth densities
  criterion("3 jump-relation closure", [&](std::string& d) {
    const auto& st = sphere64;
    const double offset = 1e-2;
    const int N = st.quad.size();
    MatX Ep(N, N), Em(N, N);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < N; ++i) {
      for (int side = 0; side < 2; ++side) {
        MatX& E = side == 0 ? Ep : Em;
        const double off = side == 0 ? offset : -offset;
        const Vec3 xt = Vec3(st.quad.x.row(i)) + off * Vec3(st.quad.n.row(i));
        E.row(i) = potential::single_layer_eval_row(st.quad, xt);
      }
    }
    double worst = 0.0;
    for (unsigned seed = 0; seed < 20; ++seed) {
      const VecX phi = smooth_density(st.quad, seed);
      const VecX fd = (Ep * phi - Em * phi) / (2 * offset) + 0.5 * phi;
      const VecX target = 0.5 * phi + st.ops.Kstar.entries * phi;
      worst = std::max(worst, norm_w(st.quad, fd - target) /
                                  norm_w(st.quad, target));
    }
    std::snprintf(buf, sizeof buf, "worst relative L2_w error %.2e", worst);
    d = buf;
    return worst <= 0.01;
  });

  // 4. first-order capacity sensitivity
  sensitivity::StudyConfig sc48;
  sc48.resolution = 48;
  criterion("4 capacity expansion", [&](std::string& d) {
    const auto h1 = geometry::sample_profile(one, sphere48.quad);
    const double t1 = sensitivity::capacity_first_order(sphere48.eq, h1);
    const double fd =
        oracle::fd_capacity_derivative(sphere_surface, one, 1e-2, 48);
    const auto rep = sensitivity::run_expansion_study(
        sensitivity::StudyKind::Capacity, sphere_surface, y20,
        {0.02, 0.04, 0.08}, sc48);
    std::snprintf(buf, sizeof buf,
                  "T1 %.6f, fd %.6f, Y20 study %s slope %.3f", t1, fd,
                  rep.verdict.c_str(), rep.slope);
    d = buf;
    const bool study_ok = rep.verdict == "pass" || rep.verdict == "floor-limited";
    return std::abs(t1 - 1.0) <= 0.005 && std::abs(t1 - fd) <= 0.01 &&
           study_ok && (rep.verdict != "pass" ||
                        (rep.slope >= 1.7 && rep.slope <= 2.3));
  });

  // 5. first-order current expansion
  sensitivity::ExpansionReport current_rep;
  criterion("5 current expansion", [&](std::string& d) {
    const auto h1 = geometry::sample_profile(one, sphere48.quad);
    const auto corr = sensitivity::solve_corrector(sphere48.eq, h1,
                                                   sphere48.ops.S,
                                                   sphere48.ops.K);
    const double eps = 0.1;
    const auto pred = sensitivity::predict_current(sphere48.eq, corr, h1, eps);
    const auto truth = sensitivity::resolve_perturbed(sphere48.eq, one, eps);
    const double rms =
        norm_w(sphere48.quad, truth.eq.phi0.values - pred.values) /
        std::sqrt(sphere48.quad.area());
    const double analytic = eps * eps / (1 + eps);
    current_rep = sensitivity::run_expansion_study(
        sensitivity::StudyKind::Current, sphere_surface, y20,
        {0.02, 0.04, 0.08}, sc48);
    std::snprintf(buf, sizeof buf,
                  "h=1 residual %.3e vs eps^2/(1+eps)=%.3e, Y20 slope %.3f",
                  rms, analytic, current_rep.slope);
    d = buf;
    return std::abs(rms - analytic) <= 0.2 * analytic &&
           current_rep.verdict == "pass" && current_rep.slope >= 1.7 &&
           current_rep.slope <= 2.3;
  });

  // 6. far-field expansion
  criterion("6 far-field expansion", [&](std::string& d) {
    const auto h1 = geometry::sample_profile(one, sphere48.quad);
    const double eps_s = 0.1, R_s = 100.0;
    const auto truth_s = sensitivity::resolve_perturbed(sphere48.eq, one, eps_s);
    double worst_s = 0.0;
    const auto ell = solve_shape({"ellipsoid", {2.0, 1.0, 0.5}}, 48);
    const auto h1e = geometry::sample_profile(one, ell.quad);
    const double eps_e = 0.05, R_e = 200.0;
    const auto truth_e = sensitivity::resolve_perturbed(ell.eq, one, eps_e);
    double worst_e = 0.0;
    for (int ix = -1; ix <= 1; ++ix)
      for (int iy = -1; iy <= 1; ++iy)
        for (int iz = -1; iz <= 1; ++iz) {
          if (ix == 0 && iy == 0 && iz == 0) continue;
          const Vec3 dir = Vec3(ix, iy, iz).normalized();
          worst_s = std::max(
              worst_s,
              std::abs(solver::eval_potential(truth_s.eq, R_s * dir) -
                       sensitivity::predict_farfield(sphere48.eq, h1, eps_s,
                                                     R_s * dir)));
          worst_e = std::max(
              worst_e,
              std::abs(solver::eval_potential(truth_e.eq, R_e * dir) -
                       sensitivity::predict_farfield(ell.eq, h1e, eps_e,
                                                     R_e * dir)));
        }
    const double bound_s = 2.0 * (eps_s * eps_s / R_s + eps_s / (R_s * R_s));
    const double bound_e = 2.0 * (eps_e * eps_e / R_e + eps_e / (R_e * R_e));
    std::snprintf(buf, sizeof buf,
                  "sphere err %.2e <= %.2e, ellipsoid err %.2e <= %.2e",
                  worst_s, bound_s, worst_e, bound_e);
    d = buf;
    return worst_s <= bound_s && worst_e <= bound_e;
  });

  // 7. eigenvector expansion and pairing
  criterion("7 eigenvector expansion", [&](std::string& d) {
    const auto h1 = geometry::sample_profile(one, sphere48.quad);
    const auto truth = sensitivity::resolve_perturbed(sphere48.eq, one, 0.05);
    const auto [lhs, rhs] =
        sensitivity::eigenvector_pairing(sphere48.eq, h1, truth);
    const auto rep_e = sensitivity::run_expansion_study(
        sensitivity::StudyKind::Eigenvector, sphere_surface, y20,
        {0.02, 0.04, 0.08}, sc48);
    const auto rep_p = sensitivity::run_expansion_study(
        sensitivity::StudyKind::Pairing, sphere_surface, y20,
        {0.02, 0.04, 0.08}, sc48);
    // predicted eigenvector stays normalized to first order
    const auto hy = geometry::sample_profile(y20, sphere48.quad);
    const auto corr = sensitivity::solve_corrector(sphere48.eq, hy,
                                                   sphere48.ops.S,
                                                   sphere48.ops.K);
    const double e7 = 0.05;
    const auto pred =
        sensitivity::predict_eigenvector(sphere48.eq, corr, hy, e7);
    const auto phi_hat = sensitivity::np_first_eigenvector(sphere48.eq);
    const double ip = inner_w(sphere48.quad, pred.values, phi_hat.values);
    std::snprintf(
        buf, sizeof buf,
        "lhs %.4f rhs %.4f, slopes %.3f/%.3f, <pred,phi0>-1 = %.2e", lhs,
        rhs, rep_e.slope, rep_p.slope, ip - 1.0);
    d = buf;
    return std::abs(lhs - (-0.05)) <= 0.1 * 0.05 &&
           std::abs(rhs - (-0.05)) <= 0.1 * 0.05 &&
           rep_e.verdict == "pass" && rep_e.slope >= 1.7 &&
           rep_e.slope <= 2.3 && rep_p.verdict == "pass" &&
           rep_p.slope >= 1.7 && rep_p.slope <= 2.3 &&
           std::abs(ip - 1.0) <= 10 * e7 * e7;
  });

  // 8. NP spectrum
  criterion("8 NP spectrum", [&](std::string& d) {
    const auto s32 = solve_shape({"sphere", {1.0}}, 32);
    const auto vals =
        sensitivity::np_spectrum_check(s32.quad, s32.ops.Kstar, 10);
    std::vector<double> expect{0.5};
    for (int l = 1; l <= 3 && expect.size() < 10; ++l)
      for (int m = -l; m <= l && expect.size() < 10; ++m)
        expect.push_back(oracle::sphere_np_eigenvalue(l));
    double worst = 0.0;
    for (int i = 0; i < 10; ++i)
      worst = std::max(worst, std::abs(vals[i] - expect[i]));
    const auto ell = solve_shape({"ellipsoid", {2.0, 1.0, 0.5}}, 48);
    const auto ev =
        sensitivity::np_spectrum_check(ell.quad, ell.ops.Kstar, 8);
    bool inside = true;
    for (size_t i = 1; i < ev.size(); ++i)
      inside = inside && std::abs(ev[i]) < 0.5;
    double worst_pert = 0.0;
    for (double e : {0.02, 0.04, 0.08}) {
      const auto q = geometry::build_quadrature(
          geometry::perturb_surface(sphere_surface, y20, e), 24);
      worst_pert = std::max(
          worst_pert, std::abs(sensitivity::np_spectrum_check(q, 1)[0] - 0.5));
    }
    std::snprintf(buf, sizeof buf,
                  "sphere top10 err %.2e, ellipsoid top %.6f inside=%d, "
                  "perturbed top err %.1e",
                  worst, ev[0], static_cast<int>(inside), worst_pert);
    d = buf;
    return worst <= 1e-3 && std::abs(ev[0] - 0.5) <= 1e-3 && inside &&
           worst_pert <= 1e-3;
  });

  // 9. first-order bound on the perturbed density
  criterion("9 density estimate", [&](std::string& d) {
    std::snprintf(buf, sizeof buf, "||phi_eps - phi0|| slope %.3f",
                  current_rep.zeroth_slope);
    d = buf;
    return current_rep.zeroth_slope >= 0.9;
  });

  // 10. determinism
  criterion("10 determinism", [&](std::string& d) {
    cli::ExperimentConfig cfg;
    cfg.command = "capacity";
    cfg.shape = "ellipsoid:2,1,0.5";
    cfg.resolutions = {16};
    cfg.threads = 2;
    auto a = cli::run(cfg);
    auto b = cli::run(cfg);
    a.doc.erase("timings");
    b.doc.erase("timings");
    const bool bytes_equal = a.doc.dump() == b.doc.dump();
    cfg.threads = 1;
    auto c = cli::run(cfg);
    const double ca = a.doc["results"]["capacity"].get<double>();
    const double cc = c.doc["results"]["capacity"].get<double>();
    const bool threads_agree = std::abs(ca - cc) <= 1e-12 * std::abs(ca);
    set_thread_count(2);
    std::snprintf(buf, sizeof buf, "byte-identical=%d, thread drift %.1e",
                  static_cast<int>(bytes_equal), std::abs(ca - cc));
    d = buf;
    return bytes_equal && threads_agree;
  });

  std::printf("%d of 10 criteria failed\n", g_failures);
  return g_failures;
}
