#include "capsense/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "capsense/oracle.hpp"
#include "capsense/sensitivity.hpp"

namespace capsense::cli {

namespace {

using nlohmann::ordered_json;

constexpr int kSchemaVersion = 1;

std::pair<std::string, std::vector<double>> parse_spec_impl(
    const std::string& s) {
  const auto colon = s.find(':');
  std::pair<std::string, std::vector<double>> out;
  out.first = s.substr(0, colon);
  if (out.first.empty()) throw ConfigError("empty spec: '" + s + "'");
  if (colon == std::string::npos) return out;
  std::stringstream ss(s.substr(colon + 1));
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      size_t pos = 0;
      out.second.push_back(std::stod(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError("bad numeric parameter '" + tok + "' in '" + s + "'");
    }
  }
  return out;
}

geometry::ParametricSurface surface_from(const ExperimentConfig& cfg) {
  const auto [name, params] = parse_spec_impl(cfg.shape);
  return geometry::make_surface({name, params});
}

geometry::PerturbationProfile profile_from(const ExperimentConfig& cfg) {
  if (cfg.h.empty()) throw ConfigError("this command needs --h");
  const auto [name, params] = parse_spec_impl(cfg.h);
  return geometry::make_profile(name, params);
}

ordered_json config_echo(const ExperimentConfig& cfg) {
  ordered_json j;
  j["command"] = cfg.command;
  if (!cfg.kind.empty()) j["kind"] = cfg.kind;
  j["shape"] = cfg.shape;
  if (!cfg.h.empty()) j["h"] = cfg.h;
  if (!cfg.eps.empty()) j["eps"] = cfg.eps;
  j["resolutions"] = cfg.resolutions;
  if (cfg.radius > 0) j["radius"] = cfg.radius;
  if (cfg.command == "spectrum") j["count"] = cfg.count;
  j["threads"] = thread_count();
  if (cfg.tolerance > 0) j["tolerance"] = cfg.tolerance;
  return j;
}

void add_verdict(ordered_json& doc, bool& all_pass, const std::string& name,
                 bool pass, double value, double tolerance) {
  ordered_json v;
  v["name"] = name;
  v["pass"] = pass;
  v["value"] = value;
  v["tolerance"] = tolerance;
  doc["verdicts"].push_back(v);
  all_pass = all_pass && pass;
}

void add_table(ordered_json& doc, const std::string& name,
               const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows) {
  ordered_json t;
  t["name"] = name;
  t["columns"] = columns;
  t["rows"] = rows;
  doc["tables"].push_back(t);
}

// reference capacity when a closed form exists; 0 otherwise
double oracle_capacity(const ExperimentConfig& cfg) {
  const auto [name, params] = parse_spec_impl(cfg.shape);
  if (name == "sphere") return oracle::sphere_capacity(params.at(0));
  if (name == "ellipsoid")
    return oracle::ellipsoid_capacity(params.at(0), params.at(1), params.at(2));
  return 0.0;
}

void run_capacity(const ExperimentConfig& cfg, ordered_json& doc,
                  bool& all_pass) {
  const auto surface = surface_from(cfg);
  const auto quad = geometry::build_quadrature(surface, cfg.resolutions.at(0));
  const auto ops = potential::assemble_all(quad);
  const auto eq = solver::solve_equilibrium(quad, &ops.S);
  const VecX pe = sensitivity::np_first_eigenvector(eq).values;
  const VecX eig_res = ops.Kstar.entries * pe - 0.5 * pe;
  const double radius =
      cfg.radius > 0 ? cfg.radius : 50.0 * surface.diameter;
  const double ff = solver::far_field_coefficient(eq, radius);
  doc["results"]["capacity"] = eq.capacity;
  doc["results"]["far_field_coefficient"] = ff;
  doc["results"]["rcond"] = eq.rcond;
  doc["results"]["nodes"] = quad.size();
  doc["results"]["area"] = quad.area();
  doc["results"]["np_eigen_residual"] = potential::norm_w(quad, eig_res);

  // two-route consistency: Gauss integral vs far-field coefficient
  const double route_tol = 3.0 / radius;
  add_verdict(doc, all_pass, "far_field_route",
              std::abs(ff - eq.capacity) <= route_tol * std::abs(eq.capacity),
              std::abs(ff - eq.capacity) / std::abs(eq.capacity), route_tol);
  const double ref = oracle_capacity(cfg);
  if (ref > 0) {
    const auto [name, params] = parse_spec_impl(cfg.shape);
    const double tol =
        cfg.tolerance > 0 ? cfg.tolerance : (name == "sphere" ? 0.005 : 0.01);
    doc["results"]["reference_capacity"] = ref;
    add_verdict(doc, all_pass, "capacity_vs_reference",
                std::abs(eq.capacity - ref) <= tol * ref,
                std::abs(eq.capacity - ref) / ref, tol);
  }
}

void run_dirichlet(const ExperimentConfig& cfg, ordered_json& doc,
                   bool& all_pass) {
  const auto surface = surface_from(cfg);
  const auto profile = profile_from(cfg);
  const auto quad = geometry::build_quadrature(surface, cfg.resolutions.at(0));
  const auto ops = potential::assemble_all(quad);
  potential::DensityVector f(VecX(quad.size()), quad);
  for (int i = 0; i < quad.size(); ++i)
    f.values[i] = profile.value(quad.x.row(i));
  const auto sol = solver::solve_exterior_dirichlet(quad, f, ops.S, ops.K);
  doc["results"]["density_norm"] = potential::norm_w(quad, sol.phi.values);
  doc["results"]["nodes"] = quad.size();
  // solve residual of the on-surface integral equation
  const VecX res = ops.S.entries * sol.phi.values -
                   (0.5 * f.values + ops.K.entries * f.values);
  const double rel = potential::norm_w(quad, res) /
                     std::max(potential::norm_w(quad, f.values), 1e-300);
  const double tol = cfg.tolerance > 0 ? cfg.tolerance : 1e-10;
  add_verdict(doc, all_pass, "integral_equation_residual", rel <= tol, rel,
              tol);
  const double radius = cfg.radius > 0 ? cfg.radius : 5.0 * surface.diameter;
  ordered_json samples = ordered_json::array();
  for (const Vec3& d :
       {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1), Vec3(-1, 0, 0)}) {
    ordered_json s;
    s["x"] = {radius * d[0], radius * d[1], radius * d[2]};
    s["w"] = solver::eval_potential(sol, radius * d);
    samples.push_back(s);
  }
  doc["results"]["samples"] = samples;
}

void run_study(const ExperimentConfig& cfg, ordered_json& doc,
               bool& all_pass) {
  if (cfg.eps.empty()) throw ConfigError("study needs --eps");
  const auto surface = surface_from(cfg);
  const auto profile = profile_from(cfg);
  sensitivity::StudyConfig sc;
  sc.resolution = cfg.resolutions.at(0);
  if (cfg.resolutions.size() > 1) sc.floor_resolution = cfg.resolutions.at(1);
  sc.farfield_radius = cfg.radius;
  const auto kind = sensitivity::study_kind_from_name(cfg.kind);
  const auto rep =
      sensitivity::run_expansion_study(kind, surface, profile, cfg.eps, sc);

  doc["results"]["kind"] = sensitivity::study_kind_name(rep.kind);
  doc["results"]["floor"] = rep.floor;
  doc["results"]["verdict"] = rep.verdict;
  if (rep.verdict != "floor-limited") doc["results"]["slope"] = rep.slope;
  if (!rep.zeroth_residual.empty())
    doc["results"]["zeroth_slope"] = rep.zeroth_slope;
  std::vector<std::vector<double>> rows;
  for (size_t i = 0; i < rep.eps.size(); ++i)
    rows.push_back(
        {rep.eps[i], rep.predicted[i], rep.truth[i], rep.residual[i]});
  add_table(doc, "study", {"eps", "predicted", "truth", "residual"}, rows);
  add_verdict(doc, all_pass, "expansion_order", rep.verdict != "fail",
              rep.verdict == "floor-limited" ? 0.0 : rep.slope, rep.slope_hi);
}

void run_spectrum(const ExperimentConfig& cfg, ordered_json& doc,
                  bool& all_pass) {
  const auto surface = surface_from(cfg);
  const auto quad = geometry::build_quadrature(surface, cfg.resolutions.at(0));
  const auto vals = sensitivity::np_spectrum_check(quad, cfg.count);
  const double tol = cfg.tolerance > 0 ? cfg.tolerance : 1e-3;
  doc["results"]["eigenvalues"] = vals;
  std::vector<std::vector<double>> rows;
  for (size_t i = 0; i < vals.size(); ++i)
    rows.push_back({static_cast<double>(i), vals[i]});
  add_table(doc, "spectrum", {"index", "eigenvalue"}, rows);
  add_verdict(doc, all_pass, "top_eigenvalue_half",
              std::abs(vals.at(0) - 0.5) <= tol, vals.at(0), tol);
  bool inside = true;
  for (size_t i = 1; i < vals.size(); ++i)
    inside = inside && std::abs(vals[i]) < 0.5 - tol;
  add_verdict(doc, all_pass, "spectrum_inside_interval", inside,
              vals.size() > 1 ? std::abs(vals.at(1)) : 0.0, 0.5 - tol);
}

void run_converge(const ExperimentConfig& cfg, ordered_json& doc,
                  bool& all_pass) {
  if (cfg.resolutions.size() < 3)
    throw ConfigError("converge needs at least 3 resolutions");
  const auto surface = surface_from(cfg);
  const double ref = oracle_capacity(cfg);
  std::vector<double> caps, errs;
  std::vector<std::vector<double>> rows;
  for (int r : cfg.resolutions) {
    const auto eq =
        solver::solve_equilibrium(geometry::build_quadrature(surface, r));
    caps.push_back(eq.capacity);
    const double err =
        ref > 0 ? std::abs(eq.capacity - ref) / ref
                : std::abs(eq.capacity - caps.front()) /
                      std::max(std::abs(caps.front()), 1e-300);
    errs.push_back(err);
    rows.push_back({static_cast<double>(r), eq.capacity, err});
  }
  add_table(doc, "convergence", {"resolution", "capacity", "rel_error"}, rows);
  doc["results"]["capacities"] = caps;

  if (ref > 0) {
    doc["results"]["reference_capacity"] = ref;
    bool decreasing = true;
    for (size_t i = 1; i < errs.size(); ++i)
      decreasing = decreasing && errs[i] <= errs[i - 1];
    // least-squares self-convergence rate from the oracle errors
    std::vector<int> idx;
    std::vector<double> h;
    for (size_t i = 0; i < errs.size(); ++i) {
      idx.push_back(static_cast<int>(i));
      h.push_back(1.0 / cfg.resolutions[i]);
    }
    const double rate = sensitivity::fit_log_slope(h, errs, idx);
    doc["results"]["rate"] = rate;
    add_verdict(doc, all_pass, "errors_decreasing", decreasing,
                errs.back(), errs.front());
    add_verdict(doc, all_pass, "rate_at_least_one", rate >= 1.0, rate, 1.0);
  } else {
    const double self_rate =
        std::log(std::abs(caps[caps.size() - 2] - caps.back()) /
                 std::max(std::abs(caps[0] - caps[1]), 1e-300)) /
        std::log(static_cast<double>(cfg.resolutions[0]) /
                 cfg.resolutions[cfg.resolutions.size() - 1]);
    doc["results"]["self_rate"] = self_rate;
  }
}

int resolve_threads(const ExperimentConfig& cfg) {
  if (cfg.threads > 0) return cfg.threads;
  if (const char* env = std::getenv("CAPSENSE_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
    throw ConfigError("CAPSENSE_THREADS must be a positive integer");
  }
  return thread_count();
}

}  // namespace

std::pair<std::string, std::vector<double>> parse_spec(const std::string& s) {
  return parse_spec_impl(s);
}

RunReport run(const ExperimentConfig& cfg) {
  set_thread_count(resolve_threads(cfg));
  for (int r : cfg.resolutions)
    if (r < 8) throw ConfigError("resolution must be at least 8");
  for (double e : cfg.eps)
    if (!(e > 0)) throw ConfigError("eps values must be positive");
  if (cfg.radius < 0) throw ConfigError("radius must be nonnegative");
  if (cfg.count < 1) throw ConfigError("count must be positive");
  // validate the shape spec before any solve
  (void)surface_from(cfg);

  RunReport rep;
  rep.doc["schema_version"] = kSchemaVersion;
  rep.doc["tool"] = "capsense";
  rep.doc["version"] = "1.0.0";
  rep.doc["config"] = config_echo(cfg);
  rep.doc["results"] = ordered_json::object();
  rep.doc["verdicts"] = ordered_json::array();
  rep.doc["tables"] = ordered_json::array();

  const auto t0 = std::chrono::steady_clock::now();
  bool all_pass = true;
  try {
    if (cfg.command == "capacity")
      run_capacity(cfg, rep.doc, all_pass);
    else if (cfg.command == "dirichlet")
      run_dirichlet(cfg, rep.doc, all_pass);
    else if (cfg.command == "study")
      run_study(cfg, rep.doc, all_pass);
    else if (cfg.command == "spectrum")
      run_spectrum(cfg, rep.doc, all_pass);
    else if (cfg.command == "converge")
      run_converge(cfg, rep.doc, all_pass);
    else
      throw ConfigError("unknown command: " + cfg.command);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    rep.doc["error"] = e.what();
    rep.all_pass = false;
    rep.exit_code = 1;
    return rep;
  }
  const auto t1 = std::chrono::steady_clock::now();
  rep.doc["pass"] = all_pass;
  rep.doc["timings"]["total_s"] =
      std::chrono::duration<double>(t1 - t0).count();
  rep.all_pass = all_pass;
  rep.exit_code = all_pass ? 0 : 1;
  return rep;
}

namespace {

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_double(double v) {
  std::ostringstream ss;
  ss.imbue(std::locale::classic());
  ss << std::setprecision(17) << v;
  return ss.str();
}

}  // namespace

void emit_csv(const RunReport& report, const std::string& base_path) {
  if (!report.doc.contains("tables") || report.doc["tables"].empty()) {
    std::cerr << "capsense: warning: report has no tables, no CSV written\n";
    return;
  }
  std::string stem = base_path.empty() ? "report" : base_path;
  const auto dot = stem.rfind(".json");
  if (dot != std::string::npos && dot == stem.size() - 5)
    stem = stem.substr(0, dot);
  for (const auto& table : report.doc["tables"]) {
    const std::string path =
        stem + "_" + table["name"].get<std::string>() + ".csv";
    std::ofstream f(path);
    if (!f) throw Error("cannot write CSV file: " + path);
    const auto& cols = table["columns"];
    for (size_t i = 0; i < cols.size(); ++i)
      f << (i ? "," : "") << csv_quote(cols[i].get<std::string>());
    f << "\r\n";
    for (const auto& row : table["rows"]) {
      for (size_t i = 0; i < row.size(); ++i)
        f << (i ? "," : "") << format_double(row[i].get<double>());
      f << "\r\n";
    }
  }
}

RunReport convergence_study(const std::string& shape,
                            const std::vector<int>& resolutions) {
  ExperimentConfig cfg;
  cfg.command = "converge";
  cfg.shape = shape;
  cfg.resolutions = resolutions;
  return run(cfg);
}

namespace {

void load_config_file(const std::string& path, ExperimentConfig& cfg) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("bad config file: ") + e.what());
  }
  if (j.contains("kind")) cfg.kind = j["kind"].get<std::string>();
  if (j.contains("shape")) cfg.shape = j["shape"].get<std::string>();
  if (j.contains("h")) cfg.h = j["h"].get<std::string>();
  if (j.contains("eps")) cfg.eps = j["eps"].get<std::vector<double>>();
  if (j.contains("resolutions"))
    cfg.resolutions = j["resolutions"].get<std::vector<int>>();
  if (j.contains("radius")) cfg.radius = j["radius"].get<double>();
  if (j.contains("count")) cfg.count = j["count"].get<int>();
  if (j.contains("out")) cfg.out = j["out"].get<std::string>();
  if (j.contains("csv")) cfg.csv = j["csv"].get<bool>();
  if (j.contains("threads")) cfg.threads = j["threads"].get<int>();
  if (j.contains("tolerance")) cfg.tolerance = j["tolerance"].get<double>();
}

}  // namespace

int main_entry(int argc, char** argv) {
  ExperimentConfig cfg;
  CLI::App app{"boundary-integral capacity and shape-sensitivity toolkit"};
  app.require_subcommand(1);
  app.set_help_flag("--help", "print help");  // frees -h / --h for profiles

  std::string config_path;
  std::string eps_csv, res_csv;
  auto add_common = [&](CLI::App* sub) {
    sub->set_help_flag("--help", "print help");
    sub->add_option("--config", config_path, "JSON config file (flags override)");
    sub->add_option("--shape", cfg.shape, "shape spec name:p1,p2,...");
    sub->add_option("--h", cfg.h, "perturbation/boundary profile name[:params]");
    sub->add_option("--eps", eps_csv, "comma-separated epsilon list");
    sub->add_option("--resolution", res_csv, "nodes per chart direction (list)");
    sub->add_option("--radius", cfg.radius, "far-field sample radius");
    sub->add_option("--out", cfg.out, "JSON report path (default stdout)");
    sub->add_flag("--csv", cfg.csv, "emit CSV tables next to the report");
    sub->add_option("--threads", cfg.threads, "worker thread count");
    sub->add_option("--tolerance", cfg.tolerance, "verdict tolerance override");
  };
  auto* c1 = app.add_subcommand("capacity", "equilibrium charge and capacity");
  auto* c2 = app.add_subcommand("dirichlet", "exterior Dirichlet solve");
  auto* c3 = app.add_subcommand("study", "first-order expansion study");
  auto* c4 = app.add_subcommand("spectrum", "NP operator eigenvalues");
  auto* c5 = app.add_subcommand("converge", "capacity convergence sweep");
  for (auto* sub : {c1, c2, c3, c4, c5}) add_common(sub);
  c3->add_option("--kind", cfg.kind,
                 "current|capacity|farfield|eigenvector|pairing");
  c4->add_option("--count", cfg.count, "number of eigenvalues");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    cfg.command = app.get_subcommands().front()->get_name();
    if (!config_path.empty()) {
      // file first, then re-apply flags so they win
      ExperimentConfig file_cfg;
      load_config_file(config_path, file_cfg);
      file_cfg.command = cfg.command;
      auto merged = file_cfg;
      const auto* sub = app.get_subcommands().front();
      auto given = [sub](const std::string& name) {
        const auto* opt = sub->get_option_no_throw(name);
        return opt != nullptr && opt->count() > 0;
      };
      if (given("--shape")) merged.shape = cfg.shape;
      if (given("--h")) merged.h = cfg.h;
      if (given("--radius")) merged.radius = cfg.radius;
      if (given("--out")) merged.out = cfg.out;
      if (given("--csv")) merged.csv = cfg.csv;
      if (given("--threads")) merged.threads = cfg.threads;
      if (given("--tolerance")) merged.tolerance = cfg.tolerance;
      if (given("--kind")) merged.kind = cfg.kind;
      if (given("--count")) merged.count = cfg.count;
      cfg = merged;
    }
    if (!eps_csv.empty()) {
      cfg.eps.clear();
      for (double v : parse_spec_impl("v:" + eps_csv).second)
        cfg.eps.push_back(v);
    }
    if (!res_csv.empty()) {
      cfg.resolutions.clear();
      for (double v : parse_spec_impl("v:" + res_csv).second)
        cfg.resolutions.push_back(static_cast<int>(v));
    }

    const RunReport rep = run(cfg);
    const std::string text = rep.doc.dump(2) + "\n";
    if (cfg.out.empty()) {
      std::cout << text;
    } else {
      std::ofstream f(cfg.out);
      if (!f) throw ConfigError("cannot write output path: " + cfg.out);
      f << text;
    }
    if (cfg.csv) emit_csv(rep, cfg.out);
    return rep.exit_code;
  } catch (const ConfigError& e) {
    std::cerr << "capsense: configuration error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "capsense: error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace capsense::cli
