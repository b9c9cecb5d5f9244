#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "capsense/types.hpp"

namespace capsense::cli {

/// One experiment run, assembled from command-line flags and (optionally) a
/// JSON config file whose keys mirror the flag names; flags override file
/// values. All numeric fields are validated before any solve starts.
struct ExperimentConfig {
  std::string command;            // capacity | dirichlet | study | spectrum | converge
  std::string kind;               // study kind: current|capacity|farfield|eigenvector|pairing
  std::string shape = "sphere:1"; // name:p1,p2,...
  std::string h;                  // perturbation / boundary-data profile name[:params]
  std::vector<double> eps;        // study epsilon list
  std::vector<int> resolutions = {48};
  double radius = 0.0;            // far-field sample radius; 0 = 50 * diameter
  int count = 10;                 // spectrum eigenvalue count
  std::string out;                // JSON output path; empty = stdout
  bool csv = false;               // also emit CSV tables next to the report
  int threads = 0;                // 0 = CAPSENSE_THREADS or hardware default
  double tolerance = 0.0;         // verdict tolerance override; 0 = per-command default
};

struct RunReport {
  nlohmann::ordered_json doc;
  bool all_pass = true;
  int exit_code = 0;
};

/// Dispatches to the solver/sensitivity layers and assembles the JSON
/// report. Throws ConfigError for invalid configuration (mapped to exit 2);
/// other library errors are embedded into the report with exit code 1.
RunReport run(const ExperimentConfig& config);

/// Writes one CSV file per table section of the report ("<base>_<table>.csv",
/// RFC-4180-style quoting, '.' decimal separator). Logs a warning and writes
/// nothing when the report has no tables.
void emit_csv(const RunReport& report, const std::string& base_path);

/// Capacity per resolution with a self-convergence rate estimate
/// (>= 3 resolutions required).
RunReport convergence_study(const std::string& shape,
                            const std::vector<int>& resolutions);

/// Full command-line entry: parse, run, write outputs, map exceptions to the
/// exit-code contract (0 pass, 1 fail/solver error, 2 configuration error).
int main_entry(int argc, char** argv);

/// Parses "name:p1,p2,..." into a shape or profile spec.
std::pair<std::string, std::vector<double>> parse_spec(const std::string& s);

}  // namespace capsense::cli
