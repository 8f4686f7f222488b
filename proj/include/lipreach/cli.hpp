#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lipreach/reach.hpp"
#include "lipreach/sim.hpp"

namespace lipreach::cli {

enum ExitCode : int { kExitSafe = 0, kExitUnsafe = 1, kExitUnknown = 2, kExitError = 3 };

struct LoadedModel {
  sim::NncsModel model;
  reach::Box init;
  reach::SafetySpec safety;
};

/// Validates a model document. Errors carry a JSON-pointer path, e.g.
/// "/plant/dynamics/1: unknown identifier 'y' at line 1, column 4".
LoadedModel parse_model(const nlohmann::json& doc, std::size_t substeps = sim::kDefaultSubsteps);
LoadedModel load_model(const std::filesystem::path& path, std::size_t substeps = sim::kDefaultSubsteps);

enum class OutputFormat { Csv, Json };

struct RunConfig {
  std::string model_path;
  double horizon = 0.0;
  std::vector<double> times;  // explicit grid; empty means per_step
  std::size_t per_step = 1;   // samples per control step
  double eps = optim::kDefaultTolerance;
  std::size_t kmax = optim::kDefaultMaxIterations;
  double r = optim::kDefaultReliability;
  std::string strategy = "local";  // fixed | global | local
  double lipschitz = 0.0;          // fixed strategy only
  std::size_t substeps = sim::kDefaultSubsteps;
  std::size_t oracle_grid = 1000;  // 0 disables oracle metrics
  unsigned threads = 1;
  std::string out;  // empty or "-" writes to stdout
  OutputFormat format = OutputFormat::Csv;

  void validate() const;
  optim::OptOptions opt_options() const;
};

/// Output grid: the explicit list, or every control_step / per_step up to
/// the horizon (the horizon itself is appended when off-grid).
std::vector<double> output_times(const RunConfig& cfg, double control_step);

/// Runs the pipeline and writes the tube. Returns an ExitCode; errors are
/// reported on `diag` and map to kExitError.
int run(const RunConfig& cfg, std::ostream& stdout_sink, std::ostream& diag);

/// Parses argv (CLI11) and calls run().
int main_entry(int argc, char** argv);

}  // namespace lipreach::cli
