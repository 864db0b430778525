#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "coag/dynamics.hpp"
#include "coag/kernels.hpp"

namespace coag::cli {

/// Every violated field, one message per entry, each starting with its JSON path.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> issues);
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  std::vector<std::string> issues_;
};

struct AnalysisConfig {
  std::vector<double> flux_radii;
  std::vector<double> localization_radii;
  double b = 0.5;
  double localization_b = 0.1;
  std::vector<double> epsilon{0.15};
  double fit_lo = 0.0;
  double fit_hi = 0.0;
  long lemma_trials = 10000;
  std::uint64_t seed = 42;
};

struct OutputConfig {
  std::string directory = "coagsim-output";
  std::string name = "run";
  bool csv = true;
  bool svg = true;
};

/// Initial state: "zero", "source" (n = injection rates) or "uniform" (every entry = level).
struct InitialConfig {
  std::string kind = "zero";
  double level = 0.0;
};

struct RunConfig {
  int dimension = 0;
  int n_max = 0;
  nlohmann::json kernel;  // validated kernel block
  SourceSpec source;
  SolverOptions solver;
  InitialConfig initial;
  std::optional<InitialConfig> alternate_initial;
  AnalysisConfig analysis;
  OutputConfig output;

  KernelSpec kernel_spec() const;
  /// Fully resolved document with every default filled in.
  nlohmann::json resolved() const;
};

/// Validates and resolves a configuration document; throws ConfigError listing all problems.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);

/// Builds a kernel from a config block; problems are appended to `issues` with `path` prefixes.
std::optional<KernelSpec> kernel_from_json(const nlohmann::json& block, int dimension, const std::string& path,
                                           std::vector<std::string>& issues);

PopulationState make_initial_state(const RunConfig& config, const InitialConfig& initial);

}  // namespace coag::cli
