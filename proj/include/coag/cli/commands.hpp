#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "coag/cli/config.hpp"

namespace coag::cli {

/// Exit-code contract shared by every subcommand.
enum ExitCode : int { kOk = 0, kInvalidInput = 1, kDiverged = 2, kBudgetExhausted = 3 };

struct GlobalOptions {
  std::optional<int> threads;
  bool reproducible = false;
  std::optional<std::string> output_dir;
};

/// --output-dir, then COAGSIM_OUTPUT_DIR, then the config's output.directory.
std::filesystem::path resolve_output_dir(const GlobalOptions& global, const RunConfig& config);

/// Applies --threads / --reproducible on top of the config file.
void apply_globals(const GlobalOptions& global, RunConfig& config);

int simulate(const std::filesystem::path& config_path, const GlobalOptions& global, std::ostream& out,
             std::ostream& err);

struct AnalyzeOptions {
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> config;  // overrides the config embedded in the checkpoint
  std::uint64_t seed = 42;
  std::optional<long> trials;
};

/// subcommand is one of flux, localize, scaling, lemma.
int analyze(const std::string& subcommand, const AnalyzeOptions& options, const GlobalOptions& global,
            std::ostream& out, std::ostream& err);

int sweep(const std::filesystem::path& template_path, const std::filesystem::path& grid_path,
          const GlobalOptions& global, std::ostream& out, std::ostream& err);

/// Writes `rows` as RFC-4180 CSV preceded by a `# config:` comment line.
void write_csv(const std::filesystem::path& path, const nlohmann::json& config, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

}  // namespace coag::cli
