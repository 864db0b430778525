#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "coag/lattice.hpp"

namespace coag {

class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// File layout: a magic line, the header byte count on its own line, a JSON header
/// (dimension, n_max, time, ordering version, count, config), then `count` raw doubles.
/// Nothing time-of-day dependent is stored, so identical runs give identical files.
void write_checkpoint(const std::filesystem::path& path, const PopulationState& state, const nlohmann::json& config);

struct Checkpoint {
  PopulationState state;
  nlohmann::json header;
  const nlohmann::json& config() const { return header.at("config"); }
};

/// Throws CheckpointError on a bad magic line, truncated data, or an ordering-version mismatch.
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Rows (size, alpha_1..alpha_d, n) preceded by a `# config:` comment line.
void write_state_csv(const std::filesystem::path& path, const PopulationState& state, const nlohmann::json& config);

}  // namespace coag
