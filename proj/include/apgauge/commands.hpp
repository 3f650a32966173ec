#pragma once

#include "apgauge/config.hpp"

#include <string>
#include <vector>

namespace apgauge {

struct CommandResult {
  std::vector<std::string> files;  // relative to the output directory
  std::string summary;             // human-readable, also printed by the CLI
};

const std::vector<std::string>& command_names();

// Runs one of conditions | zones | gauge | ids | oracle | converge | propagate,
// writing tables, records and manifest.json into out_dir (created if needed).
CommandResult run_command(const std::string& name, const RunConfig& cfg, const std::string& out_dir);

}  // namespace apgauge
