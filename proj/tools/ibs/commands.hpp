#pragma once

#include <optional>
#include <string>
#include <vector>

#include "config.hpp"

namespace ibs::cli {

struct RunOptions {
  std::string out_dir = ".";
  int threads = 0;
  std::optional<std::string> data_path;
  std::optional<std::vector<double>> theta;
};

std::vector<std::string> command_names();

/// Runs one command against a resolved config. Errors surface as
/// ConfigError, DataError, or any other exception (estimation failures).
void run_command(const std::string& command, const json& cfg, const RunOptions& opts);

/// Full command line entry point; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace ibs::cli
