#pragma once

#include "nlgrad/config.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace nlgrad {

enum ExitStatus : int { kExitSuccess = 0, kExitCheckFailed = 1, kExitValidation = 2, kExitSolver = 3 };

struct RunOptions {
  std::string config_path;
  /// Overrides output.dir when set.
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

/// Validates, runs and writes results.csv, summary.json and manifest.json
/// (plus fields/*.bin and plots/*.dat where applicable) into the output
/// directory. Returns an ExitStatus; diagnostics go to stderr.
int run_experiment(ExperimentConfig config, const RunOptions& options);

}  // namespace nlgrad
