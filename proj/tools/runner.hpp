#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"

namespace pwmd::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitChecksFailed = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitRuntime = 3;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps;
  std::optional<std::string> out_dir;
  std::optional<int> threads;
};

/// Applies command-line overrides; PWMD_OUT_DIR replaces the configured
/// output directory unless --out is given.
void apply_overrides(ExperimentConfig& cfg, const Overrides& overrides);

struct RunResult {
  int exit_code = kExitOk;
  std::string out_dir;
  std::vector<std::string> artifacts;  // file names inside out_dir
};

/// Executes one experiment and writes its CSV tables, results.json (when
/// requested), manifest.json and summary.txt into cfg.out_dir.
RunResult run_experiment(const ExperimentConfig& cfg, std::ostream& log);

/// Loads, overrides and runs a config file. Errors are reported on `err` and
/// mapped to exit codes: validation 2, any other failure 3.
int run_config_file(const std::string& path, const Overrides& overrides, std::ostream& log, std::ostream& err);

/// Maps an exception to its exit code after printing a diagnostic.
int report_error(std::ostream& err);

}  // namespace pwmd::cli
