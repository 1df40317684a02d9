#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace pwmd::cli {

struct CheckResult {
  std::string module;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct VerifyOptions {
  /// Module tag (core, wasserstein, models, bounds, oracles, montecarlo, cli);
  /// empty runs everything.
  std::string filter;
  /// Name of a deliberate perturbation, e.g. "comb_variance" scales the
  /// computed B_n² by 1.01.
  std::string inject_fault;
  std::uint64_t seed = 1;
};

std::vector<std::string> verify_modules();
std::vector<CheckResult> run_verify(const VerifyOptions& options);
void print_verify_table(const std::vector<CheckResult>& results, std::ostream& out);

}  // namespace pwmd::cli
