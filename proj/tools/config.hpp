#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pwmd/bounds.hpp"
#include "pwmd/models.hpp"
#include "pwmd/montecarlo.hpp"

namespace pwmd::cli {

using nlohmann::json;

enum class Kind { tail_ratio, wasserstein_scaling, bound_eval, oracle_check, verify_suite };

const char* to_string(Kind kind) noexcept;

struct ExperimentConfig {
  Kind kind = Kind::tail_ratio;
  json model;  // validated model block, null when unused
  std::vector<double> x_grid;
  std::vector<int> n_grid;
  std::vector<double> p_grid;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
  TailMethod method = TailMethod::plain;
  double p = 1.0;
  int threads = 0;
  std::string out_dir = "pwmd_out";
  std::vector<std::string> formats{"csv"};
  std::optional<Application> application;
  AppParams bound_params;
  std::string filter;
  std::string inject_fault;

  /// Canonical JSON form; parse_config(to_json()) reproduces the config.
  json to_json() const;
};

/// Parses a TOML or JSON document. Unknown keys, missing required fields and
/// ill-typed values throw validation errors naming the offending field. A
/// manifest written by `run` is accepted and yields its embedded config.
ExperimentConfig parse_config(const json& doc);
ExperimentConfig load_config(const std::string& path);
json parse_document(const std::string& text, bool toml);

/// Builds a model from a model block. For wasserstein_scaling families the
/// block omits `n` and it is supplied here.
Model build_model(const json& block, std::optional<int> n_override = std::nullopt);
DistSpec build_dist(const json& node, const std::string& where);

}  // namespace pwmd::cli
