#include <filesystem>
#include <fstream>
#include <sstream>

#include "config.hpp"
#include "doctest.h"
#include "pwmd/error.hpp"
#include "runner.hpp"
#include "verify.hpp"

using namespace pwmd;
using namespace pwmd::cli;
namespace fs = std::filesystem;

namespace {

const char* kTail = R"(kind = "tail_ratio"
[model]
type = "iid_sum"
n = 4
dist = "rademacher"
[grid]
x = [0.0, 0.5]
[estimation]
reps = 20000
seed = 3
)";

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("pwmd_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ErrorKind parse_error_kind(const std::string& text) {
  try {
    parse_config(parse_document(text, true));
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::divergence;
}

}  // namespace

TEST_CASE("toml and json documents parse to the same config") {
  const ExperimentConfig a = parse_config(parse_document(kTail, true));
  const ExperimentConfig b = parse_config(a.to_json());
  CHECK(a.to_json() == b.to_json());
  CHECK(a.kind == Kind::tail_ratio);
  CHECK(a.reps == 20000);
  CHECK(a.x_grid.size() == 2);
}

TEST_CASE("strict validation") {
  CHECK(parse_error_kind(std::string(kTail) + "bogus = 1\n") == ErrorKind::validation);
  std::string no_reps = kTail;
  no_reps.replace(no_reps.find("reps = 20000\n"), 13, "");
  CHECK(parse_error_kind(no_reps) == ErrorKind::validation);
  std::string no_seed = kTail;
  no_seed.replace(no_seed.find("seed = 3\n"), 9, "");
  CHECK(parse_error_kind(no_seed) == ErrorKind::validation);
  std::string bad_dist = kTail;
  bad_dist.replace(bad_dist.find("rademacher"), 10, "cauchy");
  CHECK(parse_error_kind(bad_dist) == ErrorKind::validation);
}

TEST_CASE("exit codes from config files") {
  const fs::path dir = scratch("exit");
  std::ostringstream log, err;
  {
    std::ofstream(dir / "bad.toml") << "kind = \"tail_ratio\"\n";
  }
  CHECK(run_config_file((dir / "bad.toml").string(), {}, log, err) == kExitValidation);
  CHECK(run_config_file((dir / "missing.toml").string(), {}, log, err) != kExitOk);
  {
    std::ofstream(dir / "ok.toml") << kTail;
  }
  Overrides o;
  o.out_dir = (dir / "out").string();
  CHECK(run_config_file((dir / "ok.toml").string(), o, log, err) == kExitOk);
  CHECK(fs::exists(dir / "out" / "tail_ratio.csv"));
  CHECK(fs::exists(dir / "out" / "manifest.json"));
  fs::remove_all(dir);
}

TEST_CASE("manifest re-run reproduces the csv byte for byte") {
  const fs::path dir = scratch("manifest");
  std::ostringstream log, err;
  {
    std::ofstream(dir / "cfg.toml") << kTail;
  }
  Overrides first;
  first.out_dir = (dir / "a").string();
  REQUIRE(run_config_file((dir / "cfg.toml").string(), first, log, err) == kExitOk);
  Overrides second;
  second.out_dir = (dir / "b").string();
  second.threads = 3;
  REQUIRE(run_config_file((dir / "a" / "manifest.json").string(), second, log, err) == kExitOk);
  CHECK(slurp(dir / "a" / "tail_ratio.csv") == slurp(dir / "b" / "tail_ratio.csv"));
  fs::remove_all(dir);
}

TEST_CASE("overrides replace seed and reps") {
  ExperimentConfig cfg = parse_config(parse_document(kTail, true));
  Overrides o;
  o.seed = 99;
  o.reps = 10;
  o.threads = 2;
  apply_overrides(cfg, o);
  CHECK(cfg.seed == 99);
  CHECK(cfg.reps == 10);
  CHECK(cfg.threads == 2);
}

TEST_CASE("verify passes and an injected fault fails") {
  VerifyOptions opts;
  opts.filter = "oracles";
  const auto clean = run_verify(opts);
  REQUIRE_FALSE(clean.empty());
  for (const CheckResult& r : clean) CHECK_MESSAGE(r.pass, r.name);
  opts.filter = "";
  opts.inject_fault = "comb_variance";
  bool any_failed = false;
  for (const CheckResult& r : run_verify(opts)) any_failed |= !r.pass;
  CHECK(any_failed);
}
