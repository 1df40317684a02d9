#include "runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "pwmd/error.hpp"
#include "pwmd/oracles.hpp"
#include "pwmd/parallel.hpp"
#include "verify.hpp"

#ifndef PWMD_VERSION
#define PWMD_VERSION "0.0.0"
#endif

namespace pwmd::cli {

namespace fs = std::filesystem;

namespace {

struct Output {
  std::ostringstream summary;
  json results = json::object();
  std::vector<std::pair<std::string, std::string>> tables;  // name, CSV text
  bool checks_failed = false;
  std::string model_tag;
};

std::string bool_str(bool b) { return b ? "true" : "false"; }

std::string joined(const std::vector<std::string>& v) {
  std::string s;
  for (const std::string& x : v) s += (s.empty() ? "" : "; ") + x;
  return s;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

json tail_rows_json(const TailReport& rep) {
  json rows = json::array();
  for (const TailRow& r : rep.rows)
    rows.push_back({{"x", r.x}, {"p_hat", r.p_hat}, {"se", r.se}, {"ci_lo", r.ci_lo}, {"ci_hi", r.ci_hi},
                    {"p_ref", r.p_ref}, {"ratio", r.ratio}, {"ratio_ci_lo", r.ratio_ci_lo},
                    {"ratio_ci_hi", r.ratio_ci_hi}, {"bound_shape", std::isnan(r.bound_shape) ? json() : json(r.bound_shape)},
                    {"feasible", r.feasible}, {"theta", r.theta}});
  return rows;
}

void run_tail_ratio(const ExperimentConfig& cfg, Output& out) {
  const Model model = build_model(cfg.model);
  out.model_tag = model_tag(model);
  std::optional<AppDelta> bound;
  if (cfg.application) bound = app_delta(*cfg.application, cfg.bound_params);
  const TailReport rep = ratio_curve(model, cfg.x_grid, cfg.reps, cfg.seed, cfg.method, bound);
  std::ostringstream csv;
  write_tail_csv(rep, csv);
  out.tables.emplace_back("tail_ratio.csv", csv.str());
  out.results["rows"] = tail_rows_json(rep);
  out.summary << "tail ratio for " << out.model_tag << " (" << to_string(cfg.method) << ", reps " << cfg.reps << ")\n";
  for (const TailRow& r : rep.rows)
    out.summary << "  x = " << format_g17(r.x) << "  ratio = " << r.ratio << "  [" << r.ratio_ci_lo << ", "
                << r.ratio_ci_hi << "]" << (r.feasible ? "" : "  (outside theorem range)") << "\n";
}

void run_scaling(const ExperimentConfig& cfg, Output& out) {
  ScalingReport rep;
  if (!cfg.n_grid.empty()) {
    out.model_tag = model_tag(build_model(cfg.model, cfg.n_grid.front())) + " over n";
    rep = wp_scaling([&](int n) { return build_model(cfg.model, n); }, cfg.n_grid, cfg.p, cfg.reps, cfg.seed);
  } else {
    const Model model = build_model(cfg.model);
    out.model_tag = model_tag(model);
    rep = wp_scaling_in_p(model, cfg.p_grid, cfg.reps, cfg.seed);
  }
  std::ostringstream csv;
  write_scaling_csv(rep, csv);
  out.tables.emplace_back("wasserstein_scaling.csv", csv.str());
  out.results = {{"fitted_exponent", rep.fitted_exponent},
                 {"fitted_log_intercept", rep.fitted_log_intercept},
                 {"r_squared", rep.r_squared},
                 {"floor_dominated", rep.floor_dominated}};
  out.summary << "W_p scaling for " << out.model_tag << " (reps " << cfg.reps << ")\n"
              << "  fitted exponent " << rep.fitted_exponent << ", r^2 " << rep.r_squared
              << (rep.floor_dominated ? ", largest point within 2x of the sampling floor" : "") << "\n";
}

void run_bound_eval(const ExperimentConfig& cfg, Output& out) {
  const AppDelta app = app_delta(*cfg.application, cfg.bound_params);
  out.model_tag = to_string(*cfg.application);
  std::ostringstream csv;
  csv << "x,delta,alpha,p0,range_max_x,smallness_lhs,shape,feasible,violated\n";
  json rows = json::array();
  for (double x : cfg.x_grid) {
    const BoundReport r = app_bound(app, x);
    csv << format_g17(x) << ',' << format_g17(app.delta) << ',' << format_g17(app.alpha) << ','
        << format_g17(app.p0) << ',' << format_g17(app.range_max_x) << ',' << format_g17(app.smallness_lhs) << ','
        << format_g17(r.shape) << ',' << bool_str(r.feasible) << ',' << csv_field(joined(r.violated_conditions)) << '\n';
    rows.push_back({{"x", x}, {"shape", r.shape}, {"feasible", r.feasible}, {"violated", r.violated_conditions}});
  }
  out.tables.emplace_back("bound_eval.csv", csv.str());
  out.results = {{"application", to_string(*cfg.application)}, {"delta", app.delta}, {"deltas", app.deltas},
                 {"alpha", app.alpha}, {"p0", app.p0}, {"range_max_x", app.range_max_x},
                 {"smallness_lhs", app.smallness_lhs}, {"smallness_cap", app.smallness_cap},
                 {"feasible", app.feasible}, {"constants_normalized", true}, {"rows", rows}};
  out.summary << "bound " << to_string(*cfg.application) << ": delta = " << format_g17(app.delta)
              << ", alpha = " << app.alpha << ", p0 = " << app.p0 << ", x range <= " << app.range_max_x << "\n";
  if (!app.feasible) out.summary << "  infeasible: " << joined(app.violated_conditions) << "\n";
}

void run_oracle(const ExperimentConfig& cfg, Output& out) {
  const Model model = build_model(cfg.model);
  out.model_tag = model_tag(model);
  ExactPmf pmf;
  if (const IidSum* m = std::get_if<IidSum>(&model)) pmf = convolve_iid_pmf(m->dist, m->n);
  else if (const CombClt* m = std::get_if<CombClt>(&model)) {
    if (!m->sigma2.isZero()) fail(ErrorKind::capability, "oracle_check: comb_clt needs sigma2 = 0");
    pmf = enumerate_comb(m->c);
  } else if (const HomSum* m = std::get_if<HomSum>(&model)) pmf = enumerate_homsum(*m);
  else fail(ErrorKind::capability, "oracle_check: no exact oracle for " + out.model_tag);

  std::ostringstream pmf_csv;
  write_pmf_csv(pmf, pmf_csv);
  out.tables.emplace_back("pmf.csv", pmf_csv.str());

  std::ostringstream csv;
  csv << "x,p_w,p_ref,ratio,log_ratio";
  if (cfg.reps > 0) csv << ",p_hat,se,within_4se";
  csv << '\n';
  json rows = json::array();
  out.summary << "exact law of " << out.model_tag << ": " << pmf.atoms.size() << " atoms\n";
  for (std::size_t k = 0; k < cfg.x_grid.size(); ++k) {
    const double x = cfg.x_grid[k];
    const TailRatio t = exact_tail_ratio(pmf, x);
    csv << format_g17(x) << ',' << format_g17(t.p_w) << ',' << format_g17(t.p_ref) << ',' << format_g17(t.ratio)
        << ',' << format_g17(t.log_ratio);
    json row{{"x", x}, {"p_w", t.p_w}, {"p_ref", t.p_ref}, {"ratio", t.ratio}};
    if (cfg.reps > 0) {
      const TailRow mc = estimate_tail(model, x, cfg.reps, stream_key(cfg.seed, k), TailMethod::plain);
      const bool ok = std::abs(mc.p_hat - t.p_w) <= 4.0 * mc.se || (mc.se == 0.0 && mc.p_hat == t.p_w);
      csv << ',' << format_g17(mc.p_hat) << ',' << format_g17(mc.se) << ',' << bool_str(ok);
      row["p_hat"] = mc.p_hat;
      row["within_4se"] = ok;
      out.checks_failed |= !ok;
    }
    csv << '\n';
    rows.push_back(row);
    out.summary << "  x = " << format_g17(x) << "  P(W > x) = " << format_g17(t.p_w) << "  ratio = " << format_g17(t.ratio)
                << "\n";
  }
  out.tables.emplace_back("oracle_tail.csv", csv.str());
  out.results = {{"atoms", pmf.atoms.size()}, {"rows", rows}};
}

void run_verify_suite(const ExperimentConfig& cfg, Output& out) {
  const std::vector<CheckResult> results = run_verify({cfg.filter, cfg.inject_fault, cfg.seed});
  std::ostringstream csv;
  csv << "module,check,pass,detail\n";
  json rows = json::array();
  for (const CheckResult& r : results) {
    csv << r.module << ',' << csv_field(r.name) << ',' << bool_str(r.pass) << ',' << csv_field(r.detail) << '\n';
    rows.push_back({{"module", r.module}, {"check", r.name}, {"pass", r.pass}, {"detail", r.detail}});
    out.checks_failed |= !r.pass;
  }
  out.tables.emplace_back("verify.csv", csv.str());
  out.results = {{"checks", rows}};
  print_verify_table(results, out.summary);
  out.model_tag = "verify_suite";
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::capability, "cannot write " + path.string());
  f << text;
}

}  // namespace

void apply_overrides(ExperimentConfig& cfg, const Overrides& o) {
  if (o.seed) cfg.seed = *o.seed;
  if (o.reps) {
    require(*o.reps >= 2, "--reps must be at least 2");
    cfg.reps = *o.reps;
  }
  if (o.threads) {
    require(*o.threads >= 1, "--threads must be at least 1");
    cfg.threads = *o.threads;
  }
  if (o.out_dir) cfg.out_dir = *o.out_dir;
  else if (const char* env = std::getenv("PWMD_OUT_DIR"); env && *env) cfg.out_dir = env;
}

RunResult run_experiment(const ExperimentConfig& cfg, std::ostream& log) {
  const auto start = std::chrono::steady_clock::now();
  const int saved_threads = max_threads();
  if (cfg.threads > 0) set_threads(cfg.threads);
  Output out;
  try {
    switch (cfg.kind) {
      case Kind::tail_ratio: run_tail_ratio(cfg, out); break;
      case Kind::wasserstein_scaling: run_scaling(cfg, out); break;
      case Kind::bound_eval: run_bound_eval(cfg, out); break;
      case Kind::oracle_check: run_oracle(cfg, out); break;
      case Kind::verify_suite: run_verify_suite(cfg, out); break;
    }
  } catch (...) {
    set_threads(saved_threads);
    throw;
  }
  const int threads_used = max_threads();
  set_threads(saved_threads);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  RunResult result;
  result.out_dir = cfg.out_dir;
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  const bool want_csv = std::find(cfg.formats.begin(), cfg.formats.end(), "csv") != cfg.formats.end();
  const bool want_json = std::find(cfg.formats.begin(), cfg.formats.end(), "json") != cfg.formats.end();
  if (want_csv)
    for (const auto& [name, text] : out.tables) {
      write_file(dir / name, text);
      result.artifacts.push_back(name);
    }
  if (want_json) {
    write_file(dir / "results.json", out.results.dump(2) + "\n");
    result.artifacts.push_back("results.json");
  }
  write_file(dir / "summary.txt", out.summary.str());
  result.artifacts.push_back("summary.txt");

  json manifest{{"manifest_version", 1},
                {"config", cfg.to_json()},
                {"kind", to_string(cfg.kind)},
                {"seed", cfg.seed},
                {"reps", cfg.reps},
                {"model", out.model_tag},
                {"threads", threads_used},
                {"versions", {{"pwmd", PWMD_VERSION}, {"compiler", __VERSION__}}},
                {"wall_time_seconds", wall},
                {"artifacts", result.artifacts},
                {"results", out.results}};
  if (cfg.kind == Kind::tail_ratio) manifest["method"] = to_string(cfg.method);
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  result.artifacts.push_back("manifest.json");

  log << out.summary.str();
  log << "wrote " << result.artifacts.size() << " artifacts to " << dir.string() << "\n";
  result.exit_code = out.checks_failed ? kExitChecksFailed : kExitOk;
  return result;
}

int report_error(std::ostream& err) {
  try {
    throw;
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return e.kind() == ErrorKind::validation ? kExitValidation : kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int run_config_file(const std::string& path, const Overrides& overrides, std::ostream& log, std::ostream& err) {
  try {
    ExperimentConfig cfg = load_config(path);
    apply_overrides(cfg, overrides);
    return run_experiment(cfg, log).exit_code;
  } catch (...) {
    return report_error(err);
  }
}

}  // namespace pwmd::cli
