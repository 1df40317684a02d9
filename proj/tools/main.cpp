#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "config.hpp"
#include "pwmd/error.hpp"
#include "pwmd/oracles.hpp"
#include "pwmd/parallel.hpp"
#include "pwmd/wasserstein.hpp"
#include "runner.hpp"
#include "verify.hpp"

using namespace pwmd;
using namespace pwmd::cli;

namespace {

json scalar_from_text(const std::string& text) {
  if (!text.empty() && text.front() == '[') return parse_document(text, false);
  char* end = nullptr;
  const long long i = std::strtoll(text.c_str(), &end, 10);
  if (end && *end == '\0' && !text.empty()) return i;
  const double d = std::strtod(text.c_str(), &end);
  if (end && *end == '\0' && !text.empty()) return d;
  return text;
}

std::pair<std::string, std::string> split_assignment(const std::string& token) {
  const auto eq = token.find('=');
  require(eq != std::string::npos && eq > 0, "expected key=value, got '" + token + "'");
  return {token.substr(0, eq), token.substr(eq + 1)};
}

PointCloud read_cloud(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    for (char& c : line)
      if (c == ',' || c == ';' || c == '\t') c = ' ';
    std::istringstream ls(line);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    if (!ls.eof()) {
      require(rows.empty(), "'" + path + "': non-numeric data after the header");
      continue;
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  require(!rows.empty(), "'" + path + "' holds no points");
  PointCloud x(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i].size() == rows[0].size(), "'" + path + "': rows differ in length");
    for (std::size_t k = 0; k < rows[i].size(); ++k) x(i, k) = rows[i][k];
  }
  return x;
}

void print_transport(const TransportResult& r) {
  std::cout << "method,p,distance,plan_cost,iterations,converged\n"
            << to_string(r.method) << ',' << format_g17(r.p) << ',' << format_g17(r.distance) << ','
            << format_g17(r.plan_cost) << ',' << r.iterations << ',' << (r.converged ? "true" : "false") << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Moderate-deviation and Wasserstein experiments for normal approximation"};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides overrides;
  std::uint64_t seed = 0;
  std::size_t reps = 0;
  std::string out_dir;
  int threads = 0;
  app.add_option("--seed", seed, "Override the experiment seed");
  app.add_option("--reps", reps, "Override the replication count");
  app.add_option("--out", out_dir, "Output directory (takes precedence over PWMD_OUT_DIR)");
  app.add_option("--threads", threads, "OpenMP thread count")->check(CLI::PositiveNumber);

  auto* run = app.add_subcommand("run", "Run an experiment config (TOML or JSON)");
  std::string config_path;
  run->add_option("config", config_path, "Config file")->required();

  auto* verify = app.add_subcommand("verify", "Run the invariant checks of every module");
  std::string filter, fault;
  verify->add_option("--filter", filter, "Only run checks of one module");
  verify->add_option("--inject-fault", fault, "Perturb a formula to confirm its check fails");

  auto* bound = app.add_subcommand("bound", "Evaluate an application bound shape");
  std::string application;
  std::vector<std::string> bound_params;
  std::vector<double> xs{0.0};
  bound->add_option("application", application, "iid, comb, dejong, qf, wiener_simple, chi, mdep, local_bounded, local_unbounded")->required();
  bound->add_option("params", bound_params, "key=value inputs, e.g. n=1e4 b=1 d=16");
  bound->add_option("--x", xs, "x grid")->delimiter(',');

  auto* oracle = app.add_subcommand("oracle", "Exact law and tail ratios of a small model");
  std::vector<std::string> model_tokens;
  std::vector<double> oracle_xs{0.0};
  oracle->add_option("model", model_tokens, "type followed by key=value, e.g. iid_sum n=4 dist=rademacher")->required();
  oracle->add_option("--x", oracle_xs, "x grid")->delimiter(',');

  auto* wass = app.add_subcommand("wasserstein", "W_p between point files, or one sample against N(0,1)");
  std::vector<std::string> files;
  double p = 2.0, eps_factor = 0.01;
  int max_iter = 5000;
  std::string method = "auto";
  wass->add_option("files", files, "One or two files of points, one point per line")->required()->expected(1, 2);
  wass->add_option("--p", p, "Order p >= 1");
  wass->add_option("--method", method, "auto, assignment or sinkhorn")->check(CLI::IsMember({"auto", "assignment", "sinkhorn"}));
  wass->add_option("--epsilon-factor", eps_factor, "Sinkhorn epsilon as a fraction of the mean cost");
  wass->add_option("--max-iter", max_iter, "Sinkhorn sweep limit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  if (app.count("--seed")) overrides.seed = seed;
  if (app.count("--reps")) overrides.reps = reps;
  if (app.count("--out")) overrides.out_dir = out_dir;
  if (app.count("--threads")) {
    overrides.threads = threads;
    set_threads(threads);
  }

  try {
    if (*run) return run_config_file(config_path, overrides, std::cout, std::cerr);

    if (*verify) {
      ExperimentConfig cfg;
      cfg.kind = Kind::verify_suite;
      cfg.seed = overrides.seed.value_or(1);
      cfg.filter = filter;
      cfg.inject_fault = fault;
      if (overrides.out_dir || std::getenv("PWMD_OUT_DIR")) {
        apply_overrides(cfg, overrides);
        return run_experiment(cfg, std::cout).exit_code;
      }
      const auto results = run_verify({filter, fault, cfg.seed});
      print_verify_table(results, std::cout);
      for (const CheckResult& r : results)
        if (!r.pass) return kExitChecksFailed;
      return kExitOk;
    }

    if (*bound) {
      ExperimentConfig cfg;
      cfg.kind = Kind::bound_eval;
      cfg.seed = overrides.seed.value_or(0);
      cfg.application = application_from_string(application);
      for (const std::string& t : bound_params) {
        const auto [key, value] = split_assignment(t);
        const json v = scalar_from_text(value);
        require(v.is_number(), "bound parameter '" + key + "' must be numeric");
        cfg.bound_params[key] = v.get<double>();
      }
      std::sort(xs.begin(), xs.end());
      cfg.x_grid = xs;
      cfg = parse_config(cfg.to_json());
      if (overrides.out_dir || std::getenv("PWMD_OUT_DIR")) {
        apply_overrides(cfg, overrides);
        return run_experiment(cfg, std::cout).exit_code;
      }
      const AppDelta d = app_delta(*cfg.application, cfg.bound_params);
      std::cout << "x,delta,alpha,p0,range_max_x,shape,feasible\n";
      for (double x : cfg.x_grid) {
        const BoundReport r = app_bound(d, x);
        std::cout << format_g17(x) << ',' << format_g17(d.delta) << ',' << format_g17(d.alpha) << ','
                  << format_g17(d.p0) << ',' << format_g17(d.range_max_x) << ',' << format_g17(r.shape) << ','
                  << (r.feasible ? "true" : "false") << '\n';
        for (const std::string& c : r.violated_conditions) std::cerr << "  x = " << x << ": " << c << '\n';
      }
      return kExitOk;
    }

    if (*oracle) {
      json block{{"type", model_tokens.front()}};
      for (std::size_t k = 1; k < model_tokens.size(); ++k) {
        const auto [key, value] = split_assignment(model_tokens[k]);
        block[key] = scalar_from_text(value);
      }
      ExperimentConfig cfg;
      cfg.kind = Kind::oracle_check;
      cfg.model = block;
      cfg.seed = overrides.seed.value_or(0);
      cfg.reps = overrides.reps.value_or(0);
      std::sort(oracle_xs.begin(), oracle_xs.end());
      cfg.x_grid = oracle_xs;
      cfg = parse_config(cfg.to_json());
      if (overrides.out_dir || std::getenv("PWMD_OUT_DIR")) {
        apply_overrides(cfg, overrides);
        return run_experiment(cfg, std::cout).exit_code;
      }
      const Model model = build_model(cfg.model);
      ExactPmf pmf;
      if (const IidSum* m = std::get_if<IidSum>(&model)) pmf = convolve_iid_pmf(m->dist, m->n);
      else if (const CombClt* m = std::get_if<CombClt>(&model)) pmf = enumerate_comb(m->c);
      else if (const HomSum* m = std::get_if<HomSum>(&model)) pmf = enumerate_homsum(*m);
      else fail(ErrorKind::capability, "oracle: no exact oracle for " + model_tag(model));
      std::cout << "x,p_w,p_ref,ratio\n";
      for (double x : cfg.x_grid) {
        const TailRatio t = exact_tail_ratio(pmf, x);
        std::cout << format_g17(x) << ',' << format_g17(t.p_w) << ',' << format_g17(t.p_ref) << ','
                  << format_g17(t.ratio) << '\n';
      }
      return kExitOk;
    }

    if (*wass) {
      const PointCloud x = read_cloud(files[0]);
      if (files.size() == 1) {
        require(x.cols() == 1, "a single file is compared with N(0,1) and must be one-dimensional");
        std::vector<double> v(x.data(), x.data() + x.rows());
        print_transport(wp_sample_vs_normal(v, p));
        return kExitOk;
      }
      const PointCloud y = read_cloud(files[1]);
      require(x.cols() == y.cols(), "point files differ in dimension");
      if (method == "sinkhorn") {
        print_transport(wp_sinkhorn(x, y, p, eps_factor * mean_pairwise_cost(x, y, p), max_iter));
      } else if (method == "auto" && x.cols() == 1 && x.rows() == y.rows()) {
        std::vector<double> a(x.data(), x.data() + x.rows()), b(y.data(), y.data() + y.rows());
        print_transport(wp_empirical_1d(a, b, p));
      } else {
        print_transport(wp_assignment(x, y, p));
      }
      return kExitOk;
    }
  } catch (...) {
    return report_error(std::cerr);
  }
  return kExitOk;
}
