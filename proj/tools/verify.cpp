#include "verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include "config.hpp"
#include "pwmd/bounds.hpp"
#include "pwmd/error.hpp"
#include "pwmd/montecarlo.hpp"
#include "pwmd/oracles.hpp"
#include "pwmd/special.hpp"
#include "pwmd/wasserstein.hpp"

namespace pwmd::cli {

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

using CheckFn = std::function<Outcome(const VerifyOptions&)>;

struct Check {
  const char* module;
  const char* name;
  CheckFn fn;
};

std::string sci(double v) {
  std::ostringstream os;
  os << std::setprecision(3) << v;
  return os.str();
}

Outcome max_error(double err, double tol) { return {err <= tol, "max error " + sci(err) + " (tol " + sci(tol) + ")"}; }

double enumerated_variance(const Eigen::MatrixXd& c) {
  const int n = static_cast<int>(c.rows());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double s1 = 0.0, s2 = 0.0, count = 0.0;
  do {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += c(i, perm[i]);
    s1 += s;
    s2 += s * s;
    count += 1.0;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return s2 / count - (s1 / count) * (s1 / count);
}

PointCloud random_cloud(int n, int d, std::uint64_t seed) {
  CounterRng rng(seed, 0);
  PointCloud x(n, d);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k) x(i, k) = rng.uniform_open() * 4.0 - 2.0;
  return x;
}

std::vector<Check> registry() {
  return {
      {"core", "chi_upper_tail(x, 2) = exp(-x^2/2)",
       [](const VerifyOptions&) {
         double err = 0.0;
         for (int k = 0; k < 100; ++k) {
           const double x = 0.1 * k;
           err = std::max(err, std::abs(chi_upper_tail(x, 2).value - std::exp(-x * x / 2)));
         }
         return max_error(err, 1e-12);
       }},
      {"core", "mills ratio phi/Q <= 1 + x",
       [](const VerifyOptions&) {
         double worst = -1.0;
         for (int k = 1; k <= 1000; ++k) {
           const double x = 0.01 * k;
           worst = std::max(worst, normal_pdf(x) / normal_upper_tail(x).value - (1.0 + x));
         }
         return Outcome{worst <= 0.0, "max excess " + sci(worst)};
       }},
      {"core", "orlicz norm is homogeneous",
       [](const VerifyOptions&) {
         const DistSpec base = DistSpec::uniform_centered(1.0);
         const double a = orlicz_norm(base, 1.0), b = orlicz_norm(DistSpec::uniform_centered(3.0), 1.0);
         return max_error(std::abs(b - 3.0 * a), 1e-8);
       }},
      {"wasserstein", "assignment recovers translations",
       [](const VerifyOptions& o) {
         double err = 0.0;
         for (int t = 0; t < 10; ++t) {
           const PointCloud x = random_cloud(32 + 8 * t, 1 + t % 4, stream_key(o.seed, t));
           Eigen::RowVectorXd v = Eigen::RowVectorXd::Constant(x.cols(), 0.3 + 0.1 * t);
           const PointCloud y = x.rowwise() + v;
           err = std::max(err, std::abs(wp_assignment(x, y, 2.0).distance - v.norm()));
         }
         return max_error(err, 1e-10);
       }},
      {"wasserstein", "rademacher W2 closed form",
       [](const VerifyOptions&) {
         const std::vector<Atom> pmf{{-1.0, 0.5}, {1.0, 0.5}};
         return max_error(std::abs(wp_discrete_vs_normal(pmf, 2.0).distance - std::sqrt(2.0 - 2.0 * std::sqrt(2.0 / M_PI))),
                          1e-6);
       }},
      {"wasserstein", "sinkhorn is an upper bound",
       [](const VerifyOptions& o) {
         const PointCloud x = random_cloud(48, 2, stream_key(o.seed, 100)), y = random_cloud(48, 2, stream_key(o.seed, 101));
         const double exact = wp_assignment(x, y, 2.0).plan_cost;
         const double eps = 0.01 * mean_pairwise_cost(x, y, 2.0);
         const double sk = wp_sinkhorn(x, y, 2.0, eps, 3000).plan_cost;
         return Outcome{sk >= exact - 1e-9 && sk <= 1.05 * exact, "sinkhorn/exact = " + sci(sk / exact)};
       }},
      {"models", "comb_variance matches enumeration",
       [](const VerifyOptions& o) {
         const double fault = o.inject_fault == "comb_variance" ? 1.01 : 1.0;
         double err = 0.0;
         for (int t = 0; t < 10; ++t) {
           const int n = 3 + t % 5;
           const Eigen::MatrixXd c = random_centered_matrix(n, stream_key(o.seed, 200 + t));
           const double formula = fault * comb_variance(c, Eigen::MatrixXd::Zero(n, n));
           err = std::max(err, std::abs(formula - enumerated_variance(c)) / enumerated_variance(c));
         }
         return max_error(err, 1e-12);
       }},
      {"models", "exchangeable pair linearity residual",
       [](const VerifyOptions&) {
         double worst = 0.0;
         for (const Model& m : {Model{IidSum{8, DistSpec::rademacher()}},
                                Model{HomSum::perfect_matching(6, DistSpec::rademacher())}}) {
           const Certificate cert = exact_pair_conditionals(m, 2.0);
           for (const StateConditional& s : cert.states) worst = std::max(worst, std::abs(s.r));
         }
         return max_error(worst, 1e-12);
       }},
      {"models", "contraction norms of the scaled identity",
       [](const VerifyOptions&) {
         double err = 0.0;
         for (int n : {4, 16, 64}) {
           const ContractionQ2 c = contraction_q2(Eigen::MatrixXd::Identity(n, n) / std::sqrt(2.0 * n));
           err = std::max({err, std::abs(c.op_norm_f2 - 1.0 / (2.0 * n)), std::abs(c.hs_norm_f2 - 0.5 / std::sqrt(double(n)))});
         }
         return max_error(err, 1e-12);
       }},
      {"models", "unit variance by simulation",
       [](const VerifyOptions& o) {
         double worst = 0.0;
         for (const Model& m : {Model{IidSum{7, DistSpec::laplace_unit_var()}}, Model{MDep{50, 2, {1.0, 0.5, -0.3}, DistSpec::rademacher()}},
                                Model{GaussChaos2::random(12, 3)}}) {
           const std::vector<double> w = sample_w(m, 100000, stream_key(o.seed, 300)).column(0);
           double s2 = 0.0;
           for (double v : w) s2 += v * v;
           worst = std::max(worst, std::abs(s2 / w.size() - 1.0));
         }
         return Outcome{worst <= 0.05, "max |var - 1| " + sci(worst)};
       }},
      {"bounds", "t4 and multivariate examples",
       [](const VerifyOptions&) {
         const double e1 = std::abs(t4_translate({1.0, {{1.0, 0.01}}, 1e6}, 0.0).shape - 0.0560517);
         const double e2 = std::abs(t4_translate({1.0, {{1.0, 0.01}}, 1e6}, 2.0).shape - 0.288155);
         const double e3 = std::abs(multiMD_translate(1.0, 1.0, 0.02, 1e6, 4, 0.0).shape - 0.189144);
         return max_error(std::max({e1, e2, e3}), 1e-6);
       }},
      {"bounds", "range flag fires at the threshold",
       [](const VerifyOptions&) {
         const BoundProfile prof{1.0, {{1.0, 0.01}}, 1e6};
         const double cap = std::pow(0.01, -1.0 / 3.0);
         const bool ok = t4_translate(prof, cap).feasible && !t4_translate(prof, std::nextafter(cap, 10.0)).feasible;
         return Outcome{ok, "cap " + sci(cap)};
       }},
      {"bounds", "chi application delta",
       [](const VerifyOptions&) {
         return max_error(std::abs(app_delta(Application::chi, {{"d", 16}, {"b", 1}, {"n", 1e4}}).delta - 0.02), 1e-15);
       }},
      {"oracles", "convolution associativity",
       [](const VerifyOptions&) {
         const DistSpec dist = DistSpec::lattice({{-1.0, 2.0 / 3.0}, {2.0, 1.0 / 3.0}});
         const ExactPmf direct = convolve_iid_pmf(dist, 4);
         const ExactPmf half = scale(convolve_iid_pmf(dist, 2), std::sqrt(2.0));
         const ExactPmf composed = scale(convolve(half, half), 0.5);
         double err = direct.atoms.size() == composed.atoms.size() ? 0.0 : 1.0;
         for (std::size_t k = 0; err < 1.0 && k < direct.atoms.size(); ++k)
           err = std::max({err, std::abs(direct.atoms[k].value - composed.atoms[k].value),
                           std::abs(direct.atoms[k].prob - composed.atoms[k].prob)});
         return max_error(err, 1e-12);
       }},
      {"oracles", "rademacher n=4 tail ratio",
       [](const VerifyOptions&) {
         return max_error(std::abs(exact_tail_ratio(convolve_iid_pmf(DistSpec::rademacher(), 4), 0.0).ratio - 0.625), 0.0);
       }},
      {"oracles", "homogeneous sum fourth moment",
       [](const VerifyOptions&) {
         const HomSum f = HomSum::from_matrix(GaussChaos2::random(12, 5).f, DistSpec::rademacher());
         const double m4 = enumerate_homsum(f).moment(4);
         return max_error(std::abs(m4 - fourth_cumulant(f, 0, 0).kappa4 - 3.0), 1e-12);
       }},
      {"montecarlo", "plain estimate covers the exact tail",
       [](const VerifyOptions& o) {
         const TailRow row = estimate_tail(IidSum{4, DistSpec::rademacher()}, 0.0, 100000, o.seed, TailMethod::plain);
         return Outcome{std::abs(row.p_hat - 0.3125) <= 4.0 * row.se, "p_hat " + sci(row.p_hat) + " se " + sci(row.se)};
       }},
      {"montecarlo", "tilted estimate matches the exact lattice tail",
       [](const VerifyOptions& o) {
         const int n = 100;
         const double x = std::pow(double(n), 1.0 / 6.0);
         const double exact = exact_tail_ratio(convolve_iid_pmf(DistSpec::rademacher(), n), x).p_w;
         const TailRow row = estimate_tail(IidSum{n, DistSpec::rademacher()}, x, 100000, o.seed, TailMethod::tilted);
         return Outcome{std::abs(row.p_hat - exact) <= 4.0 * row.se, "z = " + sci((row.p_hat - exact) / row.se)};
       }},
      {"montecarlo", "serial and parallel reports are identical",
       [](const VerifyOptions& o) {
         const IidSum m{30, DistSpec::laplace_unit_var()};
         const TailReport a = ratio_curve(m, {0.0, 1.0, 2.0}, 20000, o.seed, TailMethod::tilted, std::nullopt, Exec::serial);
         const TailReport b = ratio_curve(m, {0.0, 1.0, 2.0}, 20000, o.seed, TailMethod::tilted, std::nullopt, Exec::parallel);
         bool same = true;
         for (std::size_t k = 0; k < a.rows.size(); ++k) same &= a.rows[k].p_hat == b.rows[k].p_hat && a.rows[k].se == b.rows[k].se;
         return Outcome{same, same ? "bit-identical" : "reports differ"};
       }},
      {"cli", "config round-trips through its canonical form",
       [](const VerifyOptions&) {
         const json doc = parse_document(
             "kind = \"tail_ratio\"\n[model]\ntype = \"iid_sum\"\nn = 4\ndist = \"rademacher\"\n"
             "[grid]\nx = [0.0, 1.0]\n[estimation]\nreps = 1000\nseed = 3\n",
             true);
         const ExperimentConfig cfg = parse_config(doc);
         const bool same = parse_config(cfg.to_json()).to_json() == cfg.to_json();
         return Outcome{same, same ? "stable" : "canonical form changed"};
       }},
      {"cli", "unknown keys are rejected",
       [](const VerifyOptions&) {
         try {
           parse_config(json{{"kind", "bound_eval"}, {"estimation", {{"seed", 1}}}, {"bond", 1}});
         } catch (const Error& e) {
           return Outcome{e.kind() == ErrorKind::validation, e.what()};
         }
         return Outcome{false, "accepted an unknown key"};
       }},
  };
}

}  // namespace

std::vector<std::string> verify_modules() {
  return {"core", "wasserstein", "models", "bounds", "oracles", "montecarlo", "cli"};
}

std::vector<CheckResult> run_verify(const VerifyOptions& options) {
  if (!options.filter.empty()) {
    const auto mods = verify_modules();
    require(std::find(mods.begin(), mods.end(), options.filter) != mods.end(),
            "verify: unknown filter '" + options.filter + "'");
  }
  if (!options.inject_fault.empty())
    require(options.inject_fault == "comb_variance", "verify: unknown fault '" + options.inject_fault + "'");
  std::vector<CheckResult> results;
  for (const Check& c : registry()) {
    if (!options.filter.empty() && options.filter != c.module) continue;
    CheckResult r{c.module, c.name, false, "", 0.0};
    const auto start = std::chrono::steady_clock::now();
    try {
      const Outcome o = c.fn(options);
      r.pass = o.pass;
      r.detail = o.detail;
    } catch (const std::exception& e) {
      r.detail = std::string("threw: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    results.push_back(std::move(r));
  }
  return results;
}

void print_verify_table(const std::vector<CheckResult>& results, std::ostream& out) {
  int failed = 0;
  for (const CheckResult& r : results) {
    out << (r.pass ? "PASS  " : "FAIL  ") << std::left << std::setw(12) << r.module << std::setw(52) << r.name
        << r.detail << "\n";
    failed += r.pass ? 0 : 1;
  }
  out << results.size() - failed << "/" << results.size() << " checks passed\n";
}

}  // namespace pwmd::cli
