#include "pwmd/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "pwmd/error.hpp"
#include "pwmd/special.hpp"

namespace pwmd {

namespace {

constexpr double kE = 2.718281828459045235360287;

double range_cap(double alpha, double delta) { return std::pow(delta, -1.0 / (2.0 * alpha + 1.0)); }

class Inputs {
 public:
  Inputs(Application app, const AppParams& params, std::set<std::string> allowed)
      : app_(app), params_(params) {
    allowed.insert("smallness_cap");
    for (const auto& [key, value] : params) {
      if (!allowed.count(key))
        fail(ErrorKind::validation, std::string("app_delta(") + to_string(app) + "): unknown parameter '" + key + "'");
      require(std::isfinite(value), std::string("app_delta: parameter '") + key + "' is not finite");
    }
  }

  // Basic sizes the caller must state.
  double size(const std::string& key, double minimum) const {
    const auto it = params_.find(key);
    if (it == params_.end())
      fail(ErrorKind::validation, std::string("app_delta(") + to_string(app_) + "): missing parameter '" + key + "'");
    require(it->second >= minimum,
            std::string("app_delta: '") + key + "' must be at least " + std::to_string(minimum));
    return it->second;
  }

  // Derived quantities produced by another operation.
  double derived(const std::string& key, const std::string& producer, bool allow_zero = false) const {
    const auto it = params_.find(key);
    if (it == params_.end())
      fail(ErrorKind::dependency, std::string("app_delta(") + to_string(app_) + "): '" + key +
                                      "' is required; compute it with " + producer);
    require(allow_zero ? it->second >= 0.0 : it->second > 0.0,
            std::string("app_delta: '") + key + (allow_zero ? "' must be nonnegative" : "' must be positive"));
    return it->second;
  }

  double optional(const std::string& key, double fallback) const {
    const auto it = params_.find(key);
    return it == params_.end() ? fallback : it->second;
  }

 private:
  Application app_;
  const AppParams& params_;
};

}  // namespace

double BoundProfile::dbar() const {
  double m = 0.0;
  for (const BoundTerm& t : terms) m = std::max(m, t.delta);
  return m;
}

void BoundProfile::validate() const {
  require(!terms.empty(), "BoundProfile: terms must be nonempty");
  require(A > 0.0, "BoundProfile: A must be positive");
  require(p0 >= 1.0, "BoundProfile: p0 must be at least 1");
  for (const BoundTerm& t : terms) {
    require(t.alpha >= 0.0, "BoundProfile: alpha must be nonnegative");
    require(t.delta > 0.0 && std::isfinite(t.delta), "BoundProfile: delta must be positive");
  }
}

void BoundReport::violate(std::string condition) {
  feasible = false;
  violated_conditions.push_back(std::move(condition));
}

BoundReport t4_translate(const BoundProfile& profile, double x) {
  profile.validate();
  require(x >= 0.0, "t4_translate: x must be nonnegative");
  const double dbar = profile.dbar();
  const double abs_log = std::abs(std::log(dbar));
  const double p = std::log(1.0 / dbar) + 0.5 * x * x;

  double bracket = 0.0, eps_core = 0.0, cap = std::numeric_limits<double>::infinity();
  for (const BoundTerm& t : profile.terms) {
    bracket = std::max(bracket, std::pow(abs_log + x * x, t.alpha) * t.delta);
    eps_core = std::max(eps_core, std::pow(p, t.alpha) * t.delta);
    cap = std::min(cap, range_cap(t.alpha, t.delta));
  }

  BoundReport r;
  r.shape = (1.0 + x) * (bracket + dbar);
  const double sqrt_p0 = std::sqrt(profile.p0);
  r.range_max_x = std::min(sqrt_p0, cap);
  if (abs_log > profile.p0 / 2.0) r.violate("|log Δ̄| exceeds p0/2");
  if (x > sqrt_p0) r.violate("x exceeds sqrt(p0)");
  if (x > cap) r.violate("x exceeds Δ^{−1/(2α+1)}");
  if (dbar >= 1.0 / kE) r.flags.push_back("x ≤ e regime");
  r.intermediates = {{"p", p},
                     {"epsilon", profile.A * eps_core * kE},
                     {"dbar", dbar},
                     {"p0", profile.p0},
                     {"A", profile.A}};
  if (profile.terms.size() == 1) {
    r.intermediates["alpha"] = profile.terms[0].alpha;
    r.intermediates["delta"] = profile.terms[0].delta;
  }
  return r;
}

BoundReport multiMD_translate(double A, double alpha, double delta, double p0, int d, double x) {
  require(A > 0.0, "multiMD_translate: A must be positive");
  require(alpha >= 0.0, "multiMD_translate: alpha must be nonnegative");
  require(delta > 0.0 && std::isfinite(delta), "multiMD_translate: delta must be positive");
  require(p0 >= 1.0, "multiMD_translate: p0 must be at least 1");
  require(d >= 2, "multiMD_translate: d must be at least 2");
  require(x >= 0.0, "multiMD_translate: x must be nonnegative");

  const double abs_log = std::abs(std::log(delta));
  const double dlogd = d * std::log(static_cast<double>(d));
  const double log_kappa = log_chi_kappa(d);
  const double cap = range_cap(alpha, delta);
  const double sqrt_p0 = std::sqrt(p0);

  BoundReport r;
  r.shape = (1.0 + x) * std::pow(abs_log + dlogd + x * x, alpha) * delta;
  r.range_max_x = std::min(cap, sqrt_p0);
  if (abs_log > p0 / 4.0) r.violate("|log Δ| exceeds p0/4");
  if (log_kappa > p0 / 4.0) r.violate("log κ(d) exceeds p0/4");
  if (x > sqrt_p0) r.violate("x exceeds sqrt(p0)");
  if (x > cap) r.violate("x exceeds Δ^{−1/(2α+1)}");
  r.intermediates = {{"A", A},
                     {"alpha", alpha},
                     {"delta", delta},
                     {"p0", p0},
                     {"d", static_cast<double>(d)},
                     {"log_kappa", log_kappa},
                     {"B1_product", d * std::pow(dlogd, alpha) * delta},
                     {"B2_product", d * delta * std::pow(abs_log, alpha)}};
  return r;
}

BoundReport certificate_bound(const Certificate& cert, double p) {
  require(p >= 1.0, "certificate_bound: p must be at least 1");
  require(cert.lambda > 0.0, "certificate_bound: lambda must be positive");
  const Certificate at = (cert.p != p && !cert.states.empty()) ? certificate_at(cert, p) : cert;
  const double d4 = std::pow(static_cast<double>(at.d), 0.25);
  const double r_term = at.norm_R_p;
  const double e_term = std::sqrt(p) * at.norm_E_p;
  const double d_term = p * d4 * std::sqrt(at.norm_D4_p / at.lambda);

  BoundReport r;
  r.shape = r_term + e_term + d_term;
  r.range_max_x = std::numeric_limits<double>::infinity();
  r.intermediates = {{"p", p},
                     {"lambda", at.lambda},
                     {"norm_R_p", at.norm_R_p},
                     {"norm_E_p", at.norm_E_p},
                     {"norm_D4_p", at.norm_D4_p},
                     {"R_term", r_term},
                     {"E_term", e_term},
                     {"D4_term", d_term}};
  return r;
}

const char* to_string(Application app) noexcept {
  switch (app) {
    case Application::iid: return "iid";
    case Application::comb: return "comb";
    case Application::dejong: return "dejong";
    case Application::qf: return "qf";
    case Application::wiener_simple: return "wiener_simple";
    case Application::chi: return "chi";
    case Application::mdep: return "mdep";
    case Application::local_bounded: return "local_bounded";
    case Application::local_unbounded: return "local_unbounded";
  }
  return "?";
}

Application application_from_string(const std::string& name) {
  for (Application a : {Application::iid, Application::comb, Application::dejong, Application::qf,
                        Application::wiener_simple, Application::chi, Application::mdep,
                        Application::local_bounded, Application::local_unbounded})
    if (name == to_string(a)) return a;
  fail(ErrorKind::validation, "unknown application '" + name + "'");
}

AppDelta app_delta(Application app, const AppParams& params) {
  AppDelta out;
  out.application = app;
  const auto cube_root_range = [&] {
    out.alpha = 1.0;
    out.p0 = std::pow(out.delta, -2.0 / 3.0);
    out.range_max_x = std::pow(out.delta, -1.0 / 3.0);
  };
  const auto multi_offset = [&](int d) {
    out.d = d;
    out.log_offset = d >= 2 ? d * std::log(static_cast<double>(d)) : 1.0;
    out.smallness_lhs = d >= 2 ? d * d * std::log(static_cast<double>(d)) * out.delta : out.delta;
  };

  switch (app) {
    case Application::iid: {
      Inputs in(app, params, {"n", "b"});
      const double n = in.size("n", 1), b = in.derived("b", "orlicz_norm");
      out.delta = b * b / std::sqrt(n);
      cube_root_range();
      out.log_offset = 1.0;
      out.smallness_lhs = out.delta;
      out.aux = {{"n", n}, {"b", b}};
      out.smallness_cap = in.optional("smallness_cap", 1.0 / kE);
      break;
    }
    case Application::comb: {
      Inputs in(app, params, {"n", "b", "B_n2"});
      const double n = in.size("n", 2), b = in.derived("b", "orlicz_norm");
      const double bn2 = in.derived("B_n2", "comb_variance");
      out.delta = std::sqrt(n) * b * b / bn2;
      cube_root_range();
      out.log_offset = 1.0;
      out.smallness_lhs = out.delta;
      out.aux = {{"n", n}, {"b", b}, {"B_n2", bn2}};
      out.smallness_cap = in.optional("smallness_cap", 1.0 / kE);
      break;
    }
    case Application::dejong: {
      Inputs in(app, params, {"q", "K", "M", "influence", "kappa4"});
      const double q = in.size("q", 2);
      const double K = in.derived("K", "orlicz_norm");
      const double M = in.derived("M", "DistSpec::standardized_fourth_moment");
      const double infl = in.derived("influence", "maximal_influence");
      const auto it = params.find("kappa4");
      if (it == params.end())
        fail(ErrorKind::dependency, "app_delta(dejong): 'kappa4' is required; compute it with fourth_cumulant");
      const double kappa4 = it->second;
      const double log_term = std::max(1.0, std::pow(std::abs(std::log(infl)), 2.0 * q - 2.0));
      out.delta = std::pow(K, 2.0 * q) * std::sqrt(std::abs(kappa4) + std::pow(M, q) * infl * log_term);
      out.alpha = q;
      out.p0 = std::pow(infl, -0.5);
      out.range_max_x = std::pow(out.delta, -1.0 / (2.0 * q + 1.0));
      out.log_offset = 0.0;
      out.smallness_lhs = out.delta;
      out.smallness_cap = in.optional("smallness_cap", 1.0 / kE);
      if (!(out.delta < 1.0)) out.violated_conditions.push_back("Δ must be below 1");
      out.aux = {{"q", q}, {"K", K}, {"M", M}, {"influence", infl}, {"kappa4", kappa4}};
      break;
    }
    case Application::qf: {
      Inputs in(app, params, {"K", "op_norm_F"});
      const double K = in.derived("K", "orlicz_norm");
      const double op = in.derived("op_norm_F", "contraction_q2");
      out.delta = op;
      out.alpha = 1.0;
      out.p0 = 2.0 * std::pow(op, -2.0 / 3.0);
      out.range_max_x = std::pow(op, -1.0 / 3.0);
      out.prefactor = std::pow(K, 4.0);
      out.log_offset = 0.0;
      out.smallness_lhs = out.delta;
      out.smallness_cap = in.optional("smallness_cap", 1.0 / kE);
      out.aux = {{"K", K}, {"op_norm_F", op}};
      break;
    }
    case Application::wiener_simple: {
      Inputs in(app, params, {"hs_norm_F2"});
      const double q = 2.0;
      out.delta = in.derived("hs_norm_F2", "contraction_q2");
      out.alpha = (2.0 * q - 1.0) / 2.0;
      out.p0 = std::pow(out.delta, -1.0 / q);
      out.range_max_x = std::pow(out.delta, -1.0 / (2.0 * q));
      out.log_offset = 1.0;
      out.smallness_lhs = out.delta;
      out.smallness_cap = in.optional("smallness_cap", 1.0 / kE);
      out.aux = {{"q", q}, {"hs_norm_F2", out.delta}};
      break;
    }
    case Application::chi: {
      Inputs in(app, params, {"n", "d", "b"});
      const double n = in.size("n", 1), b = in.derived("b", "orlicz_norm");
      const int d = static_cast<int>(in.size("d", 2));
      out.delta = std::pow(static_cast<double>(d), 0.25) * b * b / std::sqrt(n);
      cube_root_range();
      multi_offset(d);
      out.smallness_cap = in.optional("smallness_cap", 1.0 / kE);
      out.aux = {{"n", n}, {"d", static_cast<double>(d)}, {"b", b}};
      break;
    }
    case Application::mdep: {
      Inputs in(app, params, {"n", "m", "b"});
      const double n = in.size("n", 2), m = in.size("m", 1), b = in.derived("b", "orlicz_norm");
      out.delta = m * m * std::pow(b, 3.0) * std::pow(std::log(n), 4.0) / std::sqrt(n);
      cube_root_range();
      out.log_offset = 1.0;
      out.smallness_lhs = out.delta;
      out.smallness_cap = in.optional("smallness_cap", 1.0 / kE);
      out.aux = {{"n", n}, {"m", m}, {"b", b}};
      break;
    }
    case Application::local_bounded: {
      Inputs in(app, params, {"n", "theta1", "theta2", "b", "b_prime", "d"});
      const double n = in.size("n", 2);
      const int d = static_cast<int>(in.optional("d", 1));
      require(d >= 1, "app_delta: d must be at least 1");
      const double t1 = in.derived("theta1", "dependency_stats");
      const double t2 = in.derived("theta2", "dependency_stats");
      const double b = in.derived("b", "a bound on |X_i|");
      const double bp = in.derived("b_prime", "a bound on |X_ij|");
      const double first = std::sqrt(t1 * t2) * bp * bp, second = t1 * t1 * std::pow(b, 3.0) * std::log(n);
      out.deltas = {{"delta_1", (first + second) / std::sqrt(n)},
                    {"delta_d", (d * first + second) / std::sqrt(n)}};
      out.delta = d >= 2 ? out.deltas["delta_d"] : out.deltas["delta_1"];
      cube_root_range();
      multi_offset(d);
      out.smallness_cap = in.optional("smallness_cap", 1.0 / kE);
      out.aux = {{"n", n}, {"d", static_cast<double>(d)}, {"theta1", t1}, {"theta2", t2}, {"b", b}, {"b_prime", bp}};
      break;
    }
    case Application::local_unbounded: {
      Inputs in(app, params, {"n", "theta1", "theta2", "b", "L", "d"});
      const double n = in.size("n", 2);
      const int d = static_cast<int>(in.optional("d", 1));
      require(d >= 1, "app_delta: d must be at least 1");
      const double t1 = in.derived("theta1", "dependency_stats");
      const double t2 = in.derived("theta2", "dependency_stats");
      const double L = in.derived("L", "dependency_stats (group_count)");
      const double b = in.derived("b", "orlicz_norm");
      const double ln = std::log(n), dd = static_cast<double>(d);
      const auto delta_at = [&](double k) {
        return (k * L * b * ln + k * std::sqrt(t1 * t2) * b * b * ln * ln +
                std::pow(k, 1.5) * t1 * t1 * std::pow(b, 3.0) * std::pow(ln, 4.0)) /
               std::sqrt(n);
      };
      out.deltas = {{"delta_1", delta_at(1.0)}, {"delta_d", delta_at(dd)}};
      out.delta = d >= 2 ? out.deltas["delta_d"] : out.deltas["delta_1"];
      cube_root_range();
      multi_offset(d);
      out.smallness_cap = in.optional("smallness_cap", 1.0 / kE);
      out.aux = {{"n", n}, {"d", dd}, {"theta1", t1}, {"theta2", t2}, {"L", L}, {"b", b}};
      break;
    }
  }
  if (out.deltas.empty()) out.deltas = {{"delta", out.delta}};
  if (!(out.smallness_lhs < out.smallness_cap))
    out.violated_conditions.push_back("smallness: " + std::to_string(out.smallness_lhs) +
                                      " is not below the cap " + std::to_string(out.smallness_cap));
  out.feasible = out.violated_conditions.empty();
  return out;
}

BoundReport app_bound(const AppDelta& app, double x) {
  require(x >= 0.0, "app_bound: x must be nonnegative");
  BoundReport r;
  const double abs_log = std::abs(std::log(app.delta));
  r.shape = app.prefactor * (1.0 + x) * std::pow(app.log_offset + abs_log + x * x, app.alpha) * app.delta;
  r.range_max_x = app.range_max_x;
  for (const std::string& c : app.violated_conditions) r.violate(c);
  if (x > app.range_max_x) r.violate("x exceeds the application range");
  r.intermediates = {{"delta", app.delta},        {"alpha", app.alpha},
                     {"p0", app.p0},              {"prefactor", app.prefactor},
                     {"smallness_lhs", app.smallness_lhs}, {"x", x}};
  return r;
}

BoundReport local_wp_bound(double n, int d, double theta1, double theta2, double b,
                           double b_prime, double p) {
  require(n > 1.0 && d >= 1 && theta1 > 0.0 && theta2 > 0.0 && b > 0.0 && b_prime > 0.0 && p > 0.0,
          "local_wp_bound: inputs must be positive (n > 1)");
  const double first = d * std::sqrt(theta1 * theta2) * b_prime * b_prime;
  const double second = theta1 * theta1 * b * b * b * std::log(n);
  const double p_max = std::min(theta1 / theta2, 1.0 / (theta1 * theta1 * b * b)) * n;

  BoundReport r;
  r.shape = p * (first + second) / std::sqrt(n);
  r.range_max_x = p_max;
  if (p < 2.0) r.violate("p below 2");
  if (p > p_max) r.violate("p exceeds min(θ₁/θ₂, c/(θ₁²b²))·n with c = 1");
  r.flags.push_back("p range depends on an unspecified constant c (set to 1)");
  r.intermediates = {{"p", p}, {"p_max", p_max}, {"first_term", first / std::sqrt(n)},
                     {"second_term", second / std::sqrt(n)}};
  return r;
}

}  // namespace pwmd
