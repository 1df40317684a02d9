#pragma once

#include <map>
#include <string>
#include <vector>

#include "pwmd/models.hpp"

namespace pwmd {

// Bound shapes: theorem right-hand sides with every unspecified absolute
// constant set to 1. Logs are natural. Infeasibility is reported, never thrown.

struct BoundTerm {
  double alpha = 1.0;
  double delta = 0.0;
};

struct BoundProfile {
  double A = 1.0;
  std::vector<BoundTerm> terms;
  double p0 = 1.0;

  /// max_r Δ_r.
  double dbar() const;
  /// Throws unless terms is nonempty, A > 0, p0 ≥ 1, α_r ≥ 0 and Δ_r > 0.
  void validate() const;
};

struct BoundReport {
  double shape = 0.0;
  bool feasible = true;
  std::vector<std::string> violated_conditions;
  /// Regime notes that do not make the report infeasible.
  std::vector<std::string> flags;
  double range_max_x = 0.0;
  std::map<std::string, double> intermediates;
  bool constants_normalized = true;

  void violate(std::string condition);
};

/// (1+x)·{max_r (|log Δ̄| + x²)^{α_r} Δ_r + Δ̄} with range checks
/// |log Δ̄| ≤ p0/2, x ≤ √p0 and x ≤ Δ_r^{-1/(2α_r+1)} for every r.
BoundReport t4_translate(const BoundProfile& profile, double x);

/// (1+x)(|log Δ| + d log d + x²)^α Δ for the |W| tail in dimension d ≥ 2.
BoundReport multiMD_translate(double A, double alpha, double delta, double p0, int d, double x);

/// ‖R‖_p + √p ‖E‖_p + p d^{1/4} √(‖E[D⁴|G]‖_p / λ). Norms are recomputed from
/// the certificate states when cert.p differs from p.
BoundReport certificate_bound(const Certificate& cert, double p);

enum class Application { iid, comb, dejong, qf, wiener_simple, chi, mdep, local_bounded, local_unbounded };

const char* to_string(Application app) noexcept;
Application application_from_string(const std::string& name);

/// Named numeric inputs, e.g. {"n", 1e4}, {"b", 1}, {"d", 16}. Keys per
/// application:
///   iid             n, b
///   comb            n, b, B_n2
///   dejong          q, K, M, influence, kappa4
///   qf              K, op_norm_F
///   wiener_simple   hs_norm_F2 (q = 2)
///   chi             n, d, b
///   mdep            n, m, b
///   local_bounded   n, theta1, theta2, b, b_prime [, d]
///   local_unbounded n, theta1, theta2, b, L [, d]
/// Every application also accepts smallness_cap (default 1/e).
using AppParams = std::map<std::string, double>;

struct AppDelta {
  Application application = Application::iid;
  double delta = 0.0;
  std::map<std::string, double> deltas;
  double alpha = 1.0;
  double p0 = 1.0;
  /// Shape prefactor (K⁴ for qf, otherwise 1).
  double prefactor = 1.0;
  /// Constant added inside the log bracket: 1, d log d, or 0.
  double log_offset = 0.0;
  int d = 1;
  double range_max_x = 0.0;
  double smallness_lhs = 0.0;
  double smallness_cap = 0.0;
  bool feasible = true;
  std::vector<std::string> violated_conditions;
  std::map<std::string, double> aux;
};

/// Δ, α, p0 and range for one application. Unknown keys and missing basic
/// sizes are validation errors; a missing derived input (B_n2, influence,
/// kappa4, theta1, ...) is a dependency error naming the operation that
/// produces it.
AppDelta app_delta(Application app, const AppParams& params);

/// prefactor·(1+x)(log_offset + |log Δ| + x²)^α Δ with the application's
/// smallness and range conditions.
BoundReport app_bound(const AppDelta& app, double x);

/// p·(d(θ₁θ₂)^{1/2} b'² + θ₁² b³ log n)/√n, valid for 2 ≤ p ≤ min(θ₁/θ₂, c/(θ₁²b²))·n
/// with c := 1. range_max_x holds that upper p limit.
BoundReport local_wp_bound(double n, int d, double theta1, double theta2, double b,
                           double b_prime, double p);

}  // namespace pwmd
