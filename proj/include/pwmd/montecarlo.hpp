#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pwmd/bounds.hpp"
#include "pwmd/models.hpp"

namespace pwmd {

enum class TailMethod { plain, tilted };

const char* to_string(TailMethod method) noexcept;
TailMethod tail_method_from_string(const std::string& name);

inline constexpr double kZ95 = 1.96;

struct TailRow {
  double x = 0.0;
  double p_hat = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double p_ref = 0.0;
  double ratio = 0.0;
  double ratio_ci_lo = 0.0;
  double ratio_ci_hi = 0.0;
  double bound_shape = 0.0;
  bool feasible = true;
  /// Tilted only: the exponential tilt used.
  double theta = 0.0;
};

struct TailReport {
  std::vector<TailRow> rows;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
  TailMethod method = TailMethod::plain;
  std::string model_tag;
};

/// θ with ψ'(θ) = target_mean, by bisection to 1e-10. Range error when the
/// target lies beyond the means reachable inside the MGF domain.
double solve_tilt(const DistSpec& dist, double target_mean);

/// P(W > x) for scalar models, P(|W| > x) against chi(d) for MultiIid.
/// `plain` averages indicators (Wilson interval below 50 expected hits);
/// `tilted` samples IidSum summands from the θ-tilted law and averages
/// e^{-θS + nψ(θ)} 1{S > x σ√n}. Pass `theta` to reuse a solved tilt.
TailRow estimate_tail(const Model& model, double x, std::size_t reps, std::uint64_t seed,
                      TailMethod method, Exec exec = Exec::parallel,
                      std::optional<double> theta = std::nullopt);

/// One row per grid point (ascending grid). Row k is seeded by (seed, k).
/// With `bound`, each row carries the application's bound shape and
/// feasibility at x; the estimate is produced regardless.
TailReport ratio_curve(const Model& model, const std::vector<double>& x_grid, std::size_t reps,
                       std::uint64_t seed, TailMethod method,
                       const std::optional<AppDelta>& bound = std::nullopt, Exec exec = Exec::parallel);

struct ScalingPoint {
  double abscissa = 0.0;  // n or p
  double wp_hat = 0.0;
  /// Gaussian-vs-Gaussian W_p at the same reps and p.
  double noise_floor = 0.0;
};

struct ScalingReport {
  std::vector<ScalingPoint> points;
  double p = 1.0;
  std::size_t reps = 0;
  std::uint64_t seed = 0;
  double fitted_exponent = 0.0;
  double fitted_log_intercept = 0.0;
  double r_squared = 0.0;
  /// Ŵ_p at the largest abscissa is within 2× of its noise floor.
  bool floor_dominated = false;
};

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Least squares of log y on log x.
LogLogFit fit_log_log(const std::vector<double>& x, const std::vector<double>& y);

/// Ŵ_p = wp_sample_vs_normal on `reps` draws of family(n) for each n. The
/// grid needs at least 4 points.
ScalingReport wp_scaling(const std::function<Model(int)>& family, const std::vector<int>& n_grid,
                         double p, std::size_t reps, std::uint64_t seed, Exec exec = Exec::parallel);

/// Ŵ_p of one sample of W across p (same draws for every p).
ScalingReport wp_scaling_in_p(const Model& model, const std::vector<double>& p_grid, std::size_t reps,
                              std::uint64_t seed, Exec exec = Exec::parallel);

/// W_p between `reps` standard normal draws and N(0,1) under the midpoint
/// quantile coupling.
double gaussian_noise_floor(std::size_t reps, double p, std::uint64_t seed, Exec exec = Exec::parallel);

void write_tail_csv(const TailReport& report, std::ostream& out);
void write_scaling_csv(const ScalingReport& report, std::ostream& out);

/// Formats a double with 17 significant digits. A missing bound shape is
/// written as an empty field.
std::string format_g17(double v);

}  // namespace pwmd
