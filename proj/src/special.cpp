#include "pwmd/special.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "pwmd/error.hpp"

namespace pwmd {
namespace {

constexpr double kTailSplit = 5.0;

// erfcx(z) = e^{z²} erfc(z) for z ≥ 3.5, modified Lentz on
// √π·erfcx(z) = 1/(z + (1/2)/(z + 1/(z + (3/2)/(z + ...)))).
double erfcx_continued_fraction(double z) {
  constexpr double tiny = 1e-300;
  double f = z;
  double c = z;
  double d = 0.0;
  for (int k = 1; k < 500; ++k) {
    const double a = 0.5 * k;
    d = z + a * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = z + a / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::fabs(delta - 1.0) < 1e-16) break;
  }
  return 1.0 / (f * std::sqrt(std::numbers::pi));
}

double log_sum_exp(const std::vector<double>& logs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : logs) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : logs) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::validation: return "validation";
    case ErrorKind::sizing: return "sizing";
    case ErrorKind::capability: return "capability";
    case ErrorKind::range: return "range";
    case ErrorKind::degenerate: return "degenerate";
    case ErrorKind::dependency: return "dependency";
    case ErrorKind::divergence: return "divergence";
  }
  return "unknown";
}

double normal_pdf(double x) noexcept { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

TailValue normal_upper_tail(double x) noexcept {
  if (std::isnan(x)) return {x, x};
  if (x >= kTailSplit) {
    if (std::isinf(x)) return {0.0, -std::numeric_limits<double>::infinity()};
    // x² = hi + lo exactly; hi/2 is exact as well.
    const double hi = x * x;
    const double lo = std::fma(x, x, -hi);
    const double scaled = 0.5 * erfcx_continued_fraction(x * std::numbers::sqrt2 / 2.0);
    const double log_value = -0.5 * hi - 0.5 * lo + std::log(scaled);
    const double value = std::exp(-0.5 * hi) * std::exp(-0.5 * lo) * scaled;
    return {value, log_value};
  }
  if (x <= -kTailSplit) {
    const TailValue mirror = normal_upper_tail(-x);
    return {1.0 - mirror.value, std::log1p(-mirror.value)};
  }
  const double value = 0.5 * std::erfc(x / std::numbers::sqrt2);
  if (x < 0.0) return {value, std::log1p(-0.5 * std::erfc(-x / std::numbers::sqrt2))};
  return {value, std::log(value)};
}

double normal_quantile(double u) noexcept {
  if (std::isnan(u) || u < 0.0 || u > 1.0) return std::numeric_limits<double>::quiet_NaN();
  if (u == 0.0) return -std::numeric_limits<double>::infinity();
  if (u == 1.0) return std::numeric_limits<double>::infinity();
  if (u == 0.5) return 0.0;

  // Solve Q(y) = t for y > 0 with t the smaller tail; 1 - u is exact for u ≥ 1/2.
  const bool upper = u > 0.5;
  const double t = upper ? 1.0 - u : u;

  // Acklam's rational approximation of Φ⁻¹(t), t < 1/2.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  double x;
  if (t < 0.02425) {
    const double q = std::sqrt(-2.0 * std::log(t));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    const double q = t - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  double y = -x;  // y > 0 with Q(y) ≈ t

  // Halley step on f(y) = Q(y) - t, f' = -φ, f'' = yφ.
  const double ratio = (normal_upper_tail(y).value - t) / normal_pdf(y);
  if (std::isfinite(ratio)) y += ratio / (1.0 - 0.5 * y * ratio);
  return upper ? y : -y;
}

double log_chi_kappa(int d) {
  require(d >= 1, "chi: dimension must be >= 1, got " + std::to_string(d));
  return (0.5 * d - 1.0) * std::numbers::ln2 + std::lgamma(0.5 * d);
}

double chi_kappa(int d) { return std::exp(log_chi_kappa(d)); }

TailValue chi_upper_tail(double x, int d) {
  require(d >= 1, "chi_upper_tail: dimension must be >= 1, got " + std::to_string(d));
  require(x >= 0.0, "chi_upper_tail: x must be nonnegative");
  if (x == 0.0) return {1.0, 0.0};
  if (std::isinf(x)) return {0.0, -std::numeric_limits<double>::infinity()};

  const double y = 0.5 * x * x;
  const double log_y = std::log(y);
  std::vector<double> logs;
  logs.reserve(static_cast<std::size_t>(d / 2) + 1);
  if (d % 2 == 0) {
    // Q(k, y) = e^{-y} Σ_{j<k} y^j / j!
    for (int j = 0; j < d / 2; ++j) logs.push_back(-y + j * log_y - std::lgamma(j + 1.0));
  } else {
    // Q(k + 1/2, y) = erfc(√y) + e^{-y} Σ_{j<k} y^{j+1/2} / Γ(j + 3/2)
    logs.push_back(std::numbers::ln2 + normal_upper_tail(x).log_value);
    for (int j = 0; j < d / 2; ++j)
      logs.push_back(-y + (j + 0.5) * log_y - std::lgamma(j + 1.5));
  }
  const double log_value = std::min(0.0, log_sum_exp(logs));
  if (log_value > -std::numbers::ln2) {
    // near 1 the complement carries the information
    const double lower = boost::math::gamma_p(0.5 * d, y);
    return {1.0 - lower, std::log1p(-lower)};
  }
  return {std::exp(log_value), log_value};
}

double chi_density(double x, int d) {
  require(d >= 1, "chi_density: dimension must be >= 1, got " + std::to_string(d));
  require(x >= 0.0, "chi_density: x must be nonnegative");
  if (x == 0.0) return d == 1 ? std::exp(-log_chi_kappa(1)) : 0.0;
  return std::exp((d - 1) * std::log(x) - 0.5 * x * x - log_chi_kappa(d));
}

}  // namespace pwmd
