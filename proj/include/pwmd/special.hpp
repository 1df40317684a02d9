#pragma once

namespace pwmd {

/// A probability together with its natural log. `log_value` stays finite for
/// tails far below the smallest representable double.
struct TailValue {
  double value = 0.0;
  double log_value = 0.0;
};

inline constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;

double normal_pdf(double x) noexcept;

/// P(Z > x) for Z ~ N(0, 1).
///
/// For |x| < 5 this is erfc(x/√2)/2. Beyond that the scaled complementary error
/// function is evaluated by its continued fraction and the Gaussian factor is
/// applied with an exact split of x², so the result keeps full relative accuracy
/// until it becomes subnormal (x ≈ 37.5). `log_value` is accurate to x = 38 and
/// beyond.
TailValue normal_upper_tail(double x) noexcept;

/// Φ⁻¹(u): rational initial guess refined by one Halley step against
/// normal_upper_tail. Relative error about 1e-15 on (1e-300, 1 - 1e-16).
/// Returns ∓inf at u = 0 / 1 and NaN outside [0, 1].
double normal_quantile(double u) noexcept;

/// κ(d) = 2^{d/2-1} Γ(d/2), the normalizing constant of the chi density.
double log_chi_kappa(int d);
double chi_kappa(int d);

/// P(|Z| > x) for Z ~ N(0, I_d), i.e. the regularized upper incomplete gamma
/// Q(d/2, x²/2). Uses the finite closed forms for integer and half-integer
/// shape, summed in log space. Throws on d < 1 or x < 0.
TailValue chi_upper_tail(double x, int d);

/// Density of |Z|, x^{d-1} e^{-x²/2} / κ(d). Throws on d < 1 or x < 0.
double chi_density(double x, int d);

}  // namespace pwmd
