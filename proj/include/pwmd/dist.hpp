#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pwmd/rng.hpp"

namespace pwmd {

enum class Family {
  rademacher,
  laplace_unit_var,
  centered_exponential,
  uniform_centered,
  gaussian,
  lattice,
};

const char* to_string(Family family) noexcept;
Family family_from_string(const std::string& name);

struct Atom {
  double value = 0.0;
  double prob = 0.0;
};

/// Law of one summand. Every family is centered; `variance()` is exact.
/// Models standardize summands by `stddev()` before use.
class DistSpec {
 public:
  static DistSpec rademacher();
  static DistSpec laplace_unit_var();
  static DistSpec centered_exponential(double rate);
  static DistSpec uniform_centered(double half_width);
  static DistSpec gaussian();
  /// Atoms are sorted and exact duplicates merged. Throws unless the
  /// probabilities are nonnegative, sum to 1 and give mean 0 (all within 1e-12)
  /// with positive variance.
  static DistSpec lattice(std::vector<Atom> points);

  Family family() const noexcept { return family_; }
  /// Rate for centered_exponential, half width for uniform_centered, else 0.
  double parameter() const noexcept { return param_; }
  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  std::string name() const;

  double variance() const noexcept;
  double stddev() const noexcept;
  /// E X⁴ / σ⁴.
  double standardized_fourth_moment() const;

  /// Lattice with every value multiplied by s > 0. Lattice and uniform only.
  DistSpec scaled(double s) const;

  /// ψ(θ) = log E e^{θX} and ψ'(θ); both throw outside the open domain.
  double log_mgf(double theta) const;
  double log_mgf_derivative(double theta) const;
  /// Open interval of θ where ψ is finite.
  std::pair<double, double> mgf_domain() const noexcept;
  /// sup_θ ψ'(θ): the largest mean a tilted law can reach.
  double max_tilted_mean() const noexcept;

  double sample(CounterRng& rng) const;
  /// Draw from the exponentially tilted law e^{θx - ψ(θ)} dF(x).
  double sample_tilted(CounterRng& rng, double theta) const;

 private:
  DistSpec(Family family, double param) : family_(family), param_(param) {}

  Family family_;
  double param_ = 0.0;
  std::vector<Atom> atoms_;
  std::vector<double> cumulative_;
};

/// E ψ_α(|X|/t) with ψ_α(u) = exp(u^α) - 1. Returns +inf where the
/// expectation diverges.
double expected_psi(const DistSpec& dist, double alpha, double t);

/// ‖X‖_{ψ_α} = inf{t > 0 : E ψ_α(|X|/t) ≤ 1}, by bisection on
/// [σ·1e-6, σ·1e6] to absolute tolerance 1e-9. Throws a divergence error when
/// no t in the bracket satisfies the constraint (e.g. gaussian with α > 2).
double orlicz_norm(const DistSpec& dist, double alpha);

}  // namespace pwmd
