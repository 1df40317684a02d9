#include "pwmd/dist.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "pwmd/error.hpp"
#include "pwmd/special.hpp"

namespace pwmd {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLaplaceScale = 0.70710678118654752440;  // unit variance

double log_cosh(double t) {
  const double a = std::fabs(t);
  return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

// log(sinh(u)/u)
double log_sinhc(double u) {
  const double a = std::fabs(u);
  if (a < 1e-4) return a * a / 6.0;
  return a + std::log1p(-std::exp(-2.0 * a)) - std::numbers::ln2 - std::log(a);
}

double exponential(CounterRng& rng, double rate) { return -std::log(rng.uniform_open()) / rate; }

}  // namespace

const char* to_string(Family family) noexcept {
  switch (family) {
    case Family::rademacher: return "rademacher";
    case Family::laplace_unit_var: return "laplace_unit_var";
    case Family::centered_exponential: return "centered_exponential";
    case Family::uniform_centered: return "uniform_centered";
    case Family::gaussian: return "gaussian";
    case Family::lattice: return "lattice";
  }
  return "unknown";
}

Family family_from_string(const std::string& name) {
  for (Family f : {Family::rademacher, Family::laplace_unit_var, Family::centered_exponential,
                   Family::uniform_centered, Family::gaussian, Family::lattice}) {
    if (name == to_string(f)) return f;
  }
  fail(ErrorKind::validation, "unknown distribution family '" + name + "'");
}

DistSpec DistSpec::rademacher() { return DistSpec(Family::rademacher, 0.0); }
DistSpec DistSpec::laplace_unit_var() { return DistSpec(Family::laplace_unit_var, 0.0); }
DistSpec DistSpec::gaussian() { return DistSpec(Family::gaussian, 0.0); }

DistSpec DistSpec::centered_exponential(double rate) {
  require(rate > 0.0 && std::isfinite(rate), "centered_exponential: rate must be positive");
  return DistSpec(Family::centered_exponential, rate);
}

DistSpec DistSpec::uniform_centered(double half_width) {
  require(half_width > 0.0 && std::isfinite(half_width),
          "uniform_centered: half_width must be positive");
  return DistSpec(Family::uniform_centered, half_width);
}

DistSpec DistSpec::lattice(std::vector<Atom> points) {
  require(!points.empty(), "lattice: at least one point required");
  std::sort(points.begin(), points.end(),
            [](const Atom& a, const Atom& b) { return a.value < b.value; });
  DistSpec spec(Family::lattice, 0.0);
  for (const Atom& a : points) {
    require(std::isfinite(a.value), "lattice: values must be finite");
    require(a.prob >= 0.0, "lattice: probabilities must be nonnegative");
    if (!spec.atoms_.empty() && spec.atoms_.back().value == a.value)
      spec.atoms_.back().prob += a.prob;
    else
      spec.atoms_.push_back(a);
  }
  double total = 0.0;
  double mean = 0.0;
  for (const Atom& a : spec.atoms_) {
    total += a.prob;
    mean += a.prob * a.value;
  }
  require(std::fabs(total - 1.0) <= 1e-12, "lattice: probabilities must sum to 1");
  require(std::fabs(mean) <= 1e-12, "lattice: mean must be 0");
  require(spec.variance() > 0.0, "lattice: variance must be positive");
  double cum = 0.0;
  for (const Atom& a : spec.atoms_) spec.cumulative_.push_back(cum += a.prob);
  return spec;
}

std::string DistSpec::name() const {
  std::ostringstream os;
  os << to_string(family_);
  if (family_ == Family::centered_exponential) os << "(rate=" << param_ << ")";
  if (family_ == Family::uniform_centered) os << "(half_width=" << param_ << ")";
  if (family_ == Family::lattice) os << "(" << atoms_.size() << " atoms)";
  return os.str();
}

double DistSpec::variance() const noexcept {
  switch (family_) {
    case Family::rademacher:
    case Family::laplace_unit_var:
    case Family::gaussian: return 1.0;
    case Family::centered_exponential: return 1.0 / (param_ * param_);
    case Family::uniform_centered: return param_ * param_ / 3.0;
    case Family::lattice: {
      double v = 0.0;
      for (const Atom& a : atoms_) v += a.prob * a.value * a.value;
      return v;
    }
  }
  return 0.0;
}

double DistSpec::stddev() const noexcept { return std::sqrt(variance()); }

double DistSpec::standardized_fourth_moment() const {
  switch (family_) {
    case Family::rademacher: return 1.0;
    case Family::laplace_unit_var: return 6.0;
    case Family::centered_exponential: return 9.0;
    case Family::uniform_centered: return 9.0 / 5.0;
    case Family::gaussian: return 3.0;
    case Family::lattice: {
      double m4 = 0.0;
      for (const Atom& a : atoms_) m4 += a.prob * std::pow(a.value, 4);
      const double v = variance();
      return m4 / (v * v);
    }
  }
  return 0.0;
}

DistSpec DistSpec::scaled(double s) const {
  require(s > 0.0, "scaled: factor must be positive");
  if (family_ == Family::uniform_centered) return uniform_centered(param_ * s);
  if (family_ == Family::rademacher) return lattice({{-s, 0.5}, {s, 0.5}});
  if (family_ != Family::lattice)
    fail(ErrorKind::capability, "scaled: not supported for " + name());
  std::vector<Atom> pts = atoms_;
  for (Atom& a : pts) a.value *= s;
  return lattice(std::move(pts));
}

std::pair<double, double> DistSpec::mgf_domain() const noexcept {
  switch (family_) {
    case Family::laplace_unit_var: return {-1.0 / kLaplaceScale, 1.0 / kLaplaceScale};
    case Family::centered_exponential: return {-kInf, param_};
    default: return {-kInf, kInf};
  }
}

double DistSpec::max_tilted_mean() const noexcept {
  switch (family_) {
    case Family::rademacher: return 1.0;
    case Family::uniform_centered: return param_;
    case Family::lattice: return atoms_.back().value;
    default: return kInf;
  }
}

double DistSpec::log_mgf(double theta) const {
  const auto [lo, hi] = mgf_domain();
  if (!(theta > lo && theta < hi))
    fail(ErrorKind::range, "log_mgf: theta outside the MGF domain of " + name());
  switch (family_) {
    case Family::rademacher: return log_cosh(theta);
    case Family::laplace_unit_var: {
      const double st = kLaplaceScale * theta;
      return -std::log1p(-st * st);
    }
    case Family::centered_exponential: {
      const double u = theta / param_;
      return -std::log1p(-u) - u;
    }
    case Family::uniform_centered: return log_sinhc(param_ * theta);
    case Family::gaussian: return 0.5 * theta * theta;
    case Family::lattice: {
      double m = -kInf;
      for (const Atom& a : atoms_)
        if (a.prob > 0.0) m = std::max(m, theta * a.value);
      double s = 0.0;
      for (const Atom& a : atoms_) s += a.prob * std::exp(theta * a.value - m);
      return m + std::log(s);
    }
  }
  return 0.0;
}

double DistSpec::log_mgf_derivative(double theta) const {
  const auto [lo, hi] = mgf_domain();
  if (!(theta > lo && theta < hi))
    fail(ErrorKind::range, "log_mgf_derivative: theta outside the MGF domain of " + name());
  switch (family_) {
    case Family::rademacher: return std::tanh(theta);
    case Family::laplace_unit_var: {
      const double s2 = kLaplaceScale * kLaplaceScale;
      return 2.0 * s2 * theta / (1.0 - s2 * theta * theta);
    }
    case Family::centered_exponential: return 1.0 / (param_ - theta) - 1.0 / param_;
    case Family::uniform_centered: {
      const double u = param_ * theta;
      if (std::fabs(u) < 1e-4) return param_ * u / 3.0;
      return param_ * (1.0 / std::tanh(u) - 1.0 / u);
    }
    case Family::gaussian: return theta;
    case Family::lattice: {
      double m = -kInf;
      for (const Atom& a : atoms_)
        if (a.prob > 0.0) m = std::max(m, theta * a.value);
      double num = 0.0;
      double den = 0.0;
      for (const Atom& a : atoms_) {
        const double w = a.prob * std::exp(theta * a.value - m);
        num += w * a.value;
        den += w;
      }
      return num / den;
    }
  }
  return 0.0;
}

double DistSpec::sample(CounterRng& rng) const {
  switch (family_) {
    case Family::rademacher: return (rng() >> 63) ? 1.0 : -1.0;
    case Family::laplace_unit_var: {
      const double e = exponential(rng, 1.0 / kLaplaceScale);
      return (rng() >> 63) ? e : -e;
    }
    case Family::centered_exponential: return exponential(rng, param_) - 1.0 / param_;
    case Family::uniform_centered: return param_ * (2.0 * rng.uniform_open() - 1.0);
    case Family::gaussian: {
      std::normal_distribution<double> normal;
      return normal(rng);
    }
    case Family::lattice: {
      const double u = rng.uniform_open();
      const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
      const auto k = std::min<std::size_t>(it - cumulative_.begin(), atoms_.size() - 1);
      return atoms_[k].value;
    }
  }
  return 0.0;
}

double DistSpec::sample_tilted(CounterRng& rng, double theta) const {
  if (theta == 0.0) return sample(rng);
  const auto [lo, hi] = mgf_domain();
  if (!(theta > lo && theta < hi))
    fail(ErrorKind::range, "sample_tilted: theta outside the MGF domain of " + name());
  switch (family_) {
    case Family::rademacher: {
      const double p_plus = 1.0 / (1.0 + std::exp(-2.0 * theta));
      return rng.uniform_open() < p_plus ? 1.0 : -1.0;
    }
    case Family::laplace_unit_var: {
      const double inv = 1.0 / kLaplaceScale;
      return exponential(rng, inv - theta) - exponential(rng, inv + theta);
    }
    case Family::centered_exponential:
      return exponential(rng, param_ - theta) - 1.0 / param_;
    case Family::uniform_centered: {
      // inverse CDF of the density ∝ e^{θx} on [-a, a], written in the
      // direction that cannot overflow
      const double a = param_;
      const double u = rng.uniform_open();
      const double span = std::expm1(-2.0 * a * std::fabs(theta));
      const double offset = std::log1p(u * span) / std::fabs(theta);
      return theta > 0.0 ? a + offset : -a - offset;
    }
    case Family::gaussian: {
      std::normal_distribution<double> normal(theta, 1.0);
      return normal(rng);
    }
    case Family::lattice: {
      const double psi = log_mgf(theta);
      const double u = rng.uniform_open();
      double cum = 0.0;
      for (const Atom& a : atoms_) {
        cum += a.prob * std::exp(theta * a.value - psi);
        if (u < cum) return a.value;
      }
      return atoms_.back().value;
    }
  }
  return 0.0;
}

double expected_psi(const DistSpec& dist, double alpha, double t) {
  require(alpha > 0.0, "expected_psi: alpha must be positive");
  require(t > 0.0, "expected_psi: t must be positive");
  const auto psi = [alpha, t](double z) { return std::expm1(std::pow(std::fabs(z) / t, alpha)); };
  // ψ(z)·density(z) with the density given by its log, combined in one exponent
  const auto weighted_psi = [alpha, t](double z, double log_density) {
    return std::exp(std::pow(std::fabs(z) / t, alpha) + log_density) - std::exp(log_density);
  };
  constexpr double kExpCap = 700.0;
  switch (dist.family()) {
    case Family::rademacher: return psi(1.0);
    case Family::lattice: {
      double s = 0.0;
      for (const Atom& a : dist.atoms()) s += a.prob * psi(a.value);
      return s;
    }
    case Family::uniform_centered: {
      const double a = dist.parameter();
      if (alpha == 1.0) return (t / a) * std::expm1(a / t) - 1.0;
      boost::math::quadrature::tanh_sinh<double> integrator;
      const double v = integrator.integrate([&](double z) { return psi(z); }, 0.0, a);
      return v / a;
    }
    case Family::laplace_unit_var: {
      // |X| ~ Exp(mean s)
      const double s = kLaplaceScale;
      if (alpha > 1.0) return kInf;
      if (alpha == 1.0) return t > s ? s / (t - s) : kInf;
      const double peak = std::pow(alpha * s * std::pow(t, -alpha), 1.0 / (1.0 - alpha));
      if (std::pow(peak / t, alpha) - peak / s > kExpCap) return kInf;
      boost::math::quadrature::exp_sinh<double> integrator;
      return integrator.integrate([&](double z) { return weighted_psi(z, -z / s - std::log(s)); });
    }
    case Family::centered_exponential: {
      const double r = dist.parameter();
      const double mu = 1.0 / r;
      if (alpha > 1.0) return kInf;
      if (alpha == 1.0) {
        if (t <= mu) return kInf;
        const double k = r + 1.0 / t;
        const double below = r * std::exp(mu / t) * (-std::expm1(-k * mu)) / k;
        const double above = std::exp(-1.0) * r / (r - 1.0 / t);
        return below + above - 1.0;
      }
      // X = E - μ: split at X = 0
      boost::math::quadrature::tanh_sinh<double> finite;
      boost::math::quadrature::exp_sinh<double> infinite;
      const double below = finite.integrate(
          [&](double x) { return psi(x) * r * std::exp(-r * (x + mu)); }, -mu, 0.0);
      const double peak = std::pow(alpha * std::pow(t, -alpha) / r, 1.0 / (1.0 - alpha));
      if (std::pow(peak / t, alpha) - r * peak - 1.0 > kExpCap) return kInf;
      const double above =
          infinite.integrate([&](double x) { return weighted_psi(x, std::log(r) - r * (x + mu)); });
      return below + above;
    }
    case Family::gaussian: {
      if (alpha > 2.0) return kInf;
      if (alpha == 2.0) {
        const double c = 1.0 - 2.0 / (t * t);
        return c > 0.0 ? 1.0 / std::sqrt(c) - 1.0 : kInf;
      }
      const double peak = std::pow(alpha * std::pow(t, -alpha), 1.0 / (2.0 - alpha));
      if (std::pow(peak / t, alpha) - 0.5 * peak * peak > kExpCap) return kInf;
      boost::math::quadrature::exp_sinh<double> integrator;
      const double log_norm = std::log(kInvSqrt2Pi);
      return 2.0 * integrator.integrate([&](double z) { return weighted_psi(z, log_norm - 0.5 * z * z); });
    }
  }
  return kInf;
}

double orlicz_norm(const DistSpec& dist, double alpha) {
  require(alpha > 0.0, "orlicz_norm: alpha must be positive");
  if (dist.family() == Family::gaussian && alpha > 2.0)
    fail(ErrorKind::validation, "orlicz_norm: gaussian has no psi_alpha norm for alpha > 2");
  const double sigma = dist.stddev();
  double lo = sigma * 1e-6;
  double hi = sigma * 1e6;
  if (!(expected_psi(dist, alpha, hi) <= 1.0))
    fail(ErrorKind::divergence, "orlicz_norm: E psi_alpha(|X|/t) > 1 for every t up to " +
                                    std::to_string(hi) + " (" + dist.name() + ")");
  for (int it = 0; it < 200 && hi - lo > 1e-9; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (expected_psi(dist, alpha, mid) <= 1.0)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

}  // namespace pwmd
