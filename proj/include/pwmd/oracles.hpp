#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pwmd/dist.hpp"
#include "pwmd/models.hpp"

namespace pwmd {

/// Exact finite law: values strictly increasing, probabilities summing to 1.
struct ExactPmf {
  std::vector<Atom> atoms;
  std::string model_tag;

  double mean() const;
  /// E W^k.
  double moment(int k) const;
  double total_mass() const;
};

/// Atoms closer than this (absolute, standardized scale) are merged.
inline constexpr double kMergeTolerance = 1e-12;
inline constexpr std::size_t kMaxSupport = 10'000'000;

/// Sorts atoms and merges runs whose values lie within kMergeTolerance of the
/// run's first value. The merged value is the probability-weighted mean.
ExactPmf make_pmf(std::vector<Atom> atoms, std::string model_tag);

/// Law of X + Y for independent X ~ a, Y ~ b, then merged.
ExactPmf convolve(const ExactPmf& a, const ExactPmf& b);
/// Law of s·X.
ExactPmf scale(const ExactPmf& pmf, double s);

/// Exact law of W = Σ_{i≤n} X_i / (σ√n) for a rademacher or lattice law with at
/// most 64 atoms. Values on a common integer grid are convolved as integer
/// offsets, so the support carries no drift. Throws SizingError when the
/// support would exceed kMaxSupport.
ExactPmf convolve_iid_pmf(const DistSpec& dist, int n);

/// Law of W = S / B_n over all n! permutations of a deterministic centered
/// array (n ≤ 9).
ExactPmf enumerate_comb(const Eigen::MatrixXd& c);

/// Law of W over all 2^n sign vectors of a rademacher homogeneous sum (n ≤ 20).
ExactPmf enumerate_homsum(const HomSum& f, Exec exec = Exec::parallel);

struct TailReference {
  enum Kind { normal, chi } kind = normal;
  int d = 1;
};

struct TailRatio {
  double p_w = 0.0;
  double p_ref = 0.0;
  double ratio = 0.0;
  double log_p_ref = 0.0;
  /// log(p_w / p_ref); -inf when p_w = 0. Stays finite when p_ref underflows.
  double log_ratio = 0.0;
  bool log_space = false;
};

/// P(W > x) (strict) against P(Z > x) or P(|Z| > x) for Z ~ N(0, I_d). Below
/// 1e-300 the reference is carried in log space and `ratio` is exp(log_ratio)
/// (possibly +inf).
TailRatio exact_tail_ratio(const ExactPmf& pmf, double x, TailReference ref = {});

/// "value,prob" rows at 17 significant digits.
void write_pmf_csv(const ExactPmf& pmf, std::ostream& out);

}  // namespace pwmd
