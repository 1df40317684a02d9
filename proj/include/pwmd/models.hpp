#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "pwmd/dist.hpp"
#include "pwmd/parallel.hpp"
#include "pwmd/rng.hpp"
#include "pwmd/wasserstein.hpp"

namespace pwmd {

// ---------------------------------------------------------------------------
// Model zoo. Summands are always standardized by their DistSpec standard
// deviation, so every model has Var(W) = 1 (or Var(W) = I_d) analytically.
// ---------------------------------------------------------------------------

/// W = Σ_{i≤n} X_i / (σ√n).
struct IidSum {
  int n = 1;
  DistSpec dist = DistSpec::rademacher();
};

/// W ∈ R^d, each coordinate an independent copy of IidSum{n, dist}.
struct MultiIid {
  int n = 1;
  int d = 2;
  DistSpec dist = DistSpec::rademacher();
};

/// S = Σ_i X_{iπ(i)} with X_ij = c_ij + σ_ij ξ_ij and ξ_ij standardized draws
/// of `noise`; W = S / B_n. sigma2 = 0 (deterministic array) is allowed.
struct CombClt {
  Eigen::MatrixXd c;
  Eigen::MatrixXd sigma2;
  DistSpec noise = DistSpec::gaussian();
};

/// One coefficient of a symmetric tensor, keyed by its strictly increasing
/// index tuple. f(i_1..i_q) = value for every permutation of `index`.
struct TensorEntry {
  std::vector<int> index;
  double value = 0.0;
};

/// W = Σ_{i_1..i_q} f(i_1..i_q) X_{i_1}···X_{i_q}, f symmetric with vanishing
/// diagonals and q!‖f‖² = 1.
struct HomSum {
  int q = 2;
  int n = 2;
  std::vector<TensorEntry> entries;
  DistSpec dist = DistSpec::rademacher();

  /// Sorts each index tuple, merges repeated keys and orders entries; throws on
  /// coinciding indices or out-of-range indices.
  static HomSum from_entries(int q, int n, std::vector<TensorEntry> entries, DistSpec dist);
  /// q = 2, f(2k-1, 2k) = 1/√(2n) (0-based: pairs (2k, 2k+1)). n must be even.
  static HomSum perfect_matching(int n, DistSpec dist);
  /// q = 2 with f(i, j) = F(i, j) for i ≠ j.
  static HomSum from_matrix(const Eigen::MatrixXd& f, DistSpec dist);

  /// ‖f‖² summed over ordered tuples, i.e. q!·Σ_entries value². Unit
  /// variance means q!·squared_norm() = 1.
  double squared_norm() const;
};

/// W = Xᵀ F X for X ~ N(0, I_n), F symmetric with zero diagonal and
/// 2‖F‖²_HS = 1: the second Wiener chaos in coordinates.
struct GaussChaos2 {
  Eigen::MatrixXd f;

  /// F(2k, 2k+1) = F(2k+1, 2k) = 1/√(2n).
  static GaussChaos2 perfect_matching(int n);
  /// Symmetric Gaussian off-diagonal entries, rescaled to unit variance.
  static GaussChaos2 random(int n, std::uint64_t seed);
};

/// X_i = Σ_{k≤m} kernel_k ξ_{i+k}: an m-dependent moving average of i.i.d.
/// standardized ξ, W = Σ X_i / sd(Σ X_i).
struct MDep {
  int n = 2;
  int m = 1;
  std::vector<double> kernel{1.0, 1.0};
  DistSpec dist = DistSpec::rademacher();
};

/// Dependency graph model: one standardized variable per vertex and per edge,
/// X_i = ξ_i + Σ_{e ∋ i} η_e. Vertex sets with no edge between them are
/// independent.
struct GraphDep {
  int n = 2;
  std::vector<std::pair<int, int>> edges;
  DistSpec dist = DistSpec::rademacher();
};

using Model = std::variant<IidSum, MultiIid, CombClt, HomSum, GaussChaos2, MDep, GraphDep>;

/// Throws a validation error if a model invariant fails.
void validate(const Model& model);
std::string model_tag(const Model& model);
/// 1 for scalar models, d for MultiIid.
int dimension(const Model& model);

/// Row- and column-centered n×n matrix with Gaussian entries.
Eigen::MatrixXd random_centered_matrix(int n, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

struct Sample {
  PointCloud data;  // reps × d
  int d = 1;
  std::uint64_t seed = 0;
  std::string model_tag;

  std::size_t reps() const noexcept { return static_cast<std::size_t>(data.rows()); }
  /// Coordinate k of every replication.
  std::vector<double> column(int k = 0) const;
  /// Euclidean norm |W| of every replication.
  std::vector<double> norms() const;
};

/// How sums of i.i.d. summands are drawn. `closed_form` samples the sum in
/// O(1) where its law is known (gaussian, laplace via a gamma difference,
/// exponential via gamma, rademacher via binomial); `per_summand` always adds
/// n draws and is the reference path.
enum class SumStrategy { closed_form, per_summand };

/// Σ_{i≤n} X_i of raw (unstandardized) draws from the θ-tilted law of `dist`.
double draw_iid_sum(const DistSpec& dist, int n, double theta, CounterRng& rng,
                    SumStrategy strategy);

/// Precomputed model ready for repeated draws.
class Sampler {
 public:
  explicit Sampler(Model model, SumStrategy strategy = SumStrategy::closed_form);

  const Model& model() const noexcept { return model_; }
  int dimension() const noexcept { return dim_; }
  /// Writes one realization of W into out[0..d).
  void draw(CounterRng& rng, std::span<double> out) const;
  /// Scalar models only.
  double draw_scalar(CounterRng& rng) const;

 private:
  Model model_;
  SumStrategy strategy_;
  int dim_ = 1;
  double scale_ = 1.0;               // divides the raw sum
  std::vector<double> mdep_coef_;    // MDep: weight of each ξ_j
};

/// reps i.i.d. realizations of W; replication r uses CounterRng(seed, r), so
/// the result is independent of the execution policy and thread count.
Sample sample_w(const Model& model, std::size_t reps, std::uint64_t seed,
                Exec exec = Exec::parallel, SumStrategy strategy = SumStrategy::closed_form);

// ---------------------------------------------------------------------------
// Exchangeable pairs
// ---------------------------------------------------------------------------

struct PairDraw {
  std::vector<double> w;
  std::vector<double> w_prime;
  std::vector<double> d_increment;  // w_prime - w
  int index_i = -1;                 // resampled coordinate, or first swapped index
  int index_j = -1;                 // CombClt: second swapped index
  double old_value = 0.0;           // resampled coordinate before / after
  double new_value = 0.0;
};

/// One draw of (W, W'). IidSum, MultiIid and HomSum resample a uniform
/// coordinate from an independent copy; CombClt composes π with a uniform
/// transposition (I J), I ≠ J. Throws a capability error for other models.
PairDraw draw_pair(const Model& model, std::uint64_t seed);
/// `count` independent pair draws, draw k seeded by (seed, k).
std::vector<PairDraw> draw_pairs(const Model& model, std::size_t count, std::uint64_t seed,
                                 Exec exec = Exec::parallel);

/// Conditional moments of D = W' - W given one enumerated state.
struct StateConditional {
  double prob = 0.0;
  double w = 0.0;
  double mean_d = 0.0;   // E[D | state]
  double mean_d2 = 0.0;  // E[D² | state]
  double mean_d4 = 0.0;  // E[D⁴ | state]
  double r = 0.0;        // from E[D | state] = -λ (W + R)
  double e = 0.0;        // E[D² | state] / (2λ) - 1
};

/// Exact conditional-moment data for the exchangeable-pair bounds.
struct Certificate {
  double lambda = 0.0;
  double p = 2.0;
  double norm_R_p = 0.0;
  double norm_E_p = 0.0;
  double norm_D4_p = 0.0;
  int d = 1;
  bool exact = false;
  std::string model_tag;
  std::vector<StateConditional> states;
};

/// ‖V‖_p over a finite law. Terms are summed in ascending order so the result
/// does not depend on the order of the states.
double lp_norm(std::span<const StateConditional> states, double p,
               double (*field)(const StateConditional&));

/// Enumerates every state and every pair transition of a small discrete
/// model: IidSum with a lattice or rademacher law (n ≤ 12), CombClt with
/// σ² = 0 (n ≤ 7), HomSum with rademacher inputs (n ≤ 16). λ is the model's
/// own constant: 1/n, 2/(n-1) or q/n. Larger models throw a SizingError
/// carrying the state count.
Certificate exact_pair_conditionals(const Model& model, double p);
/// The same certificate with its norms recomputed at order p.
Certificate certificate_at(const Certificate& cert, double p);

// ---------------------------------------------------------------------------
// Structural statistics
// ---------------------------------------------------------------------------

/// B_n² = Σc²/(n-1) + Σσ²/n. Throws if c is not row/column centered (1e-10).
double comb_variance(const Eigen::MatrixXd& c, const Eigen::MatrixXd& sigma2);

/// max_i Σ_{i_2..i_q} f(i, i_2, ..., i_q)².
double maximal_influence(const HomSum& f);

struct ContractionQ2 {
  Eigen::MatrixXd f_squared;
  double op_norm_f = 0.0;
  double hs_norm_f = 0.0;
  double op_norm_f2 = 0.0;
  double hs_norm_f2 = 0.0;
};

/// For q = 2 the contraction f ⊗₁ f is the matrix F². Throws on
/// non-symmetric input.
ContractionQ2 contraction_q2(const Eigen::MatrixXd& f);

struct FourthCumulant {
  double kappa4 = 0.0;
  double se = 0.0;
  bool exact = false;
};

/// κ₄ = E W⁴ - 3. Exact for GaussChaos2 (48 tr F⁴) and for rademacher HomSum
/// with n ≤ 20; otherwise a Monte Carlo estimate with jackknife standard error.
FourthCumulant fourth_cumulant(const Model& model, std::size_t reps, std::uint64_t seed);
/// Always Monte Carlo: sample κ₄ = m₄ - 3m₂² with a jackknife standard error.
FourthCumulant fourth_cumulant_mc(const Model& model, std::size_t reps, std::uint64_t seed,
                                  Exec exec = Exec::parallel);

struct DependencyStats {
  int theta1 = 0;
  int theta2 = 0;
  int group_count = 0;
  std::vector<std::vector<int>> neighborhoods;  // A_i, sorted
  std::vector<std::vector<int>> groups;         // mutually independent index sets
};

/// θ₁ = max|A_i|, θ₂ = max over i and j ∈ A_i of |B_ij| where A_ij = A_i ∪ A_j
/// and B_ij = {(k, l) : l ∈ A_k, k ∈ A_ij or l ∈ A_ij}; L independent groups
/// (m + 1 residue classes for MDep, greedy coloring for GraphDep).
DependencyStats dependency_stats(const Model& model);

}  // namespace pwmd
