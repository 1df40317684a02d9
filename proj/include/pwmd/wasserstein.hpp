#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "pwmd/dist.hpp"
#include "pwmd/parallel.hpp"

namespace pwmd {

/// n points in R^d, one per row.
using PointCloud = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class TransportMethod { sorted_1d, quantile_vs_normal, discrete_vs_normal, assignment, sinkhorn };

const char* to_string(TransportMethod method) noexcept;

struct TransportResult {
  double distance = 0.0;
  double p = 1.0;
  TransportMethod method = TransportMethod::sorted_1d;
  /// p-th power transport cost; distance = plan_cost^{1/p}.
  double plan_cost = 0.0;
  int iterations = 0;
  /// Sinkhorn only: false when the marginal tolerance was not met in max_iter.
  bool converged = true;
  double marginal_violation = 0.0;
};

/// Largest point count accepted by wp_assignment (dense n² cost matrix).
inline constexpr std::size_t kAssignmentCap = 4096;

/// Exact W_p between two equal-size empirical measures on the line: the
/// sorted (quantile) coupling.
TransportResult wp_empirical_1d(std::span<const double> xs, std::span<const double> ys, double p);

/// W_p between the empirical measure of xs and N(0,1) under the midpoint
/// quantile coupling x_(i) ↔ Φ⁻¹((i - 1/2)/n). Requires n ≥ 2.
TransportResult wp_sample_vs_normal(std::span<const double> xs, double p);

/// Exact W_p between a finite law and N(0,1): ∫₀¹ |F⁻¹(u) - Φ⁻¹(u)|^p du,
/// integrated plateau by plateau in the normal scale (absolute tolerance
/// 1e-9 on the cost).
TransportResult wp_discrete_vs_normal(std::span<const Atom> pmf, double p);

/// Exact equal-weight OT between two clouds by min-cost perfect matching on
/// |x_i - y_j|^p. Rows are put in lexicographic order before solving, so the
/// result does not depend on input row order.
TransportResult wp_assignment(const PointCloud& x, const PointCloud& y, double p,
                              Exec exec = Exec::parallel);

/// Log-domain Sinkhorn on the entropic problem with regularization `epsilon`
/// (in the units of |x - y|^p). The returned cost is the unregularized cost of
/// a feasible plan obtained by rounding the final iterate onto the transport
/// polytope, hence an upper bound on the exact optimum.
TransportResult wp_sinkhorn(const PointCloud& x, const PointCloud& y, double p, double epsilon,
                            int max_iter, Exec exec = Exec::parallel);

/// Mean of |x_i - y_j|^p over all pairs, a natural scale for `epsilon`.
double mean_pairwise_cost(const PointCloud& x, const PointCloud& y, double p);

namespace kernels {

/// Dense n×m matrix of |x_i - y_j|^p, row-major.
std::vector<double> cost_matrix(const PointCloud& x, const PointCloud& y, double p, Exec exec);

/// out_i = -ε log Σ_j exp((pot_j - cost_ij)/ε) for a row-major n×m cost.
void softmin_rows(std::span<const double> cost, std::size_t n, std::size_t m,
                  std::span<const double> pot, double epsilon, std::span<double> out, Exec exec);

}  // namespace kernels

}  // namespace pwmd
