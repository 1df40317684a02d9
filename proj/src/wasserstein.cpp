#include "pwmd/wasserstein.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "pwmd/error.hpp"
#include "pwmd/special.hpp"

namespace pwmd {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Beyond ±40 the normal density is below 1e-347; the quadrature is truncated there.
constexpr double kNormalSupport = 40.0;

void check_p(double p) {
  require(p >= 1.0 && std::isfinite(p), "Wasserstein order p must be >= 1");
}

TransportResult make_result(double cost, double p, TransportMethod method) {
  TransportResult r;
  r.plan_cost = std::max(cost, 0.0);
  r.distance = std::pow(r.plan_cost, 1.0 / p);
  r.p = p;
  r.method = method;
  return r;
}

std::vector<double> sorted_copy(std::span<const double> v) {
  std::vector<double> out(v.begin(), v.end());
  for (double x : out) require(std::isfinite(x), "Wasserstein: samples must be finite");
  std::sort(out.begin(), out.end());
  return out;
}

// Gauss–Kronrod bisection to an absolute error target. Relative targets stall
// on plateaus whose cost is at rounding level.
template <class F>
double integrate_abs(const F& f, double lo, double hi, double tol, int depth) {
  double err = 0.0;
  const double r = boost::math::quadrature::gauss_kronrod<double, 21>::integrate(f, lo, hi, 0, 0.0, &err);
  if (err <= tol || depth == 0) return r;
  const double mid = 0.5 * (lo + hi);
  return integrate_abs(f, lo, mid, 0.5 * tol, depth - 1) + integrate_abs(f, mid, hi, 0.5 * tol, depth - 1);
}

// ∫_a^b |v - z|^p φ(z) dz, split at the kink z = v.
double plateau_cost(double v, double a, double b, double p, double tol) {
  a = std::max(a, -kNormalSupport);
  b = std::min(b, kNormalSupport);
  if (!(b > a)) return 0.0;
  const auto integrand = [v, p](double z) { return std::pow(std::fabs(v - z), p) * normal_pdf(z); };
  const auto piece = [&](double lo, double hi, double t) {
    return hi > lo ? integrate_abs(integrand, lo, hi, t, 30) : 0.0;
  };
  if (v > a && v < b) return piece(a, v, 0.5 * tol) + piece(v, b, 0.5 * tol);
  return piece(a, b, tol);
}

PointCloud lexicographic_rows(const PointCloud& m) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
      if (m(a, k) != m(b, k)) return m(a, k) < m(b, k);
    }
    return false;
  });
  PointCloud out(m.rows(), m.cols());
  for (std::size_t i = 0; i < order.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(order[i]);
  return out;
}

void check_clouds(const PointCloud& x, const PointCloud& y, const char* who) {
  require(x.rows() >= 1, std::string(who) + ": need at least one point");
  require(x.rows() == y.rows(), std::string(who) + ": point counts differ");
  require(x.cols() == y.cols() && x.cols() >= 1, std::string(who) + ": dimensions differ");
  require(x.allFinite() && y.allFinite(), std::string(who) + ": points must be finite");
}

// Shortest augmenting path assignment (Kuhn–Munkres with potentials), O(n³).
// Returns row_of_col[j] for j in [0, n). Ties go to the lowest column index.
std::vector<int> solve_assignment(const std::vector<double>& cost, int n) {
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      const double* row = cost.data() + static_cast<std::size_t>(i0 - 1) * n;
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = row[j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_of_col(n);
  for (int j = 1; j <= n; ++j) row_of_col[j - 1] = match[j] - 1;
  return row_of_col;
}

}  // namespace

const char* to_string(TransportMethod method) noexcept {
  switch (method) {
    case TransportMethod::sorted_1d: return "sorted_1d";
    case TransportMethod::quantile_vs_normal: return "quantile_vs_normal";
    case TransportMethod::discrete_vs_normal: return "discrete_vs_normal";
    case TransportMethod::assignment: return "assignment";
    case TransportMethod::sinkhorn: return "sinkhorn";
  }
  return "unknown";
}

TransportResult wp_empirical_1d(std::span<const double> xs, std::span<const double> ys, double p) {
  check_p(p);
  require(!xs.empty(), "wp_empirical_1d: need at least one point");
  require(xs.size() == ys.size(), "wp_empirical_1d: sample sizes differ");
  const std::vector<double> a = sorted_copy(xs);
  const std::vector<double> b = sorted_copy(ys);
  double cost = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) cost += std::pow(std::fabs(a[i] - b[i]), p);
  return make_result(cost / static_cast<double>(a.size()), p, TransportMethod::sorted_1d);
}

TransportResult wp_sample_vs_normal(std::span<const double> xs, double p) {
  check_p(p);
  require(xs.size() >= 2, "wp_sample_vs_normal: need at least two points");
  const std::vector<double> a = sorted_copy(xs);
  const double n = static_cast<double>(a.size());
  double cost = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double z = normal_quantile((static_cast<double>(i) + 0.5) / n);
    cost += std::pow(std::fabs(a[i] - z), p);
  }
  return make_result(cost / n, p, TransportMethod::quantile_vs_normal);
}

TransportResult wp_discrete_vs_normal(std::span<const Atom> pmf, double p) {
  check_p(p);
  require(!pmf.empty(), "wp_discrete_vs_normal: empty pmf");
  std::vector<Atom> atoms(pmf.begin(), pmf.end());
  std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.value < b.value; });
  double total = 0.0;
  for (const Atom& a : atoms) {
    require(a.prob >= 0.0 && std::isfinite(a.value), "wp_discrete_vs_normal: invalid atom");
    total += a.prob;
  }
  require(std::fabs(total - 1.0) <= 1e-9, "wp_discrete_vs_normal: probabilities must sum to 1");

  // Plateau k occupies (cum_{k-1}, cum_k) in u; endpoints are mapped through Φ⁻¹
  // using whichever tail is smaller.
  const std::size_t k = atoms.size();
  std::vector<double> lower(k + 1, 0.0), upper(k + 1, 0.0);
  for (std::size_t i = 0; i < k; ++i) lower[i + 1] = lower[i] + atoms[i].prob;
  for (std::size_t i = k; i-- > 0;) upper[i] = upper[i + 1] + atoms[i].prob;
  const auto edge = [&](std::size_t i) {
    if (i == 0) return -kInf;
    if (i == k) return kInf;
    return lower[i] <= 0.5 ? normal_quantile(lower[i]) : -normal_quantile(upper[i]);
  };
  double cost = 0.0;
  double a = edge(0);
  for (std::size_t i = 0; i < k; ++i) {
    const double b = edge(i + 1);
    if (atoms[i].prob > 0.0) cost += plateau_cost(atoms[i].value, a, b, p, 1e-11 * atoms[i].prob);
    a = b;
  }
  return make_result(cost, p, TransportMethod::discrete_vs_normal);
}

namespace kernels {

std::vector<double> cost_matrix(const PointCloud& x, const PointCloud& y, double p, Exec exec) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto m = static_cast<std::size_t>(y.rows());
  const Eigen::Index d = x.cols();
  std::vector<double> cost(n * m);
  for_each_index(n, exec, [&](std::size_t i) {
    for (std::size_t j = 0; j < m; ++j) {
      double sq = 0.0;
      for (Eigen::Index k = 0; k < d; ++k) {
        const double diff = x(static_cast<Eigen::Index>(i), k) - y(static_cast<Eigen::Index>(j), k);
        sq += diff * diff;
      }
      cost[i * m + j] = p == 2.0 ? sq : std::pow(std::sqrt(sq), p);
    }
  });
  return cost;
}

void softmin_rows(std::span<const double> cost, std::size_t n, std::size_t m,
                  std::span<const double> pot, double epsilon, std::span<double> out, Exec exec) {
  for_each_index(n, exec, [&](std::size_t i) {
    const double* row = cost.data() + i * m;
    double hi = -kInf;
    for (std::size_t j = 0; j < m; ++j) hi = std::max(hi, (pot[j] - row[j]) / epsilon);
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += std::exp((pot[j] - row[j]) / epsilon - hi);
    out[i] = -epsilon * (hi + std::log(s));
  });
}

}  // namespace kernels

double mean_pairwise_cost(const PointCloud& x, const PointCloud& y, double p) {
  check_p(p);
  const std::vector<double> c = kernels::cost_matrix(x, y, p, Exec::serial);
  return std::accumulate(c.begin(), c.end(), 0.0) / static_cast<double>(c.size());
}

TransportResult wp_assignment(const PointCloud& x, const PointCloud& y, double p, Exec exec) {
  check_p(p);
  check_clouds(x, y, "wp_assignment");
  const auto n = static_cast<std::size_t>(x.rows());
  if (n > kAssignmentCap)
    throw SizingError("wp_assignment: " + std::to_string(n) + " points exceeds the cap of " +
                          std::to_string(kAssignmentCap),
                      n);
  const PointCloud xs = lexicographic_rows(x);
  const PointCloud ys = lexicographic_rows(y);
  const std::vector<double> cost = kernels::cost_matrix(xs, ys, p, exec);
  const std::vector<int> row_of_col = solve_assignment(cost, static_cast<int>(n));
  std::vector<double> matched(n);
  for (std::size_t j = 0; j < n; ++j)
    matched[j] = cost[static_cast<std::size_t>(row_of_col[j]) * n + j];
  std::sort(matched.begin(), matched.end());
  const double total = std::accumulate(matched.begin(), matched.end(), 0.0);
  return make_result(total / static_cast<double>(n), p, TransportMethod::assignment);
}

TransportResult wp_sinkhorn(const PointCloud& x, const PointCloud& y, double p, double epsilon,
                            int max_iter, Exec exec) {
  check_p(p);
  check_clouds(x, y, "wp_sinkhorn");
  require(epsilon > 0.0 && std::isfinite(epsilon), "wp_sinkhorn: epsilon must be positive");
  require(max_iter >= 1, "wp_sinkhorn: max_iter must be >= 1");
  constexpr double kTolerance = 1e-8;

  const auto n = static_cast<std::size_t>(x.rows());
  const std::vector<double> cost = kernels::cost_matrix(x, y, p, exec);

  std::vector<double> scratch = cost;
  std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(scratch.size() / 2),
                   scratch.end());
  double scale = scratch[scratch.size() / 2];
  if (!(scale > 0.0)) scale = std::accumulate(cost.begin(), cost.end(), 0.0) / static_cast<double>(cost.size());
  if (!(scale > 0.0)) scale = 1.0;

  std::vector<double> c_row(n * n), c_col(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      c_row[i * n + j] = cost[i * n + j] / scale;
      c_col[j * n + i] = c_row[i * n + j];
    }
  const double eps = epsilon / scale;
  const double log_mass = -std::log(static_cast<double>(n));

  std::vector<double> f(n, 0.0), g(n, 0.0), f_next(n), soft(n);
  int iter = 0;
  double violation = kInf;
  // One f/g sweep at regularization e; returns the L1 row-marginal error of
  // the plan (f, g) measured through the next f update.
  const auto sweep = [&](double e) {
    kernels::softmin_rows(c_col, n, n, f, e, soft, exec);
    for (std::size_t j = 0; j < n; ++j) g[j] = e * log_mass + soft[j];
    kernels::softmin_rows(c_row, n, n, g, e, soft, exec);
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      f_next[i] = e * log_mass + soft[i];
      v += std::fabs(std::exp(log_mass) * std::expm1((f[i] - f_next[i]) / e));
    }
    return v;
  };

  // Epsilon scaling: warm-start the potentials through a geometric ladder of
  // coarser problems, then iterate at the target to tolerance.
  std::vector<double> ladder;
  for (double e = 1.0; e > 4.0 * eps; e *= 0.25) ladder.push_back(e);
  kernels::softmin_rows(c_row, n, n, g, ladder.empty() ? eps : ladder.front(), soft, exec);
  for (std::size_t i = 0; i < n; ++i) f[i] = (ladder.empty() ? eps : ladder.front()) * log_mass + soft[i];
  for (double e : ladder) {
    for (int k = 0; k < 50 && iter < max_iter; ++k) {
      ++iter;
      const double v = sweep(e);
      f.swap(f_next);
      if (v <= 1e-3) break;
    }
  }
  while (iter < max_iter) {
    ++iter;
    violation = sweep(eps);
    if (violation <= kTolerance) break;
    f.swap(f_next);
  }

  // Round onto the transport polytope: shrink rows, shrink columns, then add
  // the rank-one correction err_r err_cᵀ / |err_r|₁.
  const double mass = 1.0 / static_cast<double>(n);
  std::vector<double> plan(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      plan[i * n + j] = std::exp((f[i] + g[j] - c_row[i * n + j]) / eps);
  for (std::size_t i = 0; i < n; ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < n; ++j) r += plan[i * n + j];
    if (r > mass)
      for (std::size_t j = 0; j < n; ++j) plan[i * n + j] *= mass / r;
  }
  std::vector<double> col(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) col[j] += plan[i * n + j];
  for (std::size_t j = 0; j < n; ++j)
    if (col[j] > mass)
      for (std::size_t i = 0; i < n; ++i) plan[i * n + j] *= mass / col[j];
  std::vector<double> err_r(n), err_c(n, mass);
  double err_mass = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      r += plan[i * n + j];
      err_c[j] -= plan[i * n + j];
    }
    err_r[i] = std::max(mass - r, 0.0);
    err_mass += err_r[i];
  }
  if (err_mass > 0.0)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) plan[i * n + j] += err_r[i] * std::max(err_c[j], 0.0) / err_mass;

  double total = 0.0;
  for (std::size_t k = 0; k < n * n; ++k) total += plan[k] * cost[k];
  TransportResult result = make_result(total, p, TransportMethod::sinkhorn);
  result.iterations = iter;
  result.marginal_violation = violation;
  result.converged = violation <= kTolerance;
  return result;
}

}  // namespace pwmd
