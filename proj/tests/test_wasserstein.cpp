#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "pwmd/error.hpp"
#include "pwmd/special.hpp"
#include "pwmd/wasserstein.hpp"

using namespace pwmd;

namespace {

constexpr double kPs[] = {1.0, 1.5, 2.0, 3.0, 4.0, 6.0};

std::vector<double> normal_draws(std::size_t n, std::uint64_t seed) {
  CounterRng rng(seed, 0);
  std::normal_distribution<double> normal;
  std::vector<double> v(n);
  for (double& x : v) x = normal(rng);
  return v;
}

PointCloud normal_cloud(Eigen::Index n, Eigen::Index d, std::uint64_t seed, double shift = 0.0) {
  CounterRng rng(seed, 0);
  std::normal_distribution<double> normal;
  PointCloud c(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < d; ++k) c(i, k) = normal(rng) + shift;
  return c;
}

std::vector<double> midpoint_quantiles(std::size_t n) {
  std::vector<double> q(n);
  for (std::size_t i = 0; i < n; ++i) q[i] = normal_quantile((static_cast<double>(i) + 0.5) / static_cast<double>(n));
  return q;
}

std::vector<Atom> quantile_lattice(std::size_t n) {
  std::vector<Atom> atoms;
  for (double q : midpoint_quantiles(n)) atoms.push_back({q, 1.0 / static_cast<double>(n)});
  return atoms;
}

}  // namespace

TEST_CASE("sorted coupling examples") {
  const std::vector<double> a{0.3, -1.2, 4.0};
  CHECK(wp_empirical_1d(a, a, 2.0).distance == 0.0);
  for (double p : kPs) CHECK(wp_empirical_1d(std::vector<double>{0, 1}, std::vector<double>{2, 3}, p).distance == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(wp_empirical_1d(std::vector<double>{2, 0}, std::vector<double>{3, 1}, 2.0).distance == doctest::Approx(1.0));
  CHECK_THROWS_AS(wp_empirical_1d(a, std::vector<double>{1.0}, 2.0), Error);
  CHECK_THROWS_AS(wp_empirical_1d(a, a, 0.5), Error);
}

TEST_CASE("sample against normal") {
  const auto q = midpoint_quantiles(1000);
  CHECK(wp_sample_vs_normal(q, 2.0).distance == 0.0);
  std::vector<double> shifted(q);
  for (double& x : shifted) x += 0.25;
  CHECK(std::fabs(wp_sample_vs_normal(shifted, 1.0).distance - 0.25) <= 1e-12);
  CHECK(wp_sample_vs_normal(normal_draws(100000, 3), 2.0).distance <= 0.02);
}

TEST_CASE("discrete law against normal") {
  const std::vector<Atom> zero{{0.0, 1.0}};
  CHECK(std::fabs(wp_discrete_vs_normal(zero, 1.0).distance - 0.79788456080286535588) <= 1e-9);
  const std::vector<Atom> rad{{-1.0, 0.5}, {1.0, 0.5}};
  CHECK(std::fabs(wp_discrete_vs_normal(rad, 2.0).distance - 0.63579153690047596311) <= 1e-9);
  CHECK(wp_discrete_vs_normal(quantile_lattice(10000), 2.0).distance <= 1e-2);
  CHECK_THROWS_AS(wp_discrete_vs_normal(std::vector<Atom>{}, 2.0), Error);
}

TEST_CASE("quantile lattice refinement decreases the distance") {
  double prev = 1e9;
  for (std::size_t n = 64; n <= 16384; n *= 2) {
    const double d = wp_discrete_vs_normal(quantile_lattice(n), 2.0).distance;
    CAPTURE(n);
    CHECK(d < prev);
    prev = d;
  }
}

TEST_CASE("assignment examples") {
  const PointCloud x = normal_cloud(60, 3, 5);
  CHECK(wp_assignment(x, x, 2.0).distance == 0.0);
  Eigen::RowVector3d v(0.3, -0.4, 1.2);
  PointCloud y = x;
  y.rowwise() += v;
  for (double p : kPs) CHECK(std::fabs(wp_assignment(x, y, p).distance - v.norm()) <= 1e-12);
  const PointCloud a = normal_cloud(200, 1, 8), b = normal_cloud(200, 1, 9, 0.3);
  const std::vector<double> av(a.data(), a.data() + 200), bv(b.data(), b.data() + 200);
  for (double p : kPs) CHECK(std::fabs(wp_assignment(a, b, p).distance - wp_empirical_1d(av, bv, p).distance) <= 1e-10);
  CHECK_THROWS_AS(wp_assignment(x, normal_cloud(59, 3, 1), 2.0), Error);
  const PointCloud big = normal_cloud(static_cast<Eigen::Index>(kAssignmentCap) + 1, 1, 1);
  CHECK_THROWS_AS(wp_assignment(big, big, 2.0), SizingError);
}

TEST_CASE("assignment is symmetric and permutation invariant") {
  const PointCloud x = normal_cloud(80, 2, 21), y = normal_cloud(80, 2, 22, 0.5);
  const double base = wp_assignment(x, y, 2.0).distance;
  CHECK(wp_assignment(y, x, 2.0).distance == base);
  std::vector<int> order(80);
  for (int i = 0; i < 80; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), std::mt19937(4));
  PointCloud xs(80, 2);
  for (int i = 0; i < 80; ++i) xs.row(i) = x.row(order[i]);
  CHECK(wp_assignment(xs, y, 2.0).distance == base);
  CHECK(wp_assignment(x, y, 2.0, Exec::serial).distance == base);
}

TEST_CASE("sinkhorn bounds the exact cost from above") {
  const PointCloud x = normal_cloud(128, 2, 31), y = normal_cloud(128, 2, 32, 0.4);
  for (double p : {1.0, 2.0}) {
    const double exact = wp_assignment(x, y, p).distance;
    const double eps = 0.01 * mean_pairwise_cost(x, y, p);
    const TransportResult s = wp_sinkhorn(x, y, p, eps, 5000);
    CAPTURE(p);
    CHECK(s.distance >= exact - 1e-9);
    CHECK(s.distance <= 1.05 * exact);
    CHECK(s.iterations > 0);
  }
  const PointCloud small = normal_cloud(32, 2, 33);
  double prev = 1e9;
  for (double eps : {1e-1, 1e-2, 1e-3}) {
    const double d = wp_sinkhorn(small, small, 2.0, eps, 3000).distance;
    CHECK(d <= prev + 1e-12);
    prev = d;
  }
  CHECK(prev <= 0.05);
}

TEST_CASE("sinkhorn is reproducible across execution policies") {
  const PointCloud x = normal_cloud(64, 3, 41), y = normal_cloud(64, 3, 42);
  const TransportResult a = wp_sinkhorn(x, y, 2.0, 0.05, 500, Exec::serial);
  const TransportResult b = wp_sinkhorn(x, y, 2.0, 0.05, 500, Exec::parallel);
  CHECK(a.distance == b.distance);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("distance is nondecreasing in p") {
  const std::vector<double> a = normal_draws(300, 51), b = normal_draws(300, 52);
  const PointCloud x = normal_cloud(50, 2, 53), y = normal_cloud(50, 2, 54, 0.2);
  const std::vector<Atom> law{{-1.0, 0.3}, {0.5, 0.6}, {2.0, 0.1}};
  double prev[5] = {0, 0, 0, 0, 0};
  for (double p : kPs) {
    const double cur[5] = {
        wp_empirical_1d(a, b, p).distance,
        wp_sample_vs_normal(a, p).distance,
        wp_discrete_vs_normal(law, p).distance,
        wp_assignment(x, y, p).distance,
        wp_sinkhorn(x, y, p, 1e-2 * mean_pairwise_cost(x, y, p), 3000).distance,
    };
    for (int k = 0; k < 4; ++k) {
      CAPTURE(k);
      CAPTURE(p);
      CHECK(cur[k] >= prev[k] - 1e-12);
    }
    // the sinkhorn plan is only near optimal; compare against the exact prior order
    CHECK(cur[4] >= prev[3] - 1e-9);
    for (int k = 0; k < 5; ++k) prev[k] = cur[k];
  }
}

TEST_CASE("symmetry and triangle inequality on the line") {
  for (int rep = 0; rep < 20; ++rep) {
    const auto a = normal_draws(50, 100 + rep), b = normal_draws(50, 200 + rep), c = normal_draws(50, 300 + rep);
    for (double p : kPs) {
      CHECK(wp_empirical_1d(a, b, p).distance == wp_empirical_1d(b, a, p).distance);
      CHECK(wp_empirical_1d(a, c, p).distance <=
            wp_empirical_1d(a, b, p).distance + wp_empirical_1d(b, c, p).distance + 1e-10);
    }
  }
}

TEST_CASE("cost matrix kernel matches serial reference") {
  const PointCloud x = normal_cloud(33, 4, 61), y = normal_cloud(33, 4, 62);
  CHECK(kernels::cost_matrix(x, y, 1.5, Exec::serial) == kernels::cost_matrix(x, y, 1.5, Exec::parallel));
}
