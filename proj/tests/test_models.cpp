#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "pwmd/error.hpp"
#include "pwmd/models.hpp"
#include "test_util.hpp"

using namespace pwmd;
using pwmd::testing::ks_statistic;
using pwmd::testing::mean_se;

namespace {

CombClt deterministic_comb(const Eigen::MatrixXd& c) {
  CombClt m;
  m.c = c;
  m.sigma2 = Eigen::MatrixXd::Zero(c.rows(), c.cols());
  return m;
}

// Var(Σ c_{iπ(i)}) over all n! permutations.
double enumerated_comb_variance(const Eigen::MatrixXd& c, double* mean_out = nullptr) {
  const int n = static_cast<int>(c.rows());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double s1 = 0.0, s2 = 0.0, count = 0.0;
  do {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += c(i, perm[i]);
    s1 += s;
    s2 += s * s;
    count += 1.0;
  } while (std::next_permutation(perm.begin(), perm.end()));
  if (mean_out) *mean_out = s1 / count;
  return s2 / count - (s1 / count) * (s1 / count);
}

HomSum random_homsum(int q, int n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  std::vector<TensorEntry> entries;
  std::vector<int> idx(q);
  std::vector<bool> mask(n, false);
  std::fill(mask.begin(), mask.begin() + q, true);
  do {
    idx.clear();
    for (int i = 0; i < n; ++i)
      if (mask[i]) idx.push_back(i);
    entries.push_back({idx, normal(gen)});
  } while (std::prev_permutation(mask.begin(), mask.end()));
  double s = 0.0;
  for (const auto& e : entries) s += e.value * e.value;
  double qf = 1.0;
  for (int k = 2; k <= q; ++k) qf *= k;
  for (auto& e : entries) e.value /= qf * std::sqrt(s);
  return HomSum::from_entries(q, n, std::move(entries), DistSpec::rademacher());
}

std::vector<int> brute_theta2(const DependencyStats& st) {
  const int n = static_cast<int>(st.neighborhoods.size());
  int best = 0;
  for (int i = 0; i < n; ++i) {
    for (int j : st.neighborhoods[i]) {
      std::set<int> aij(st.neighborhoods[i].begin(), st.neighborhoods[i].end());
      aij.insert(st.neighborhoods[j].begin(), st.neighborhoods[j].end());
      int b = 0;
      for (int k = 0; k < n; ++k)
        for (int l : st.neighborhoods[k]) b += (aij.count(k) || aij.count(l)) ? 1 : 0;
      best = std::max(best, b);
    }
  }
  return {best};
}

void check_groups_independent(const DependencyStats& st) {
  for (const auto& g : st.groups)
    for (std::size_t a = 0; a < g.size(); ++a)
      for (std::size_t b = a + 1; b < g.size(); ++b) {
        const auto& nb = st.neighborhoods[g[a]];
        REQUIRE(!std::binary_search(nb.begin(), nb.end(), g[b]));
      }
}

}  // namespace

TEST_CASE("single rademacher summand") {
  const Sample s = sample_w(IidSum{1, DistSpec::rademacher()}, 100000, 1);
  int plus = 0;
  for (double w : s.column()) {
    REQUIRE((w == 1.0 || w == -1.0));
    plus += w > 0.0;
  }
  CHECK(std::fabs(plus / 1e5 - 0.5) <= 4.0 * 0.5 / std::sqrt(1e5));
}

TEST_CASE("two by two permutation array") {
  Eigen::MatrixXd c(2, 2);
  c << 1, -1, -1, 1;
  CHECK(comb_variance(c, Eigen::MatrixXd::Zero(2, 2)) == 4.0);
  CHECK(enumerated_comb_variance(c) == 4.0);
  const Sample s = sample_w(deterministic_comb(c), 10000, 2);
  int plus = 0;
  for (double w : s.column()) {
    REQUIRE(std::fabs(std::fabs(w) - 1.0) <= 1e-15);
    plus += w > 0.0;
  }
  CHECK(std::fabs(plus / 1e4 - 0.5) <= 0.02);
  CHECK_THROWS_AS(sample_w(deterministic_comb(Eigen::MatrixXd::Zero(3, 3)), 10, 1), Error);
  try {
    sample_w(deterministic_comb(Eigen::MatrixXd::Zero(3, 3)), 10, 1);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::degenerate);
  }
}

TEST_CASE("comb variance formula") {
  CHECK(comb_variance(Eigen::MatrixXd::Zero(5, 5), Eigen::MatrixXd::Ones(5, 5)) == doctest::Approx(5.0));
  Eigen::MatrixXd bad(2, 2);
  bad << 1, 0, 0, 1;
  CHECK_THROWS_AS(comb_variance(bad, Eigen::MatrixXd::Zero(2, 2)), Error);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 2 + rep % 6;
    const Eigen::MatrixXd c = random_centered_matrix(n, 1000 + rep);
    double mean = 0.0;
    const double var = enumerated_comb_variance(c, &mean);
    CAPTURE(n);
    CHECK(std::fabs(comb_variance(c, Eigen::MatrixXd::Zero(n, n)) - var) <= 1e-12 * std::max(1.0, var));
    CHECK(std::fabs(mean) <= 1e-12);
  }
}

TEST_CASE("maximal influence") {
  for (int n : {2, 4, 10, 30}) {
    const HomSum h = HomSum::perfect_matching(n, DistSpec::rademacher());
    CHECK(maximal_influence(h) == doctest::Approx(1.0 / (2.0 * n)).epsilon(1e-14));
  }
  const HomSum two = HomSum::from_entries(2, 2, {{{1, 0}, 1.0 / std::sqrt(2.0)}}, DistSpec::rademacher());
  CHECK(maximal_influence(two) == doctest::Approx(0.5));
  for (int q : {2, 3, 4}) {
    double qf = 1.0;
    for (int k = 2; k <= q; ++k) qf *= k;
    for (int rep = 0; rep < 5; ++rep) CHECK(maximal_influence(random_homsum(q, 7, 50 + rep)) <= 1.0 / qf + 1e-15);
  }
  CHECK_THROWS_AS(HomSum::from_entries(2, 4, {{{1, 1}, 1.0}}, DistSpec::rademacher()), Error);
  CHECK_THROWS_AS(validate(HomSum::from_entries(2, 4, {{{0, 1}, 1.0}}, DistSpec::rademacher())), Error);
}

TEST_CASE("contraction for q = 2") {
  for (int n : {2, 5, 16}) {
    const Eigen::MatrixXd f = Eigen::MatrixXd::Identity(n, n) / std::sqrt(2.0 * n);
    const ContractionQ2 c = contraction_q2(f);
    CHECK(c.op_norm_f2 == doctest::Approx(1.0 / (2.0 * n)).epsilon(1e-12));
    CHECK(c.hs_norm_f2 == doctest::Approx(1.0 / (2.0 * std::sqrt(n))).epsilon(1e-12));
  }
  const ContractionQ2 z = contraction_q2(Eigen::MatrixXd::Zero(4, 4));
  CHECK(z.op_norm_f == 0.0);
  CHECK(z.hs_norm_f == 0.0);
  CHECK(z.op_norm_f2 == 0.0);
  CHECK(z.hs_norm_f2 == 0.0);
  for (int rep = 0; rep < 10; ++rep) {
    const GaussChaos2 g = GaussChaos2::random(3 + rep, 70 + rep);
    const ContractionQ2 c = contraction_q2(g.f);
    CHECK(c.hs_norm_f2 <= c.op_norm_f * c.hs_norm_f * (1.0 + 1e-10));
    CHECK(c.op_norm_f2 <= c.hs_norm_f2 * (1.0 + 1e-12));
  }
  Eigen::MatrixXd ns = Eigen::MatrixXd::Zero(3, 3);
  ns(0, 1) = 1.0;
  CHECK_THROWS_AS(contraction_q2(ns), Error);
}

TEST_CASE("fourth cumulant") {
  for (int n : {2, 4, 8}) {
    const FourthCumulant k = fourth_cumulant(GaussChaos2::perfect_matching(n), 0, 0);
    CHECK(k.exact);
    // a normalized sum of n/2 products of independent normals
    CHECK(k.kappa4 == doctest::Approx(12.0 / n).epsilon(1e-13));
  }
  const GaussChaos2 g = GaussChaos2::random(6, 5);
  const FourthCumulant exact = fourth_cumulant(g, 0, 0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g.f);
  CHECK(exact.kappa4 == doctest::Approx(48.0 * eig.eigenvalues().array().pow(4).sum()).epsilon(1e-12));
  const FourthCumulant mc = fourth_cumulant_mc(g, 400000, 6);
  CHECK(std::fabs(mc.kappa4 - exact.kappa4) <= 3.0 * mc.se);

  for (int n : {4, 8, 12}) {
    const FourthCumulant h = fourth_cumulant(HomSum::perfect_matching(n, DistSpec::rademacher()), 0, 0);
    CHECK(h.exact);
    // a normalized sum of n/2 rademachers
    CHECK(h.kappa4 == doctest::Approx(-4.0 / n).epsilon(1e-12));
  }
  const FourthCumulant normal = fourth_cumulant(IidSum{5, DistSpec::gaussian()}, 200000, 9);
  CHECK(!normal.exact);
  CHECK(std::fabs(normal.kappa4) <= 3.0 * normal.se);
}

TEST_CASE("dependency statistics") {
  const DependencyStats indep = dependency_stats(MDep{10, 0, {1.0}, DistSpec::rademacher()});
  CHECK(indep.theta1 == 1);
  CHECK(indep.theta2 == 1);
  CHECK(indep.group_count == 1);
  for (int m : {1, 2, 3}) {
    const DependencyStats st = dependency_stats(MDep{30, m, std::vector<double>(m + 1, 1.0), DistSpec::rademacher()});
    CHECK(st.theta1 == 2 * m + 1);
    CHECK(st.group_count == m + 1);
    CHECK(st.theta2 == brute_theta2(st)[0]);
    check_groups_independent(st);
  }
  GraphDep g{12, {}, DistSpec::rademacher()};
  std::mt19937 gen(3);
  std::set<std::pair<int, int>> edges;
  while (edges.size() < 20) {
    int a = static_cast<int>(gen() % 12), b = static_cast<int>(gen() % 12);
    if (a == b) continue;
    edges.insert({std::min(a, b), std::max(a, b)});
  }
  g.edges.assign(edges.begin(), edges.end());
  const DependencyStats st = dependency_stats(g);
  int max_deg = 0;
  for (const auto& nb : st.neighborhoods) max_deg = std::max<int>(max_deg, static_cast<int>(nb.size()) - 1);
  CHECK(st.group_count <= max_deg + 1);
  CHECK(st.theta1 == max_deg + 1);
  CHECK(st.theta2 == brute_theta2(st)[0]);
  check_groups_independent(st);
  CHECK_THROWS_AS(dependency_stats(IidSum{3, DistSpec::rademacher()}), Error);
}

TEST_CASE("exact certificates") {
  const IidSum lat{6, DistSpec::lattice({{-1.0, 0.25}, {0.0, 0.25}, {0.5, 0.5}})};
  const Certificate a = exact_pair_conditionals(lat, 2.0);
  CHECK(a.exact);
  CHECK(a.lambda == doctest::Approx(1.0 / 6.0));
  CHECK(a.states.size() == 729);
  double total = 0.0;
  for (const auto& s : a.states) {
    REQUIRE(std::fabs(s.r) <= 1e-12);
    REQUIRE(std::fabs(s.mean_d + a.lambda * (s.w + s.r)) <= 1e-12);
    total += s.prob;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(a.norm_R_p <= 1e-12);

  Eigen::MatrixXd c(3, 3);
  c << 2, -1, -1, -1, 2, -1, -1, -1, 2;
  const Certificate b = exact_pair_conditionals(deterministic_comb(c), 4.0);
  CHECK(b.lambda == 1.0);
  CHECK(b.states.size() == 6);
  double mean = 0.0, var = 0.0;
  for (const auto& s : b.states) {
    // R = -(1/n)·ΣY, which vanishes for a centered array
    REQUIRE(std::fabs(s.r) <= 1e-12);
    REQUIRE(std::fabs(s.mean_d + b.lambda * (s.w + s.r)) <= 1e-12);
    mean += s.prob * s.w;
    var += s.prob * s.w * s.w;
  }
  CHECK(std::fabs(mean) <= 1e-12);
  CHECK(std::fabs(var - 1.0) <= 1e-12);

  for (int n : {4, 6}) {
    const Certificate h = exact_pair_conditionals(HomSum::perfect_matching(n, DistSpec::rademacher()), 2.0);
    CHECK(h.lambda == doctest::Approx(2.0 / n));
    for (const auto& s : h.states) REQUIRE(std::fabs(s.r) <= 1e-12);
  }
  const Certificate h3 = exact_pair_conditionals(random_homsum(3, 7, 4), 3.0);
  CHECK(h3.lambda == doctest::Approx(3.0 / 7.0));
  for (const auto& s : h3.states) REQUIRE(std::fabs(s.mean_d + h3.lambda * s.w) <= 1e-12);
}

TEST_CASE("certificate norms ignore state order") {
  Certificate cert = exact_pair_conditionals(random_homsum(2, 8, 12), 3.0);
  const Certificate ref = cert;
  std::shuffle(cert.states.begin(), cert.states.end(), std::mt19937(1));
  const Certificate again = certificate_at(cert, 3.0);
  CHECK(again.norm_R_p == ref.norm_R_p);
  CHECK(again.norm_E_p == ref.norm_E_p);
  CHECK(again.norm_D4_p == ref.norm_D4_p);
  const Certificate repeat = exact_pair_conditionals(random_homsum(2, 8, 12), 3.0);
  CHECK(repeat.norm_E_p == ref.norm_E_p);
  CHECK(certificate_at(ref, 2.0).norm_E_p <= ref.norm_E_p + 1e-15);
}

TEST_CASE("certificate capability and sizing errors") {
  try {
    exact_pair_conditionals(IidSum{13, DistSpec::rademacher()}, 2.0);
    FAIL("expected a sizing error");
  } catch (const SizingError& e) {
    CHECK(e.cardinality() == 8192);
  }
  try {
    exact_pair_conditionals(deterministic_comb(random_centered_matrix(8, 1)), 2.0);
    FAIL("expected a sizing error");
  } catch (const SizingError& e) {
    CHECK(e.cardinality() == 40320);
  }
  CHECK_THROWS_AS(exact_pair_conditionals(HomSum::perfect_matching(18, DistSpec::rademacher()), 2.0), SizingError);
  CHECK_THROWS_AS(exact_pair_conditionals(IidSum{3, DistSpec::gaussian()}, 2.0), Error);
  CHECK_THROWS_AS(exact_pair_conditionals(GaussChaos2::perfect_matching(4), 2.0), Error);
  CHECK_THROWS_AS(draw_pair(MDep{}, 1), Error);
}

TEST_CASE("pair increments") {
  const IidSum m{9, DistSpec::laplace_unit_var()};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const PairDraw pd = draw_pair(m, seed);
    REQUIRE(pd.d_increment[0] == pd.w_prime[0] - pd.w[0]);
    REQUIRE(pd.index_i >= 0);
    REQUIRE(pd.index_i < 9);
    CHECK(pd.d_increment[0] == doctest::Approx((pd.new_value - pd.old_value) / 3.0).epsilon(1e-12));
  }
  Eigen::MatrixXd c = random_centered_matrix(5, 3);
  const PairDraw cp = draw_pair(deterministic_comb(c), 4);
  CHECK(cp.index_i != cp.index_j);
  const PairDraw mp = draw_pair(MultiIid{4, 3, DistSpec::rademacher()}, 2);
  CHECK(mp.w.size() == 3);
  for (int k = 0; k < 3; ++k) CHECK(mp.d_increment[k] == mp.w_prime[k] - mp.w[k]);
}

TEST_CASE("pairs satisfy linearity in mean and are exchangeable") {
  CombClt noisy = deterministic_comb(random_centered_matrix(6, 8));
  noisy.sigma2 = Eigen::MatrixXd::Constant(6, 6, 0.5);
  const std::vector<std::pair<Model, double>> cases = {
      {IidSum{10, DistSpec::centered_exponential(1.0)}, 0.1},
      {noisy, 2.0 / 5.0},
      {HomSum::perfect_matching(8, DistSpec::rademacher()), 2.0 / 8.0},
      {random_homsum(3, 6, 2), 3.0 / 6.0},
  };
  for (const auto& [model, lambda] : cases) {
    CAPTURE(model_tag(model));
    const auto pairs = draw_pairs(model, 1000000, 17);
    std::vector<double> combo(pairs.size());
    for (std::size_t k = 0; k < pairs.size(); ++k) combo[k] = pairs[k].d_increment[0] + lambda * pairs[k].w[0];
    const auto ms = mean_se(combo);
    CHECK(std::fabs(ms.mean) <= 4.0 * ms.se);

    const std::size_t reps = 100000;
    std::vector<double> fwd(reps), bwd(reps);
    for (std::size_t k = 0; k < reps; ++k) {
      fwd[k] = pairs[k].w[0] + 2.0 * pairs[k].w_prime[0];
      bwd[k] = pairs[reps + k].w_prime[0] + 2.0 * pairs[reps + k].w[0];
    }
    CHECK(ks_statistic(fwd, bwd) <= 1.63 * std::sqrt(2.0 / reps));
  }
}

TEST_CASE("gaussian chaos has unit variance") {
  const Sample s = sample_w(GaussChaos2::random(8, 3), 1000000, 21);
  const auto w = s.column();
  std::vector<double> sq(w.size());
  for (std::size_t k = 0; k < w.size(); ++k) sq[k] = w[k] * w[k];
  const auto ms = mean_se(sq);
  CHECK(std::fabs(ms.mean - 1.0) <= 4.0 * ms.se);
}

TEST_CASE("models have unit variance") {
  const std::vector<Model> models = {
      IidSum{7, DistSpec::uniform_centered(2.0)},
      MDep{40, 2, {1.0, -0.5, 2.0}, DistSpec::laplace_unit_var()},
      GraphDep{20, {{0, 1}, {1, 2}, {5, 9}, {9, 3}}, DistSpec::centered_exponential(2.0)},
      HomSum::perfect_matching(6, DistSpec::laplace_unit_var()),
  };
  for (const Model& m : models) {
    CAPTURE(model_tag(m));
    const auto w = sample_w(m, 200000, 4).column();
    std::vector<double> sq(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) sq[k] = w[k] * w[k];
    const auto ms = mean_se(sq);
    CHECK(std::fabs(ms.mean - 1.0) <= 4.0 * ms.se);
    CHECK(std::fabs(mean_se(w).mean) <= 4.0 * mean_se(w).se);
  }
}

TEST_CASE("sampling is reproducible across execution policies") {
  const std::vector<Model> models = {
      IidSum{50, DistSpec::laplace_unit_var()}, MultiIid{5, 3, DistSpec::rademacher()},
      deterministic_comb(random_centered_matrix(6, 1)), GaussChaos2::random(5, 2),
      MDep{20, 1, {1.0, 1.0}, DistSpec::gaussian()}};
  for (const Model& m : models) {
    const Sample a = sample_w(m, 20000, 5, Exec::serial);
    const Sample b = sample_w(m, 20000, 5, Exec::parallel);
    CHECK(a.data == b.data);
  }
}

TEST_CASE("closed-form sums match per-summand sums in law") {
  for (const DistSpec& d : {DistSpec::rademacher(), DistSpec::laplace_unit_var(), DistSpec::centered_exponential(1.5),
                            DistSpec::gaussian()}) {
    CAPTURE(d.name());
    const IidSum m{30, d};
    const auto fast = sample_w(m, 50000, 1, Exec::parallel, SumStrategy::closed_form).column();
    const auto slow = sample_w(m, 50000, 2, Exec::parallel, SumStrategy::per_summand).column();
    CHECK(ks_statistic(fast, slow) <= 1.63 * std::sqrt(2.0 / 50000.0));
  }
  for (double theta : {0.3, -0.6}) {
    for (const DistSpec& d : {DistSpec::rademacher(), DistSpec::laplace_unit_var(), DistSpec::centered_exponential(1.0)}) {
      CAPTURE(d.name());
      std::vector<double> fast(40000), slow(40000);
      for (std::size_t k = 0; k < fast.size(); ++k) {
        CounterRng r1(10, k), r2(11, k);
        fast[k] = draw_iid_sum(d, 12, theta, r1, SumStrategy::closed_form);
        slow[k] = draw_iid_sum(d, 12, theta, r2, SumStrategy::per_summand);
      }
      CHECK(ks_statistic(fast, slow) <= 1.63 * std::sqrt(2.0 / 40000.0));
      CHECK(mean_se(fast).mean == doctest::Approx(12.0 * d.log_mgf_derivative(theta)).epsilon(0.05));
    }
  }
}
