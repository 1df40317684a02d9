#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "pwmd/bounds.hpp"
#include "pwmd/error.hpp"
#include "pwmd/special.hpp"

using namespace pwmd;

namespace {

BoundProfile single(double alpha, double delta, double p0) { return {1.0, {{alpha, delta}}, p0}; }

bool has(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

ErrorKind kind_of(auto&& call) {
  try {
    call();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::validation;
}

}  // namespace

TEST_CASE("t4 shape examples") {
  const BoundProfile prof = single(1.0, 0.01, 1e6);
  const BoundReport at0 = t4_translate(prof, 0.0);
  CHECK(at0.shape == doctest::Approx(0.0560517).epsilon(1e-6 / 0.0560517));
  CHECK(std::abs(at0.shape - 0.0560517) <= 1e-6);
  CHECK(at0.feasible);
  CHECK(at0.constants_normalized);
  const BoundReport at2 = t4_translate(prof, 2.0);
  CHECK(std::abs(at2.shape - 0.288155) <= 1e-6);
  CHECK(at2.intermediates.at("p") == doctest::Approx(std::log(100.0) + 2.0));
  CHECK(at2.intermediates.at("epsilon") ==
        doctest::Approx(std::exp(1.0) * (std::log(100.0) + 2.0) * 0.01));
}

TEST_CASE("t4 range conditions fire at their thresholds") {
  const BoundProfile prof = single(1.0, 0.01, 1e6);
  const double cap = std::pow(0.01, -1.0 / 3.0);
  CHECK(t4_translate(prof, cap).feasible);
  const BoundReport beyond = t4_translate(prof, std::nextafter(cap, 10.0));
  CHECK_FALSE(beyond.feasible);
  CHECK(has(beyond.violated_conditions, "x exceeds Δ^{−1/(2α+1)}"));
  CHECK(beyond.range_max_x == cap);

  const BoundProfile small_p0 = single(1.0, 0.01, 10.0);
  CHECK(t4_translate(small_p0, std::sqrt(10.0)).feasible);
  CHECK(has(t4_translate(small_p0, std::nextafter(std::sqrt(10.0), 10.0)).violated_conditions,
            "x exceeds sqrt(p0)"));

  const double edge = 2.0 * std::abs(std::log(0.01));
  CHECK(t4_translate(single(1.0, 0.01, edge), 0.0).feasible);
  CHECK(has(t4_translate(single(1.0, 0.01, std::nextafter(edge, 0.0)), 0.0).violated_conditions,
            "|log Δ̄| exceeds p0/2"));

  const BoundReport big = t4_translate(single(1.0, 0.5, 10.0), 0.5);
  CHECK(has(big.flags, "x ≤ e regime"));
  CHECK(big.feasible);
  CHECK(t4_translate(single(1.0, 0.3, 10.0), 0.5).flags.empty());

  // Several terms: the tightest cap governs.
  const BoundProfile two{1.0, {{1.0, 0.01}, {2.0, 0.001}}, 1e6};
  const double cap2 = std::min(std::pow(0.01, -1.0 / 3.0), std::pow(0.001, -1.0 / 5.0));
  CHECK(t4_translate(two, cap2).feasible);
  CHECK_FALSE(t4_translate(two, std::nextafter(cap2, 10.0)).feasible);

  CHECK_THROWS_AS(t4_translate(BoundProfile{1.0, {}, 1e6}, 0.0), Error);
  CHECK_THROWS_AS(t4_translate(single(1.0, 0.01, 0.5), 0.0), Error);
}

TEST_CASE("t4 shape is monotone in x and in each delta") {
  for (double alpha : {0.0, 0.5, 1.0, 2.0}) {
    for (double delta : {1e-6, 1e-3, 0.05, 0.3}) {
      double prev = -1.0;
      for (double x = 0.0; x <= 20.0; x += 0.05) {
        const double s = t4_translate({1.0, {{alpha, delta}, {1.0, 1e-4}}, 1e3}, x).shape;
        CHECK(s >= prev);
        prev = s;
      }
    }
  }
  // δ(|log δ| + x²)^α increases in δ while |log δ| + x² ≥ α.
  for (double alpha : {0.0, 0.5, 1.0, 2.0}) {
    for (double x : {0.0, 1.0, 3.0}) {
      double prev = -1.0;
      for (double delta = 1e-12; delta <= std::exp(-alpha); delta *= 1.1) {
        const double s = t4_translate(single(alpha, delta, 1e3), x).shape;
        CHECK(s >= prev);
        prev = s;
      }
    }
  }
}

TEST_CASE("t4 epsilon scales like the range exponent") {
  for (double alpha : {0.5, 1.0, 2.0}) {
    for (double delta : {1e-2, 1e-4, 1e-6, 1e-8}) {
      const BoundProfile prof = single(alpha, delta, 1e6);
      const double scale = std::pow(delta, 1.0 / (2.0 * alpha + 1.0));
      const double xmax = t4_translate(prof, 0.0).range_max_x;
      double fitted = 0.0;
      for (int k = 0; k <= 200; ++k) {
        const BoundReport r = t4_translate(prof, xmax * k / 200.0);
        REQUIRE(r.feasible);
        fitted = std::max(fitted, r.intermediates.at("epsilon") / scale);
      }
      // Constant fitted per profile stays bounded across six decades of Δ.
      CHECK(fitted <= 2.0 * std::exp(1.0));
    }
  }
}

TEST_CASE("multivariate shape") {
  const BoundReport r = multiMD_translate(1.0, 1.0, 0.02, 1e6, 4, 0.0);
  CHECK(std::abs(r.shape - 0.189144) <= 1e-6);
  CHECK(r.feasible);
  CHECK(r.intermediates.at("B1_product") == doctest::Approx(4.0 * 4.0 * std::log(4.0) * 0.02));
  CHECK(r.intermediates.at("B2_product") == doctest::Approx(4.0 * 0.02 * std::abs(std::log(0.02))));

  CHECK(multiMD_translate(1.0, 1.0, 0.02, 1e6, 2, 0.0).intermediates.at("log_kappa") == 0.0);
  for (int d : {2, 3, 8}) {
    const BoundReport unit = multiMD_translate(1.0, 1.0, 1.0, 1e6, d, 0.0);
    CHECK(unit.shape == doctest::Approx(d * std::log(double(d))).epsilon(1e-15));
    CHECK(unit.feasible);
  }
  for (double x : {0.0, 0.7, 2.5}) CHECK(multiMD_translate(1.0, 0.0, 0.03, 1e6, 2, x).shape == (1.0 + x) * 0.03);

  const double edge = 4.0 * std::abs(std::log(0.02));
  CHECK(multiMD_translate(1.0, 1.0, 0.02, edge, 2, 0.0).feasible);
  CHECK(has(multiMD_translate(1.0, 1.0, 0.02, std::nextafter(edge, 0.0), 2, 0.0).violated_conditions,
            "|log Δ| exceeds p0/4"));
  const double kappa_edge = 4.0 * log_chi_kappa(16);
  CHECK(multiMD_translate(1.0, 1.0, 1e-5, kappa_edge, 16, 0.0).feasible);
  const BoundReport kappa = multiMD_translate(1.0, 1.0, 1e-5, std::nextafter(kappa_edge, 0.0), 16, 0.0);
  CHECK(kappa.violated_conditions == std::vector<std::string>{"log κ(d) exceeds p0/4"});
  const double cap = std::pow(0.02, -1.0 / 3.0);
  CHECK(multiMD_translate(1.0, 1.0, 0.02, 1e6, 4, cap).feasible);
  CHECK(has(multiMD_translate(1.0, 1.0, 0.02, 1e6, 4, std::nextafter(cap, 10.0)).violated_conditions,
            "x exceeds Δ^{−1/(2α+1)}"));
  CHECK(has(multiMD_translate(1.0, 1.0, 0.02, 12.0, 4, std::nextafter(std::sqrt(12.0), 10.0)).violated_conditions,
            "x exceeds sqrt(p0)"));
  CHECK_THROWS_AS(multiMD_translate(1.0, 1.0, 0.02, 1e6, 1, 0.0), Error);
}

TEST_CASE("certificate bound") {
  Certificate synthetic;
  synthetic.lambda = 0.25;
  synthetic.p = 3.0;
  synthetic.norm_D4_p = 0.25 * 1.5 * 1.5;
  CHECK(certificate_bound(synthetic, 3.0).shape == doctest::Approx(3.0 * 1.5).epsilon(1e-15));
  CHECK_THROWS_AS(certificate_bound(synthetic, 0.5), Error);

  // W = Σε/2: R = 0, E[D²|ε] = 1/2 = 2λ so E = 0, E[D⁴|ε] = 1/2.
  const Certificate rad = exact_pair_conditionals(IidSum{4, DistSpec::rademacher()}, 2.0);
  const BoundReport r = certificate_bound(rad, 2.0);
  CHECK(r.shape == doctest::Approx(2.0 * std::sqrt(0.5 / 0.25)).epsilon(1e-14));
  CHECK(r.intermediates.at("R_term") <= 1e-15);
  CHECK(r.intermediates.at("E_term") <= 1e-14);

  Eigen::MatrixXd c = random_centered_matrix(5, 3);
  const Certificate comb = exact_pair_conditionals(CombClt{c, Eigen::MatrixXd::Zero(5, 5)}, 1.0);
  const Certificate skew = exact_pair_conditionals(
      IidSum{5, DistSpec::lattice({{-1.0, 2.0 / 3.0}, {2.0, 1.0 / 3.0}})}, 1.0);
  for (const Certificate* cert : {&rad, &comb, &skew}) {
    double prev = 0.0;
    for (double p : {1.0, 2.0, 4.0, 8.0}) {
      const double s = certificate_bound(*cert, p).shape;
      CHECK(s >= prev);
      prev = s;
    }
  }

  Certificate shuffled = comb;
  std::mt19937_64 gen(5);
  std::shuffle(shuffled.states.begin(), shuffled.states.end(), gen);
  CHECK(certificate_bound(shuffled, 3.0).shape == certificate_bound(comb, 3.0).shape);
}

TEST_CASE("application deltas") {
  const AppDelta chi = app_delta(Application::chi, {{"d", 16}, {"b", 1}, {"n", 1e4}});
  CHECK(chi.delta == doctest::Approx(0.02).epsilon(1e-15));
  CHECK(chi.range_max_x == doctest::Approx(std::pow(0.02, -1.0 / 3.0)));
  CHECK(chi.smallness_lhs == doctest::Approx(256.0 * std::log(16.0) * 0.02));
  CHECK_FALSE(chi.feasible);

  const double n = 50, b = 1.3;
  const double bn2 = comb_variance(Eigen::MatrixXd::Zero(50, 50), Eigen::MatrixXd::Ones(50, 50));
  CHECK(bn2 == doctest::Approx(n));
  const AppDelta comb = app_delta(Application::comb, {{"n", n}, {"b", b}, {"B_n2", bn2}});
  const AppDelta iid = app_delta(Application::iid, {{"n", n}, {"b", b}});
  CHECK(comb.delta == doctest::Approx(iid.delta).epsilon(1e-14));
  CHECK(iid.range_max_x == doctest::Approx(std::pow(n / std::pow(b, 4), 1.0 / 6.0)).epsilon(1e-14));

  const AppDelta mdep = app_delta(Application::mdep, {{"m", 1}, {"b", 1}, {"n", 100}});
  CHECK(mdep.delta == doctest::Approx(44.976197718231).epsilon(1e-12));
  CHECK_FALSE(mdep.feasible);
  CHECK_FALSE(app_bound(mdep, 0.0).feasible);

  const AppDelta qf = app_delta(Application::qf, {{"K", 1.0}, {"op_norm_F", 1.0 / std::sqrt(2000.0)}});
  CHECK(qf.range_max_x == doctest::Approx(std::pow(2000.0, 1.0 / 6.0)));
  CHECK(app_bound(qf, 1.0).shape ==
        doctest::Approx(2.0 * (std::abs(std::log(qf.delta)) + 1.0) * qf.delta));

  const AppDelta ws = app_delta(Application::wiener_simple, {{"hs_norm_F2", 1e-3}});
  CHECK(ws.alpha == 1.5);
  CHECK(ws.range_max_x == doctest::Approx(std::pow(1e-3, -0.25)));

  const AppParams dj{{"q", 2}, {"K", 1}, {"M", 1}, {"influence", 0.01}, {"kappa4", 0.0}};
  const AppDelta dejong = app_delta(Application::dejong, dj);
  CHECK(dejong.delta == doctest::Approx(std::sqrt(0.01 * std::pow(std::log(0.01), 2))));
  CHECK(dejong.p0 == doctest::Approx(10.0));

  const AppDelta lb = app_delta(Application::local_bounded,
                                {{"n", 1e6}, {"theta1", 3}, {"theta2", 7}, {"b", 1}, {"b_prime", 1}, {"d", 3}});
  CHECK(lb.deltas.at("delta_d") - lb.deltas.at("delta_1") == doctest::Approx(2.0 * std::sqrt(21.0) / 1e3));
  CHECK(lb.log_offset == doctest::Approx(3.0 * std::log(3.0)));

  const AppDelta lu = app_delta(Application::local_unbounded,
                                {{"n", 1e8}, {"theta1", 2}, {"theta2", 4}, {"b", 1}, {"L", 2}});
  const double ln = std::log(1e8);
  CHECK(lu.delta == doctest::Approx((2 * ln + std::sqrt(8.0) * ln * ln + 4 * std::pow(ln, 4)) / 1e4));
}

TEST_CASE("application parameter errors") {
  AppParams dj{{"q", 2}, {"K", 1}, {"M", 1}, {"influence", 0.01}};
  try {
    app_delta(Application::dejong, dj);
    FAIL("expected a dependency error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::dependency);
    CHECK(std::string(e.what()).find("fourth_cumulant") != std::string::npos);
  }
  CHECK(kind_of([] { app_delta(Application::comb, {{"n", 10}, {"b", 1}}); }) == ErrorKind::dependency);
  CHECK(kind_of([] { app_delta(Application::local_bounded, {{"n", 10}, {"b", 1}, {"b_prime", 1}}); }) ==
        ErrorKind::dependency);
  CHECK(kind_of([] { app_delta(Application::iid, {{"b", 1}}); }) == ErrorKind::validation);
  CHECK(kind_of([] { app_delta(Application::iid, {{"n", 10}, {"b", 1}, {"nn", 3}}); }) == ErrorKind::validation);
  CHECK(application_from_string("wiener_simple") == Application::wiener_simple);
  CHECK_THROWS_AS(application_from_string("nope"), Error);
}

TEST_CASE("local Wasserstein bound") {
  const double n = std::exp(2.0);
  for (double p : {2.0, 3.0}) {
    const BoundReport r = local_wp_bound(n, 1, 1, 1, 1, 1, p);
    CHECK(r.shape == doctest::Approx(1.103638 * p).epsilon(1e-6));
    CHECK(r.feasible);
    CHECK(r.constants_normalized);
  }
  const double diff = local_wp_bound(1e4, 4, 2, 3, 1.5, 0.7, 2).shape - local_wp_bound(1e4, 2, 2, 3, 1.5, 0.7, 2).shape;
  CHECK(diff == doctest::Approx(2.0 * 2.0 * std::sqrt(6.0) * 0.49 / 100.0).epsilon(1e-12));

  const BoundReport low = local_wp_bound(n, 1, 1, 1, 1, 1, 1.0);
  CHECK_FALSE(low.feasible);
  CHECK(has(low.violated_conditions, "p below 2"));
  CHECK_FALSE(local_wp_bound(100, 1, 2, 1, 1, 1, 26.0).feasible);
  CHECK(local_wp_bound(100, 1, 2, 1, 1, 1, 25.0).feasible);
}
