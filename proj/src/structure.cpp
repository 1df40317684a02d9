#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "pwmd/error.hpp"
#include "pwmd/models.hpp"

namespace pwmd {
namespace {

double factorial(int q) {
  double f = 1.0;
  for (int k = 2; k <= q; ++k) f *= k;
  return f;
}

struct PowerSums {
  double s1 = 0.0, s2 = 0.0, s3 = 0.0, s4 = 0.0;
  void add(double w) {
    const double w2 = w * w;
    s1 += w;
    s2 += w2;
    s3 += w2 * w;
    s4 += w2 * w2;
  }
  void merge(const PowerSums& o) {
    s1 += o.s1;
    s2 += o.s2;
    s3 += o.s3;
    s4 += o.s4;
  }
  // m₄ - 3m₂² of the empirical law with weights 1/count
  double kappa4(double count) const {
    const double mean = s1 / count;
    const double r2 = s2 / count, r3 = s3 / count, r4 = s4 / count;
    const double m2 = r2 - mean * mean;
    const double m4 = r4 - 4.0 * mean * r3 + 6.0 * mean * mean * r2 - 3.0 * mean * mean * mean * mean;
    return m4 - 3.0 * m2 * m2;
  }
};

struct SquareSum {
  double s = 0.0;
  void merge(const SquareSum& o) { s += o.s; }
};

FourthCumulant homsum_exact_cumulant(const HomSum& h) {
  const std::size_t states = std::size_t{1} << h.n;
  const double qf = factorial(h.q);
  const PowerSums sums = reduce_replications<PowerSums>(states, Exec::parallel, [&](std::size_t s, PowerSums& acc) {
    double w = 0.0;
    for (const TensorEntry& e : h.entries) {
      double t = e.value;
      for (int i : e.index) t *= ((s >> i) & 1U) ? 1.0 : -1.0;
      w += t;
    }
    acc.add(qf * w);
  });
  return {sums.kappa4(static_cast<double>(states)), 0.0, true};
}

}  // namespace

double comb_variance(const Eigen::MatrixXd& c, const Eigen::MatrixXd& sigma2) {
  require(c.rows() == c.cols() && c.rows() >= 2, "comb_variance: c must be square with n >= 2");
  require(sigma2.rows() == c.rows() && sigma2.cols() == c.cols(), "comb_variance: sigma2 must match c");
  require(c.allFinite() && sigma2.allFinite(), "comb_variance: entries must be finite");
  require(sigma2.minCoeff() >= 0.0, "comb_variance: sigma2 must be nonnegative");
  const double n = static_cast<double>(c.rows());
  require(c.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-10, "comb_variance: rows of c must be centered");
  require(c.colwise().sum().cwiseAbs().maxCoeff() <= 1e-10, "comb_variance: columns of c must be centered");
  return c.squaredNorm() / (n - 1.0) + sigma2.sum() / n;
}

double maximal_influence(const HomSum& f) {
  // structure only: the influence is defined without the unit-variance scaling
  for (const TensorEntry& e : f.entries) {
    require(static_cast<int>(e.index.size()) == f.q, "maximal_influence: tuple length must be q");
    for (int a = 0; a < f.q; ++a) {
      require(e.index[a] >= 0 && e.index[a] < f.n, "maximal_influence: index out of range");
      require(a == 0 || e.index[a] > e.index[a - 1], "maximal_influence: tuples must be strictly increasing");
    }
  }
  std::vector<double> load(static_cast<std::size_t>(f.n), 0.0);
  for (const TensorEntry& e : f.entries)
    for (int i : e.index) load[i] += e.value * e.value;
  const double best = load.empty() ? 0.0 : *std::max_element(load.begin(), load.end());
  return factorial(f.q - 1) * best;
}

ContractionQ2 contraction_q2(const Eigen::MatrixXd& f) {
  require(f.rows() == f.cols(), "contraction_q2: F must be square");
  require(f.allFinite(), "contraction_q2: entries must be finite");
  ContractionQ2 out;
  if (f.size() == 0) return out;
  const double scale = std::max(1.0, f.cwiseAbs().maxCoeff());
  require((f - f.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale, "contraction_q2: F must be symmetric");
  out.f_squared = f * f;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(f, Eigen::EigenvaluesOnly);
  out.op_norm_f = eig.eigenvalues().cwiseAbs().maxCoeff();
  out.hs_norm_f = f.norm();
  out.op_norm_f2 = out.op_norm_f * out.op_norm_f;
  out.hs_norm_f2 = out.f_squared.norm();
  return out;
}

FourthCumulant fourth_cumulant(const Model& model, std::size_t reps, std::uint64_t seed) {
  validate(model);
  if (const auto* g = std::get_if<GaussChaos2>(&model)) {
    return {48.0 * (g->f * g->f).squaredNorm(), 0.0, true};
  }
  if (const auto* h = std::get_if<HomSum>(&model)) {
    if (h->dist.family() == Family::rademacher && h->n <= 20) return homsum_exact_cumulant(*h);
  }
  return fourth_cumulant_mc(model, reps, seed);
}

FourthCumulant fourth_cumulant_mc(const Model& model, std::size_t reps, std::uint64_t seed, Exec exec) {
  require(reps >= 4, "fourth_cumulant: need at least 4 replications");
  if (dimension(model) != 1) fail(ErrorKind::capability, "fourth_cumulant: scalar models only");
  const std::vector<double> w = sample_w(model, reps, seed, exec).column(0);
  const PowerSums total =
      reduce_replications<PowerSums>(reps, exec, [&](std::size_t r, PowerSums& acc) { acc.add(w[r]); });
  const double count = static_cast<double>(reps);
  const auto leave_out = [&](std::size_t r) {
    PowerSums loo = total;
    const double x = w[r], x2 = x * x;
    loo.s1 -= x;
    loo.s2 -= x2;
    loo.s3 -= x2 * x;
    loo.s4 -= x2 * x2;
    return loo.kappa4(count - 1.0);
  };
  struct Sum {
    double s = 0.0;
    void merge(const Sum& o) { s += o.s; }
  };
  const double mean_loo =
      reduce_replications<Sum>(reps, exec, [&](std::size_t r, Sum& acc) { acc.s += leave_out(r); }).s / count;
  const double ss = reduce_replications<SquareSum>(reps, exec, [&](std::size_t r, SquareSum& acc) {
                      const double d = leave_out(r) - mean_loo;
                      acc.s += d * d;
                    }).s;
  return {total.kappa4(count), std::sqrt((count - 1.0) / count * ss), false};
}

DependencyStats dependency_stats(const Model& model) {
  validate(model);
  DependencyStats st;
  int n = 0;
  if (const auto* m = std::get_if<MDep>(&model)) {
    n = m->n;
    st.neighborhoods.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      for (int j = std::max(0, i - m->m); j <= std::min(n - 1, i + m->m); ++j) st.neighborhoods[i].push_back(j);
    st.group_count = m->m + 1;
    st.groups.resize(static_cast<std::size_t>(st.group_count));
    for (int i = 0; i < n; ++i) st.groups[i % st.group_count].push_back(i);
  } else if (const auto* g = std::get_if<GraphDep>(&model)) {
    n = g->n;
    st.neighborhoods.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) st.neighborhoods[i].push_back(i);
    for (auto [a, b] : g->edges) {
      st.neighborhoods[a].push_back(b);
      st.neighborhoods[b].push_back(a);
    }
    for (auto& a : st.neighborhoods) std::sort(a.begin(), a.end());
    std::vector<int> color(static_cast<std::size_t>(n), -1);
    std::vector<char> taken;
    for (int i = 0; i < n; ++i) {
      taken.assign(st.neighborhoods[i].size() + 1, 0);
      for (int j : st.neighborhoods[i])
        if (color[j] >= 0 && color[j] < static_cast<int>(taken.size())) taken[color[j]] = 1;
      int c = 0;
      while (taken[c]) ++c;
      color[i] = c;
      st.group_count = std::max(st.group_count, c + 1);
    }
    st.groups.resize(static_cast<std::size_t>(st.group_count));
    for (int i = 0; i < n; ++i) st.groups[color[i]].push_back(i);
  } else {
    fail(ErrorKind::capability, "dependency_stats: needs an MDep or GraphDep model");
  }

  const auto& nb = st.neighborhoods;
  std::vector<int> in_ij(static_cast<std::size_t>(n), -1);  // stamp: member of A_ij
  std::vector<int> seen(static_cast<std::size_t>(n), -1);   // stamp: candidate k visited
  int stamp = 0;
  for (int i = 0; i < n; ++i) {
    st.theta1 = std::max(st.theta1, static_cast<int>(nb[i].size()));
    for (int j : nb[i]) {
      ++stamp;
      std::vector<int> aij;
      std::set_union(nb[i].begin(), nb[i].end(), nb[j].begin(), nb[j].end(), std::back_inserter(aij));
      for (int k : aij) in_ij[k] = stamp;
      // (k, l) with l ∈ A_k counts when k ∈ A_ij or l ∈ A_ij; neighborhoods are
      // symmetric, so any such k lies in A_l for some l ∈ A_ij
      long long b = 0;
      for (int l : aij) {
        for (int k : nb[l]) {
          if (seen[k] == stamp) continue;
          seen[k] = stamp;
          if (in_ij[k] == stamp) {
            b += static_cast<long long>(nb[k].size());
          } else {
            for (int t : nb[k]) b += in_ij[t] == stamp;
          }
        }
      }
      st.theta2 = std::max<long long>(st.theta2, b);
    }
  }
  return st;
}

}  // namespace pwmd
