#include "pwmd/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "pwmd/error.hpp"

namespace pwmd {
namespace {

double factorial(int q) {
  double f = 1.0;
  for (int k = 2; k <= q; ++k) f *= k;
  return f;
}

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void validate_matrix_finite(const Eigen::MatrixXd& m, const std::string& what) {
  require(m.allFinite(), what + ": entries must be finite");
}

}  // namespace

HomSum HomSum::from_entries(int q, int n, std::vector<TensorEntry> entries, DistSpec dist) {
  require(q >= 2, "HomSum: order q must be at least 2");
  require(n >= q, "HomSum: need n >= q");
  for (TensorEntry& e : entries) {
    require(static_cast<int>(e.index.size()) == q, "HomSum: every index tuple needs q entries");
    std::sort(e.index.begin(), e.index.end());
    for (int k = 0; k < q; ++k) {
      require(e.index[k] >= 0 && e.index[k] < n, "HomSum: index out of range");
      require(k == 0 || e.index[k] != e.index[k - 1],
              "HomSum: coinciding indices (f must vanish on diagonals)");
    }
  }
  std::sort(entries.begin(), entries.end(),
            [](const TensorEntry& a, const TensorEntry& b) { return a.index < b.index; });
  std::vector<TensorEntry> merged;
  for (TensorEntry& e : entries) {
    if (!merged.empty() && merged.back().index == e.index) {
      merged.back().value += e.value;
    } else {
      merged.push_back(std::move(e));
    }
  }
  std::erase_if(merged, [](const TensorEntry& e) { return e.value == 0.0; });
  HomSum h;
  h.q = q;
  h.n = n;
  h.entries = std::move(merged);
  h.dist = std::move(dist);
  return h;
}

HomSum HomSum::perfect_matching(int n, DistSpec dist) {
  require(n >= 2 && n % 2 == 0, "HomSum::perfect_matching: n must be even and positive");
  std::vector<TensorEntry> entries;
  const double v = 1.0 / std::sqrt(2.0 * n);
  for (int k = 0; k < n; k += 2) entries.push_back({{k, k + 1}, v});
  return from_entries(2, n, std::move(entries), std::move(dist));
}

HomSum HomSum::from_matrix(const Eigen::MatrixXd& f, DistSpec dist) {
  require(f.rows() == f.cols(), "HomSum::from_matrix: matrix must be square");
  const int n = static_cast<int>(f.rows());
  std::vector<TensorEntry> entries;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      require(f(i, j) == f(j, i), "HomSum::from_matrix: matrix must be symmetric");
      if (f(i, j) != 0.0) entries.push_back({{i, j}, f(i, j)});
    }
  }
  return from_entries(2, n, std::move(entries), std::move(dist));
}

double HomSum::squared_norm() const {
  std::vector<double> sq;
  sq.reserve(entries.size());
  for (const TensorEntry& e : entries) sq.push_back(e.value * e.value);
  std::sort(sq.begin(), sq.end());
  return factorial(q) * std::accumulate(sq.begin(), sq.end(), 0.0);
}

GaussChaos2 GaussChaos2::perfect_matching(int n) {
  require(n >= 2 && n % 2 == 0, "GaussChaos2::perfect_matching: n must be even and positive");
  GaussChaos2 g;
  g.f = Eigen::MatrixXd::Zero(n, n);
  const double v = 1.0 / std::sqrt(2.0 * n);
  for (int k = 0; k < n; k += 2) g.f(k, k + 1) = g.f(k + 1, k) = v;
  return g;
}

GaussChaos2 GaussChaos2::random(int n, std::uint64_t seed) {
  require(n >= 2, "GaussChaos2::random: n must be at least 2");
  CounterRng rng(seed, 0);
  std::normal_distribution<double> normal;
  GaussChaos2 g;
  g.f = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) g.f(i, j) = g.f(j, i) = normal(rng);
  g.f /= std::sqrt(2.0) * g.f.norm();
  return g;
}

Eigen::MatrixXd random_centered_matrix(int n, std::uint64_t seed) {
  require(n >= 2, "random_centered_matrix: n must be at least 2");
  CounterRng rng(seed, 0);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd c(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) c(i, j) = normal(rng);
  const Eigen::VectorXd row = c.rowwise().mean();
  const Eigen::RowVectorXd col = c.colwise().mean();
  const double grand = c.mean();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) c(i, j) = c(i, j) - row(i) - col(j) + grand;
  return c;
}

void validate(const Model& model) {
  std::visit(
      Overloaded{
          [](const IidSum& m) { require(m.n >= 1, "IidSum: n must be positive"); },
          [](const MultiIid& m) {
            require(m.n >= 1, "MultiIid: n must be positive");
            require(m.d >= 1, "MultiIid: d must be positive");
          },
          [](const CombClt& m) { (void)comb_variance(m.c, m.sigma2); },
          [](const HomSum& m) {
            require(m.q >= 2, "HomSum: order q must be at least 2");
            require(m.n >= m.q, "HomSum: need n >= q");
            for (std::size_t k = 0; k < m.entries.size(); ++k) {
              const auto& idx = m.entries[k].index;
              require(static_cast<int>(idx.size()) == m.q, "HomSum: tuple length must be q");
              for (int a = 0; a < m.q; ++a) {
                require(idx[a] >= 0 && idx[a] < m.n, "HomSum: index out of range");
                require(a == 0 || idx[a] > idx[a - 1],
                        "HomSum: tuples must be strictly increasing (no diagonal terms)");
              }
              require(k == 0 || m.entries[k - 1].index < idx, "HomSum: entries must be canonical");
              require(std::isfinite(m.entries[k].value), "HomSum: values must be finite");
            }
            require(std::fabs(m.squared_norm() * factorial(m.q) - 1.0) <= 1e-10,
                    "HomSum: q!·‖f‖² must equal 1");
          },
          [](const GaussChaos2& m) {
            const auto& f = m.f;
            require(f.rows() == f.cols() && f.rows() >= 2, "GaussChaos2: F must be square, n >= 2");
            validate_matrix_finite(f, "GaussChaos2");
            require((f - f.transpose()).cwiseAbs().maxCoeff() <= 1e-12, "GaussChaos2: F must be symmetric");
            require(f.diagonal().cwiseAbs().maxCoeff() <= 1e-12, "GaussChaos2: diag(F) must be 0");
            require(std::fabs(2.0 * f.squaredNorm() - 1.0) <= 1e-10, "GaussChaos2: 2‖F‖² must equal 1");
          },
          [](const MDep& m) {
            require(m.n >= 1, "MDep: n must be positive");
            require(m.m >= 0, "MDep: m must be nonnegative");
            require(static_cast<int>(m.kernel.size()) == m.m + 1, "MDep: kernel needs m + 1 coefficients");
            double s = 0.0;
            for (double a : m.kernel) {
              require(std::isfinite(a), "MDep: kernel must be finite");
              s += a * a;
            }
            require(s > 0.0, "MDep: kernel must not vanish");
          },
          [](const GraphDep& m) {
            require(m.n >= 1, "GraphDep: n must be positive");
            std::vector<std::pair<int, int>> seen;
            for (auto [a, b] : m.edges) {
              require(a >= 0 && a < m.n && b >= 0 && b < m.n, "GraphDep: edge endpoint out of range");
              require(a != b, "GraphDep: self loops are not allowed");
              seen.emplace_back(std::min(a, b), std::max(a, b));
            }
            std::sort(seen.begin(), seen.end());
            require(std::adjacent_find(seen.begin(), seen.end()) == seen.end(),
                    "GraphDep: duplicate edge");
          },
      },
      model);
}

std::string model_tag(const Model& model) {
  std::ostringstream os;
  std::visit(Overloaded{
                 [&](const IidSum& m) { os << "iid_sum(n=" << m.n << "," << m.dist.name() << ")"; },
                 [&](const MultiIid& m) {
                   os << "multi_iid(n=" << m.n << ",d=" << m.d << "," << m.dist.name() << ")";
                 },
                 [&](const CombClt& m) {
                   os << "comb_clt(n=" << m.c.rows() << "," << (m.sigma2.size() && m.sigma2.maxCoeff() > 0.0 ? m.noise.name() : "deterministic") << ")";
                 },
                 [&](const HomSum& m) {
                   os << "hom_sum(q=" << m.q << ",n=" << m.n << ",terms=" << m.entries.size() << ","
                      << m.dist.name() << ")";
                 },
                 [&](const GaussChaos2& m) { os << "gauss_chaos2(n=" << m.f.rows() << ")"; },
                 [&](const MDep& m) { os << "mdep(n=" << m.n << ",m=" << m.m << "," << m.dist.name() << ")"; },
                 [&](const GraphDep& m) {
                   os << "graph_dep(n=" << m.n << ",edges=" << m.edges.size() << "," << m.dist.name() << ")";
                 },
             },
             model);
  return os.str();
}

int dimension(const Model& model) {
  if (const auto* m = std::get_if<MultiIid>(&model)) return m->d;
  return 1;
}

std::vector<double> Sample::column(int k) const {
  require(k >= 0 && k < d, "Sample::column: coordinate out of range");
  std::vector<double> out(reps());
  for (std::size_t r = 0; r < out.size(); ++r) out[r] = data(static_cast<Eigen::Index>(r), k);
  return out;
}

std::vector<double> Sample::norms() const {
  std::vector<double> out(reps());
  for (std::size_t r = 0; r < out.size(); ++r) out[r] = data.row(static_cast<Eigen::Index>(r)).norm();
  return out;
}

double draw_iid_sum(const DistSpec& dist, int n, double theta, CounterRng& rng, SumStrategy strategy) {
  if (strategy == SumStrategy::closed_form) {
    const double nn = static_cast<double>(n);
    switch (dist.family()) {
      case Family::gaussian: {
        std::normal_distribution<double> normal(nn * theta, std::sqrt(nn));
        return normal(rng);
      }
      case Family::rademacher: {
        const double p_plus = 1.0 / (1.0 + std::exp(-2.0 * theta));
        std::binomial_distribution<long long> binom(n, p_plus);
        return 2.0 * static_cast<double>(binom(rng)) - nn;
      }
      case Family::laplace_unit_var: {
        const auto [lo, hi] = dist.mgf_domain();
        if (!(theta > lo && theta < hi)) fail(ErrorKind::range, "draw_iid_sum: theta outside MGF domain");
        const double inv = hi;  // 1/s
        std::gamma_distribution<double> up(nn, 1.0 / (inv - theta));
        std::gamma_distribution<double> down(nn, 1.0 / (inv + theta));
        const double a = up(rng);
        return a - down(rng);
      }
      case Family::centered_exponential: {
        const double r = dist.parameter();
        if (!(theta < r)) fail(ErrorKind::range, "draw_iid_sum: theta outside MGF domain");
        std::gamma_distribution<double> g(nn, 1.0 / (r - theta));
        return g(rng) - nn / r;
      }
      default: break;
    }
  }
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += dist.sample_tilted(rng, theta);
  return s;
}

Sampler::Sampler(Model model, SumStrategy strategy) : model_(std::move(model)), strategy_(strategy) {
  validate(model_);
  dim_ = pwmd::dimension(model_);
  std::visit(Overloaded{
                 [&](const IidSum& m) { scale_ = m.dist.stddev() * std::sqrt(static_cast<double>(m.n)); },
                 [&](const MultiIid& m) { scale_ = m.dist.stddev() * std::sqrt(static_cast<double>(m.n)); },
                 [&](const CombClt& m) {
                   const double b2 = comb_variance(m.c, m.sigma2);
                   if (!(b2 > 0.0)) fail(ErrorKind::degenerate, "CombClt: B_n² = 0");
                   scale_ = std::sqrt(b2);
                 },
                 [&](const HomSum& m) { scale_ = 1.0; (void)m; },
                 [&](const GaussChaos2&) { scale_ = 1.0; },
                 [&](const MDep& m) {
                   mdep_coef_.assign(static_cast<std::size_t>(m.n + m.m), 0.0);
                   for (int i = 0; i < m.n; ++i)
                     for (int k = 0; k <= m.m; ++k) mdep_coef_[i + k] += m.kernel[k];
                   double v = 0.0;
                   for (double c : mdep_coef_) v += c * c;
                   scale_ = std::sqrt(v);
                 },
                 [&](const GraphDep& m) {
                   scale_ = std::sqrt(static_cast<double>(m.n) + 4.0 * static_cast<double>(m.edges.size()));
                 },
             },
             model_);
}

void Sampler::draw(CounterRng& rng, std::span<double> out) const {
  std::visit(
      Overloaded{
          [&](const IidSum& m) { out[0] = draw_iid_sum(m.dist, m.n, 0.0, rng, strategy_) / scale_; },
          [&](const MultiIid& m) {
            for (int k = 0; k < m.d; ++k) out[k] = draw_iid_sum(m.dist, m.n, 0.0, rng, strategy_) / scale_;
          },
          [&](const CombClt& m) {
            const int n = static_cast<int>(m.c.rows());
            thread_local std::vector<int> perm;
            perm.resize(n);
            std::iota(perm.begin(), perm.end(), 0);
            for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
            const double noise_sd = m.noise.stddev();
            double s = 0.0;
            for (int i = 0; i < n; ++i) {
              double x = m.c(i, perm[i]);
              const double v = m.sigma2(i, perm[i]);
              if (v > 0.0) x += std::sqrt(v) * m.noise.sample(rng) / noise_sd;
              s += x;
            }
            out[0] = s / scale_;
          },
          [&](const HomSum& m) {
            thread_local std::vector<double> x;
            x.resize(m.n);
            const double sd = m.dist.stddev();
            for (int i = 0; i < m.n; ++i) x[i] = m.dist.sample(rng) / sd;
            const double qf = factorial(m.q);
            double w = 0.0;
            for (const TensorEntry& e : m.entries) {
              double t = e.value;
              for (int i : e.index) t *= x[i];
              w += t;
            }
            out[0] = qf * w;
          },
          [&](const GaussChaos2& m) {
            const auto n = m.f.rows();
            thread_local Eigen::VectorXd x;
            x.resize(n);
            std::normal_distribution<double> normal;
            for (Eigen::Index i = 0; i < n; ++i) x(i) = normal(rng);
            out[0] = x.dot(m.f * x);
          },
          [&](const MDep& m) {
            const double sd = m.dist.stddev();
            double s = 0.0;
            for (double c : mdep_coef_) s += c * (m.dist.sample(rng) / sd);
            out[0] = s / scale_;
          },
          [&](const GraphDep& m) {
            const double sd = m.dist.stddev();
            double s = 0.0;
            for (int i = 0; i < m.n; ++i) s += m.dist.sample(rng) / sd;
            for (std::size_t e = 0; e < m.edges.size(); ++e) s += 2.0 * (m.dist.sample(rng) / sd);
            out[0] = s / scale_;
          },
      },
      model_);
}

double Sampler::draw_scalar(CounterRng& rng) const {
  require(dim_ == 1, "Sampler::draw_scalar: model is multivariate");
  double w = 0.0;
  draw(rng, std::span<double>(&w, 1));
  return w;
}

Sample sample_w(const Model& model, std::size_t reps, std::uint64_t seed, Exec exec, SumStrategy strategy) {
  require(reps >= 1, "sample_w: reps must be positive");
  const Sampler sampler(model, strategy);
  Sample s;
  s.d = sampler.dimension();
  s.seed = seed;
  s.model_tag = model_tag(model);
  s.data.resize(static_cast<Eigen::Index>(reps), s.d);
  for_each_index(reps, exec, [&](std::size_t r) {
    CounterRng rng(seed, r);
    sampler.draw(rng, std::span<double>(s.data.row(static_cast<Eigen::Index>(r)).data(), s.d));
  });
  return s;
}

}  // namespace pwmd
