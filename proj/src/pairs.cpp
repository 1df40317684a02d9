#include <algorithm>
#include <cmath>
#include <numeric>

#include "pwmd/error.hpp"
#include "pwmd/models.hpp"

namespace pwmd {
namespace {

double factorial(int q) {
  double f = 1.0;
  for (int k = 2; k <= q; ++k) f *= k;
  return f;
}

std::vector<Atom> finite_atoms(const DistSpec& dist, const char* who) {
  if (dist.family() == Family::lattice) return dist.atoms();
  if (dist.family() == Family::rademacher) return {{-1.0, 0.5}, {1.0, 0.5}};
  fail(ErrorKind::capability, std::string(who) + ": needs a lattice or rademacher law, got " + dist.name());
}

// Entries of a HomSum grouped by the coordinates they touch.
std::vector<std::vector<int>> incidence(const HomSum& h) {
  std::vector<std::vector<int>> by_index(static_cast<std::size_t>(h.n));
  for (std::size_t e = 0; e < h.entries.size(); ++e)
    for (int i : h.entries[e].index) by_index[i].push_back(static_cast<int>(e));
  return by_index;
}

double homsum_value(const HomSum& h, std::span<const double> x) {
  double w = 0.0;
  for (const TensorEntry& e : h.entries) {
    double t = e.value;
    for (int i : e.index) t *= x[i];
    w += t;
  }
  return factorial(h.q) * w;
}

// W(x with x_i replaced by y) - W(x), evaluated on the terms containing i.
double homsum_change(const HomSum& h, const std::vector<int>& touching, std::span<const double> x,
                     int i, double y) {
  double s = 0.0;
  for (int e : touching) {
    const TensorEntry& t = h.entries[e];
    double prod = t.value;
    for (int k : t.index)
      if (k != i) prod *= x[k];
    s += prod;
  }
  return factorial(h.q) * s * (y - x[i]);
}

void finish_pair(PairDraw& pd) {
  pd.d_increment.resize(pd.w.size());
  for (std::size_t k = 0; k < pd.w.size(); ++k) pd.d_increment[k] = pd.w_prime[k] - pd.w[k];
}

PairDraw pair_iid(const DistSpec& dist, int n, int d, CounterRng& rng) {
  const double scale = dist.stddev() * std::sqrt(static_cast<double>(n));
  std::vector<double> x(static_cast<std::size_t>(n) * d);
  for (double& v : x) v = dist.sample(rng);
  PairDraw pd;
  pd.w.assign(d, 0.0);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k) pd.w[k] += x[static_cast<std::size_t>(i) * d + k];
  for (double& v : pd.w) v /= scale;
  pd.index_i = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
  pd.w_prime = pd.w;
  for (int k = 0; k < d; ++k) {
    const double old = x[static_cast<std::size_t>(pd.index_i) * d + k];
    const double fresh = dist.sample(rng);
    pd.w_prime[k] = pd.w[k] + (fresh - old) / scale;
    if (k == 0) {
      pd.old_value = old;
      pd.new_value = fresh;
    }
  }
  finish_pair(pd);
  return pd;
}

class PairContext {
 public:
  explicit PairContext(const Model& model) : model_(model) {
    validate(model_);
    if (const auto* h = std::get_if<HomSum>(&model_)) {
      touching_ = incidence(*h);
    } else if (const auto* c = std::get_if<CombClt>(&model_)) {
      const double b2 = comb_variance(c->c, c->sigma2);
      if (!(b2 > 0.0)) fail(ErrorKind::degenerate, "CombClt: B_n² = 0");
      scale_ = std::sqrt(b2);
    } else if (!std::holds_alternative<IidSum>(model_) && !std::holds_alternative<MultiIid>(model_)) {
      fail(ErrorKind::capability, "draw_pair: no exchangeable pair for " + model_tag(model_));
    }
  }

  PairDraw draw(CounterRng& rng) const {
    if (const auto* m = std::get_if<IidSum>(&model_)) return pair_iid(m->dist, m->n, 1, rng);
    if (const auto* m = std::get_if<MultiIid>(&model_)) return pair_iid(m->dist, m->n, m->d, rng);
    if (const auto* h = std::get_if<HomSum>(&model_)) return draw_homsum(*h, rng);
    return draw_comb(std::get<CombClt>(model_), rng);
  }

 private:
  PairDraw draw_homsum(const HomSum& h, CounterRng& rng) const {
    const double sd = h.dist.stddev();
    std::vector<double> x(static_cast<std::size_t>(h.n));
    for (double& v : x) v = h.dist.sample(rng) / sd;
    PairDraw pd;
    pd.w = {homsum_value(h, x)};
    pd.index_i = static_cast<int>(rng.below(static_cast<std::uint64_t>(h.n)));
    pd.old_value = x[pd.index_i];
    pd.new_value = h.dist.sample(rng) / sd;
    pd.w_prime = {pd.w[0] + homsum_change(h, touching_[pd.index_i], x, pd.index_i, pd.new_value)};
    finish_pair(pd);
    return pd;
  }

  PairDraw draw_comb(const CombClt& m, CounterRng& rng) const {
    const int n = static_cast<int>(m.c.rows());
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(static_cast<std::uint64_t>(i + 1))]);
    const double noise_sd = m.noise.stddev();
    auto cell = [&](int i, int j) {
      double x = m.c(i, j);
      const double v = m.sigma2(i, j);
      if (v > 0.0) x += std::sqrt(v) * m.noise.sample(rng) / noise_sd;
      return x / scale_;
    };
    std::vector<double> diag(static_cast<std::size_t>(n));
    double w = 0.0;
    for (int i = 0; i < n; ++i) {
      diag[i] = cell(i, perm[i]);
      w += diag[i];
    }
    const int a = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    int b = static_cast<int>(rng.below(static_cast<std::uint64_t>(n - 1)));
    if (b >= a) ++b;
    const double cross_ab = cell(a, perm[b]);
    const double cross_ba = cell(b, perm[a]);
    PairDraw pd;
    pd.w = {w};
    pd.index_i = a;
    pd.index_j = b;
    pd.old_value = diag[a];
    pd.new_value = cross_ab;
    pd.w_prime = {w - diag[a] - diag[b] + cross_ab + cross_ba};
    finish_pair(pd);
    return pd;
  }

  const Model& model_;
  std::vector<std::vector<int>> touching_;
  double scale_ = 1.0;
};

double field_r(const StateConditional& s) { return s.r; }
double field_e(const StateConditional& s) { return s.e; }
double field_d4(const StateConditional& s) { return s.mean_d4; }

void fill_norms(Certificate& cert) {
  cert.norm_R_p = lp_norm(cert.states, cert.p, field_r);
  cert.norm_E_p = lp_norm(cert.states, cert.p, field_e);
  cert.norm_D4_p = lp_norm(cert.states, cert.p, field_d4);
}

StateConditional make_state(double prob, double w, double m1, double m2, double m4, double lambda) {
  StateConditional s;
  s.prob = prob;
  s.w = w;
  s.mean_d = m1;
  s.mean_d2 = m2;
  s.mean_d4 = m4;
  s.r = -m1 / lambda - w;
  s.e = m2 / (2.0 * lambda) - 1.0;
  return s;
}

constexpr std::uint64_t kStateCap = std::uint64_t{1} << 24;

std::uint64_t saturating_pow(std::uint64_t base, int exp) {
  std::uint64_t r = 1;
  for (int k = 0; k < exp; ++k) {
    if (r > (std::uint64_t{1} << 62) / std::max<std::uint64_t>(base, 1)) return UINT64_MAX;
    r *= base;
  }
  return r;
}

Certificate certificate_iid(const IidSum& m, double p) {
  const std::vector<Atom> atoms = finite_atoms(m.dist, "exact_pair_conditionals");
  const std::uint64_t k = atoms.size();
  const std::uint64_t states = saturating_pow(k, m.n);
  if (m.n > 12 || states > kStateCap)
    throw SizingError("exact_pair_conditionals: IidSum state space too large", states);
  const double scale = m.dist.stddev() * std::sqrt(static_cast<double>(m.n));
  // conditional moments of one resampled coordinate, per current atom
  std::vector<double> c1(k), c2(k), c4(k);
  for (std::size_t a = 0; a < k; ++a) {
    double s1 = 0.0, s2 = 0.0, s4 = 0.0;
    for (const Atom& b : atoms) {
      const double d = (b.value - atoms[a].value) / scale;
      s1 += b.prob * d;
      s2 += b.prob * d * d;
      s4 += b.prob * d * d * d * d;
    }
    c1[a] = s1;
    c2[a] = s2;
    c4[a] = s4;
  }
  Certificate cert;
  cert.lambda = 1.0 / m.n;
  cert.p = p;
  cert.exact = true;
  cert.model_tag = model_tag(m);
  cert.states.reserve(states);
  std::vector<std::size_t> digit(static_cast<std::size_t>(m.n), 0);
  const double inv_n = 1.0 / m.n;
  for (std::uint64_t s = 0; s < states; ++s) {
    double prob = 1.0, w = 0.0, m1 = 0.0, m2 = 0.0, m4 = 0.0;
    for (std::size_t a : digit) {
      prob *= atoms[a].prob;
      w += atoms[a].value / scale;
      m1 += c1[a];
      m2 += c2[a];
      m4 += c4[a];
    }
    cert.states.push_back(make_state(prob, w, m1 * inv_n, m2 * inv_n, m4 * inv_n, cert.lambda));
    for (std::size_t i = 0; i < digit.size(); ++i) {
      if (++digit[i] < k) break;
      digit[i] = 0;
    }
  }
  return cert;
}

Certificate certificate_comb(const CombClt& m, double p) {
  const int n = static_cast<int>(m.c.rows());
  if (m.sigma2.size() > 0 && m.sigma2.maxCoeff() > 0.0)
    fail(ErrorKind::capability, "exact_pair_conditionals: CombClt needs sigma2 = 0");
  std::uint64_t fact = 1;
  for (int k = 2; k <= n; ++k) fact *= static_cast<std::uint64_t>(k);
  if (n > 7) throw SizingError("exact_pair_conditionals: CombClt needs n <= 7", fact);
  const double b2 = comb_variance(m.c, m.sigma2);
  if (!(b2 > 0.0)) fail(ErrorKind::degenerate, "CombClt: B_n² = 0");
  const Eigen::MatrixXd y = m.c / std::sqrt(b2);
  Certificate cert;
  cert.lambda = 2.0 / (n - 1);
  cert.p = p;
  cert.exact = true;
  cert.model_tag = model_tag(m);
  cert.states.reserve(fact);
  const double pair_prob = 2.0 / (static_cast<double>(n) * (n - 1));
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  do {
    double w = 0.0;
    for (int i = 0; i < n; ++i) w += y(i, perm[i]);
    double m1 = 0.0, m2 = 0.0, m4 = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const double d = -y(i, perm[i]) - y(j, perm[j]) + y(i, perm[j]) + y(j, perm[i]);
        m1 += d;
        m2 += d * d;
        m4 += d * d * d * d;
      }
    }
    cert.states.push_back(make_state(1.0 / static_cast<double>(fact), w, m1 * pair_prob, m2 * pair_prob,
                                     m4 * pair_prob, cert.lambda));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return cert;
}

Certificate certificate_homsum(const HomSum& h, double p) {
  if (h.dist.family() != Family::rademacher)
    fail(ErrorKind::capability, "exact_pair_conditionals: HomSum needs rademacher inputs");
  const std::uint64_t states = std::uint64_t{1} << std::min(h.n, 63);
  if (h.n > 16) throw SizingError("exact_pair_conditionals: HomSum needs n <= 16", states);
  const auto touching = incidence(h);
  Certificate cert;
  cert.lambda = static_cast<double>(h.q) / h.n;
  cert.p = p;
  cert.exact = true;
  cert.model_tag = model_tag(h);
  cert.states.reserve(states);
  std::vector<double> x(static_cast<std::size_t>(h.n));
  const double weight = 0.5 / h.n;  // uniform I, then a sign flip with probability ½
  for (std::uint64_t s = 0; s < states; ++s) {
    for (int i = 0; i < h.n; ++i) x[i] = ((s >> i) & 1U) ? 1.0 : -1.0;
    const double w = homsum_value(h, x);
    double m1 = 0.0, m2 = 0.0, m4 = 0.0;
    for (int i = 0; i < h.n; ++i) {
      const double d = homsum_change(h, touching[i], x, i, -x[i]);
      m1 += d;
      m2 += d * d;
      m4 += d * d * d * d;
    }
    cert.states.push_back(make_state(std::ldexp(1.0, -h.n), w, m1 * weight, m2 * weight, m4 * weight,
                                     cert.lambda));
  }
  return cert;
}

}  // namespace

PairDraw draw_pair(const Model& model, std::uint64_t seed) {
  const PairContext ctx(model);
  CounterRng rng(seed, 0);
  return ctx.draw(rng);
}

std::vector<PairDraw> draw_pairs(const Model& model, std::size_t count, std::uint64_t seed, Exec exec) {
  const PairContext ctx(model);
  std::vector<PairDraw> out(count);
  for_each_index(count, exec, [&](std::size_t k) {
    CounterRng rng(seed, k);
    out[k] = ctx.draw(rng);
  });
  return out;
}

double lp_norm(std::span<const StateConditional> states, double p, double (*field)(const StateConditional&)) {
  require(p >= 1.0, "lp_norm: p must be at least 1");
  std::vector<double> terms;
  terms.reserve(states.size());
  for (const StateConditional& s : states) terms.push_back(s.prob * std::pow(std::fabs(field(s)), p));
  std::sort(terms.begin(), terms.end());
  return std::pow(std::accumulate(terms.begin(), terms.end(), 0.0), 1.0 / p);
}

Certificate exact_pair_conditionals(const Model& model, double p) {
  require(p >= 1.0, "exact_pair_conditionals: p must be at least 1");
  validate(model);
  Certificate cert;
  if (const auto* m = std::get_if<IidSum>(&model)) {
    cert = certificate_iid(*m, p);
  } else if (const auto* c = std::get_if<CombClt>(&model)) {
    cert = certificate_comb(*c, p);
  } else if (const auto* h = std::get_if<HomSum>(&model)) {
    cert = certificate_homsum(*h, p);
  } else {
    fail(ErrorKind::capability, "exact_pair_conditionals: no enumerable pair for " + model_tag(model));
  }
  fill_norms(cert);
  return cert;
}

Certificate certificate_at(const Certificate& cert, double p) {
  require(p >= 1.0, "certificate_at: p must be at least 1");
  Certificate out = cert;
  out.p = p;
  if (!out.states.empty()) fill_norms(out);
  return out;
}

}  // namespace pwmd
