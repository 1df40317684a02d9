#include "pwmd/oracles.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

#include "pwmd/error.hpp"
#include "pwmd/special.hpp"

namespace pwmd {

namespace {

std::vector<Atom> merge_sorted(std::vector<Atom> atoms, double tol) {
  std::sort(atoms.begin(), atoms.end(), [](const Atom& a, const Atom& b) { return a.value < b.value; });
  std::vector<Atom> out;
  out.reserve(atoms.size());
  std::size_t i = 0;
  while (i < atoms.size()) {
    const double start = atoms[i].value;
    double mass = 0.0, moment = 0.0;
    std::size_t j = i;
    for (; j < atoms.size() && atoms[j].value - start <= tol; ++j) {
      mass += atoms[j].prob;
      moment += atoms[j].prob * atoms[j].value;
    }
    const double value = j - i == 1 ? start : (mass > 0.0 ? moment / mass : start);
    if (mass > 0.0) out.push_back({value, mass});
    i = j;
  }
  return out;
}

std::vector<Atom> raw_atoms(const DistSpec& dist) {
  switch (dist.family()) {
    case Family::rademacher: return {{-1.0, 0.5}, {1.0, 0.5}};
    case Family::lattice: return dist.atoms();
    default:
      fail(ErrorKind::capability, "convolve_iid_pmf: " + dist.name() + " is not a finite lattice law");
  }
}

// Step h with every value an integer multiple of h, or 0 if none is found.
double integer_step(const std::vector<Atom>& atoms) {
  double smallest = std::numeric_limits<double>::infinity();
  for (const Atom& a : atoms)
    if (a.value != 0.0) smallest = std::min(smallest, std::abs(a.value));
  for (int k = 1; k <= 64; ++k) {
    const double h = smallest / k;
    bool ok = true;
    for (const Atom& a : atoms) {
      const double m = a.value / h;
      if (std::abs(m - std::round(m)) > 1e-9 || std::abs(m) > 1e6) {
        ok = false;
        break;
      }
    }
    if (ok) return h;
  }
  return 0.0;
}

ExactPmf convolve_integer(const std::vector<Atom>& atoms, double h, int n, double scale,
                          std::string tag) {
  std::vector<std::int64_t> offset(atoms.size());
  for (std::size_t k = 0; k < atoms.size(); ++k) offset[k] = std::llround(atoms[k].value / h);
  const std::int64_t lo = *std::min_element(offset.begin(), offset.end());
  const std::int64_t hi = *std::max_element(offset.begin(), offset.end());
  const std::uint64_t width = static_cast<std::uint64_t>(hi - lo);
  const std::uint64_t support = width * static_cast<std::uint64_t>(n) + 1;
  if (support > kMaxSupport)
    throw SizingError("convolve_iid_pmf: support of " + std::to_string(support) + " lattice points",
                      support);

  std::vector<double> cur{1.0}, next;
  for (int step = 0; step < n; ++step) {
    next.assign(cur.size() + width, 0.0);
    for (std::size_t k = 0; k < atoms.size(); ++k) {
      const std::size_t shift = static_cast<std::size_t>(offset[k] - lo);
      const double pk = atoms[k].prob;
      for (std::size_t i = 0; i < cur.size(); ++i) next[i + shift] += pk * cur[i];
    }
    cur.swap(next);
  }

  std::vector<Atom> out;
  const std::int64_t base = lo * n;
  for (std::size_t i = 0; i < cur.size(); ++i)
    if (cur[i] > 0.0) out.push_back({static_cast<double>(base + static_cast<std::int64_t>(i)) * h * scale, cur[i]});
  return {std::move(out), std::move(tag)};
}

}  // namespace

double ExactPmf::total_mass() const {
  double s = 0.0;
  for (const Atom& a : atoms) s += a.prob;
  return s;
}

double ExactPmf::moment(int k) const {
  double s = 0.0;
  for (const Atom& a : atoms) s += a.prob * std::pow(a.value, k);
  return s;
}

double ExactPmf::mean() const { return moment(1); }

ExactPmf make_pmf(std::vector<Atom> atoms, std::string model_tag) {
  for (const Atom& a : atoms) require(a.prob >= 0.0 && std::isfinite(a.value), "pmf: invalid atom");
  return {merge_sorted(std::move(atoms), kMergeTolerance), std::move(model_tag)};
}

ExactPmf convolve(const ExactPmf& a, const ExactPmf& b) {
  const std::uint64_t size = static_cast<std::uint64_t>(a.atoms.size()) * b.atoms.size();
  if (size > kMaxSupport) throw SizingError("convolve: product support too large", size);
  std::vector<Atom> out;
  out.reserve(size);
  for (const Atom& x : a.atoms)
    for (const Atom& y : b.atoms) out.push_back({x.value + y.value, x.prob * y.prob});
  return make_pmf(std::move(out), a.model_tag + "*" + b.model_tag);
}

ExactPmf scale(const ExactPmf& pmf, double s) {
  require(s > 0.0, "scale: factor must be positive");
  ExactPmf out = pmf;
  for (Atom& a : out.atoms) a.value *= s;
  return out;
}

ExactPmf convolve_iid_pmf(const DistSpec& dist, int n) {
  require(n >= 1, "convolve_iid_pmf: n must be positive");
  const std::vector<Atom> atoms = raw_atoms(dist);
  require(atoms.size() <= 64, "convolve_iid_pmf: more than 64 atoms");
  const double scale_factor = 1.0 / (dist.stddev() * std::sqrt(static_cast<double>(n)));
  std::string tag = "iid_sum(n=" + std::to_string(n) + "," + dist.name() + ")";

  if (const double h = integer_step(atoms); h > 0.0)
    return convolve_integer(atoms, h, n, scale_factor, std::move(tag));

  // No common grid: convolve value lists, merging on the standardized scale.
  const double raw_tol = kMergeTolerance / scale_factor;
  std::vector<Atom> cur{{0.0, 1.0}};
  for (int step = 0; step < n; ++step) {
    const std::uint64_t size = static_cast<std::uint64_t>(cur.size()) * atoms.size();
    if (size > kMaxSupport) throw SizingError("convolve_iid_pmf: support too large", size);
    std::vector<Atom> next;
    next.reserve(size);
    for (const Atom& x : cur)
      for (const Atom& y : atoms) next.push_back({x.value + y.value, x.prob * y.prob});
    cur = merge_sorted(std::move(next), raw_tol);
  }
  for (Atom& a : cur) a.value *= scale_factor;
  return {std::move(cur), std::move(tag)};
}

ExactPmf enumerate_comb(const Eigen::MatrixXd& c) {
  const int n = static_cast<int>(c.rows());
  require(n >= 2 && c.cols() == n, "enumerate_comb: c must be square with n >= 2");
  std::uint64_t count = 1;
  for (int k = 2; k <= n; ++k) count *= static_cast<std::uint64_t>(k);
  if (n > 9) throw SizingError("enumerate_comb: n = " + std::to_string(n) + " exceeds 9", count);
  const double b2 = comb_variance(c, Eigen::MatrixXd::Zero(n, n));
  if (!(b2 > 0.0)) fail(ErrorKind::degenerate, "enumerate_comb: B_n = 0");
  const double inv_b = 1.0 / std::sqrt(b2);
  const double prob = 1.0 / static_cast<double>(count);

  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<Atom> atoms;
  atoms.reserve(count);
  do {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += c(i, perm[i]);
    atoms.push_back({s * inv_b, prob});
  } while (std::next_permutation(perm.begin(), perm.end()));
  return make_pmf(std::move(atoms), "comb_clt(n=" + std::to_string(n) + ")");
}

ExactPmf enumerate_homsum(const HomSum& f, Exec exec) {
  if (f.dist.family() != Family::rademacher)
    fail(ErrorKind::capability, "enumerate_homsum: requires rademacher inputs");
  if (f.n > 20) throw SizingError("enumerate_homsum: n = " + std::to_string(f.n) + " exceeds 20",
                                  std::uint64_t{1} << std::min(f.n, 63));
  validate(Model{f});

  std::vector<std::uint32_t> masks;
  std::vector<double> values;
  for (const TensorEntry& e : f.entries) {
    std::uint32_t m = 0;
    for (int i : e.index) m |= std::uint32_t{1} << i;
    masks.push_back(m);
    values.push_back(e.value);
  }
  double q_factorial = 1.0;
  for (int k = 2; k <= f.q; ++k) q_factorial *= k;

  const std::size_t states = std::size_t{1} << f.n;
  std::vector<Atom> atoms(states);
  const double prob = 1.0 / static_cast<double>(states);
  for_each_index(states, exec, [&](std::size_t s) {
    const auto bits = static_cast<std::uint32_t>(s);
    double w = 0.0;
    for (std::size_t k = 0; k < masks.size(); ++k)
      w += (std::popcount(bits & masks[k]) & 1) ? -values[k] : values[k];
    atoms[s] = {q_factorial * w, prob};
  });
  return make_pmf(std::move(atoms), model_tag(Model{f}));
}

TailRatio exact_tail_ratio(const ExactPmf& pmf, double x, TailReference ref) {
  require(!pmf.atoms.empty(), "exact_tail_ratio: empty pmf");
  TailRatio out;
  const auto first = std::upper_bound(pmf.atoms.begin(), pmf.atoms.end(), x,
                                      [](double v, const Atom& a) { return v < a.value; });
  for (auto it = pmf.atoms.end(); it != first;) out.p_w += (--it)->prob;
  out.p_w = std::min(out.p_w, 1.0);

  TailValue tail;
  if (ref.kind == TailReference::normal) {
    tail = normal_upper_tail(x);
  } else if (x <= 0.0) {
    tail = {1.0, 0.0};
  } else {
    tail = chi_upper_tail(x, ref.d);
  }
  out.p_ref = tail.value;
  out.log_p_ref = tail.log_value;
  out.log_ratio = out.p_w > 0.0 ? std::log(out.p_w) - tail.log_value
                                : -std::numeric_limits<double>::infinity();
  out.log_space = tail.value < 1e-300;
  out.ratio = out.log_space ? std::exp(out.log_ratio) : out.p_w / out.p_ref;
  return out;
}

void write_pmf_csv(const ExactPmf& pmf, std::ostream& out) {
  out << "value,prob\n";
  char buf[64];
  for (const Atom& a : pmf.atoms) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", a.value, a.prob);
    out << buf;
  }
}

}  // namespace pwmd
