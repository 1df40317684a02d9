#include "pwmd/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>

#include "pwmd/error.hpp"
#include "pwmd/special.hpp"

namespace pwmd {

namespace {

struct HitCount {
  std::uint64_t hits = 0;
  void merge(const HitCount& o) { hits += o.hits; }
};

struct WeightSums {
  double s1 = 0.0;
  double s2 = 0.0;
  void merge(const WeightSums& o) {
    s1 += o.s1;
    s2 += o.s2;
  }
};

TailValue reference_tail(double x, int d) {
  if (d == 1) return normal_upper_tail(x);
  if (x <= 0.0) return {1.0, 0.0};
  return chi_upper_tail(x, d);
}

void fill_ratio(TailRow& row, int d) {
  row.p_ref = reference_tail(row.x, d).value;
  row.ratio = row.p_hat / row.p_ref;
  row.ratio_ci_lo = row.ci_lo / row.p_ref;
  row.ratio_ci_hi = row.ci_hi / row.p_ref;
}

void plain_interval(TailRow& row, double reps) {
  const double p = row.p_hat;
  row.se = std::sqrt(p * (1.0 - p) / reps);
  if (p * reps < 50.0) {
    const double z2 = kZ95 * kZ95;
    const double denom = 1.0 + z2 / reps;
    const double centre = (p + z2 / (2.0 * reps)) / denom;
    const double half = kZ95 / denom * std::sqrt(p * (1.0 - p) / reps + z2 / (4.0 * reps * reps));
    row.ci_lo = std::max(0.0, std::min(p, centre - half));
    row.ci_hi = std::min(1.0, std::max(p, centre + half));
  } else {
    row.ci_lo = std::max(0.0, p - kZ95 * row.se);
    row.ci_hi = std::min(1.0, p + kZ95 * row.se);
  }
}

double search_tilt(const DistSpec& dist, double target, double direction) {
  const auto [lo, hi] = dist.mgf_domain();
  const double edge = direction > 0 ? hi : lo;
  const auto reached = [&](double theta) { return direction * (dist.log_mgf_derivative(theta) - target) >= 0.0; };

  double inner = 0.0, outer;
  if (std::isfinite(edge)) {
    outer = edge;
  } else {
    outer = direction;
    while (!reached(outer)) {
      inner = outer;
      outer *= 2.0;
      if (std::abs(outer) > 1e8)
        fail(ErrorKind::range, "solve_tilt: target mean " + format_g17(target) + " is not reachable by tilting " + dist.name());
    }
  }
  while (std::abs(outer - inner) > 1e-10) {
    const double mid = 0.5 * (inner + outer);
    if (mid == inner || mid == outer) break;
    (reached(mid) ? outer : inner) = mid;
  }
  const double theta = 0.5 * (inner + outer);
  return std::isfinite(edge) && theta == edge ? inner : theta;
}

}  // namespace

const char* to_string(TailMethod method) noexcept { return method == TailMethod::plain ? "plain" : "tilted"; }

TailMethod tail_method_from_string(const std::string& name) {
  if (name == "plain") return TailMethod::plain;
  if (name == "tilted") return TailMethod::tilted;
  fail(ErrorKind::validation, "unknown tail method '" + name + "'");
}

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double solve_tilt(const DistSpec& dist, double target_mean) {
  if (target_mean == 0.0) return 0.0;
  if (target_mean > 0.0) {
    if (!(target_mean < dist.max_tilted_mean()))
      fail(ErrorKind::range, "solve_tilt: target mean " + format_g17(target_mean) + " is at or beyond sup ψ' = " +
                                 format_g17(dist.max_tilted_mean()) + " for " + dist.name());
    return search_tilt(dist, target_mean, 1.0);
  }
  return search_tilt(dist, target_mean, -1.0);
}

TailRow estimate_tail(const Model& model, double x, std::size_t reps, std::uint64_t seed, TailMethod method,
                      Exec exec, std::optional<double> theta) {
  require(reps >= 2, "estimate_tail: reps must be at least 2");
  require(std::isfinite(x), "estimate_tail: x must be finite");
  TailRow row;
  row.x = x;
  row.bound_shape = std::numeric_limits<double>::quiet_NaN();
  const double n_reps = static_cast<double>(reps);

  if (method == TailMethod::plain) {
    const Sampler sampler(model);
    const int d = sampler.dimension();
    const HitCount count = reduce_replications<HitCount>(reps, exec, [&](std::size_t r, HitCount& acc) {
      CounterRng rng(seed, r);
      if (d == 1) {
        acc.hits += sampler.draw_scalar(rng) > x ? 1 : 0;
      } else {
        std::vector<double> w(static_cast<std::size_t>(d));
        sampler.draw(rng, w);
        double s = 0.0;
        for (double v : w) s += v * v;
        acc.hits += std::sqrt(s) > x ? 1 : 0;
      }
    });
    row.p_hat = static_cast<double>(count.hits) / n_reps;
    plain_interval(row, n_reps);
    fill_ratio(row, d);
    return row;
  }

  const IidSum* iid = std::get_if<IidSum>(&model);
  if (!iid) fail(ErrorKind::capability, "estimate_tail: tilting is only available for iid_sum models, not " + model_tag(model));
  validate(model);
  const DistSpec& dist = iid->dist;
  const int n = iid->n;
  const double root_n = std::sqrt(static_cast<double>(n));
  const double sigma = dist.stddev();
  const double th = theta ? *theta : solve_tilt(dist, x * sigma / root_n);
  const double psi = dist.log_mgf(th);
  const double threshold = x * sigma * root_n;
  const double shift = static_cast<double>(n) * psi;

  const WeightSums sums = reduce_replications<WeightSums>(reps, exec, [&](std::size_t r, WeightSums& acc) {
    CounterRng rng(seed, r);
    const double s = draw_iid_sum(dist, n, th, rng, SumStrategy::closed_form);
    if (s > threshold) {
      const double weight = std::exp(shift - th * s);
      acc.s1 += weight;
      acc.s2 += weight * weight;
    }
  });
  row.theta = th;
  row.p_hat = sums.s1 / n_reps;
  const double var = std::max(0.0, (sums.s2 / n_reps - row.p_hat * row.p_hat) * n_reps / (n_reps - 1.0));
  row.se = std::sqrt(var / n_reps);
  row.ci_lo = std::max(0.0, row.p_hat - kZ95 * row.se);
  row.ci_hi = row.p_hat + kZ95 * row.se;
  fill_ratio(row, 1);
  return row;
}

TailReport ratio_curve(const Model& model, const std::vector<double>& x_grid, std::size_t reps, std::uint64_t seed,
                       TailMethod method, const std::optional<AppDelta>& bound, Exec exec) {
  require(!x_grid.empty(), "ratio_curve: x grid is empty");
  require(std::is_sorted(x_grid.begin(), x_grid.end()), "ratio_curve: x grid must be ascending");
  TailReport report;
  report.reps = reps;
  report.seed = seed;
  report.method = method;
  report.model_tag = model_tag(model);

  std::map<double, double> tilt_cache;
  for (std::size_t k = 0; k < x_grid.size(); ++k) {
    const double x = x_grid[k];
    std::optional<double> theta;
    if (method == TailMethod::tilted) {
      if (const IidSum* iid = std::get_if<IidSum>(&model)) {
        const double target = x * iid->dist.stddev() / std::sqrt(static_cast<double>(iid->n));
        auto it = tilt_cache.find(target);
        if (it == tilt_cache.end()) it = tilt_cache.emplace(target, solve_tilt(iid->dist, target)).first;
        theta = it->second;
      }
    }
    TailRow row = estimate_tail(model, x, reps, stream_key(seed, k), method, exec, theta);
    if (bound) {
      if (x >= 0.0) {
        const BoundReport b = app_bound(*bound, x);
        row.bound_shape = b.shape;
        row.feasible = b.feasible;
      } else {
        row.feasible = false;
      }
    }
    report.rows.push_back(row);
  }
  return report;
}

LogLogFit fit_log_log(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, "fit_log_log: need at least two points");
  const double m = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    require(x[i] > 0.0 && y[i] > 0.0, "fit_log_log: values must be positive");
    sx += std::log(x[i]);
    sy += std::log(y[i]);
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx, dy = std::log(y[i]) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  require(sxx > 0.0, "fit_log_log: abscissas must not all coincide");
  LogLogFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = std::log(y[i]) - (fit.intercept + fit.slope * std::log(x[i]));
    ssr += e * e;
  }
  fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ssr / syy, 0.0, 1.0) : 1.0;
  return fit;
}

double gaussian_noise_floor(std::size_t reps, double p, std::uint64_t seed, Exec exec) {
  const Sample s = sample_w(IidSum{1, DistSpec::gaussian()}, reps, seed, exec);
  return wp_sample_vs_normal(s.column(0), p).distance;
}

namespace {

void finish_scaling(ScalingReport& report) {
  std::vector<double> xs, ys;
  for (const ScalingPoint& pt : report.points) {
    xs.push_back(pt.abscissa);
    ys.push_back(pt.wp_hat);
  }
  const LogLogFit fit = fit_log_log(xs, ys);
  report.fitted_exponent = fit.slope;
  report.fitted_log_intercept = fit.intercept;
  report.r_squared = fit.r_squared;
  const ScalingPoint& last = report.points.back();
  report.floor_dominated = last.wp_hat < 2.0 * last.noise_floor;
}

}  // namespace

ScalingReport wp_scaling(const std::function<Model(int)>& family, const std::vector<int>& n_grid, double p,
                         std::size_t reps, std::uint64_t seed, Exec exec) {
  require(n_grid.size() >= 4, "wp_scaling: the n grid needs at least 4 points");
  require(reps >= 2, "wp_scaling: reps must be at least 2");
  ScalingReport report;
  report.p = p;
  report.reps = reps;
  report.seed = seed;
  for (std::size_t k = 0; k < n_grid.size(); ++k) {
    const Sample s = sample_w(family(n_grid[k]), reps, stream_key(seed, 2 * k), exec);
    ScalingPoint pt;
    pt.abscissa = n_grid[k];
    pt.wp_hat = wp_sample_vs_normal(s.column(0), p).distance;
    pt.noise_floor = gaussian_noise_floor(reps, p, stream_key(seed, 2 * k + 1), exec);
    report.points.push_back(pt);
  }
  finish_scaling(report);
  return report;
}

ScalingReport wp_scaling_in_p(const Model& model, const std::vector<double>& p_grid, std::size_t reps,
                              std::uint64_t seed, Exec exec) {
  require(p_grid.size() >= 4, "wp_scaling_in_p: the p grid needs at least 4 points");
  require(reps >= 2, "wp_scaling_in_p: reps must be at least 2");
  ScalingReport report;
  report.p = p_grid.front();
  report.reps = reps;
  report.seed = seed;
  const std::vector<double> w = sample_w(model, reps, stream_key(seed, 0), exec).column(0);
  const std::vector<double> z = sample_w(IidSum{1, DistSpec::gaussian()}, reps, stream_key(seed, 1), exec).column(0);
  for (double p : p_grid) {
    ScalingPoint pt;
    pt.abscissa = p;
    pt.wp_hat = wp_sample_vs_normal(w, p).distance;
    pt.noise_floor = wp_sample_vs_normal(z, p).distance;
    report.points.push_back(pt);
  }
  finish_scaling(report);
  return report;
}

void write_tail_csv(const TailReport& report, std::ostream& out) {
  out << "x,p_hat,se,ci_lo,ci_hi,p_ref,ratio,ratio_ci_lo,ratio_ci_hi,bound_shape,feasible,theta\n";
  for (const TailRow& r : report.rows) {
    for (double v : {r.x, r.p_hat, r.se, r.ci_lo, r.ci_hi, r.p_ref, r.ratio, r.ratio_ci_lo, r.ratio_ci_hi})
      out << format_g17(v) << ',';
    if (!std::isnan(r.bound_shape)) out << format_g17(r.bound_shape);
    out << ',';
    out << (r.feasible ? "true" : "false") << ',' << format_g17(r.theta) << '\n';
  }
}

void write_scaling_csv(const ScalingReport& report, std::ostream& out) {
  out << "abscissa,wp_hat,noise_floor\n";
  for (const ScalingPoint& pt : report.points)
    out << format_g17(pt.abscissa) << ',' << format_g17(pt.wp_hat) << ',' << format_g17(pt.noise_floor) << '\n';
}

}  // namespace pwmd
