#include "xtalk/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace xtalk {

namespace {

void require_odd(int d) {
  if (d < 3 || d % 2 == 0) throw std::invalid_argument("d must be odd and >= 3");
}

void require_multiple_of_4(int d) {
  if (d < 4 || d % 4 != 0) throw std::invalid_argument("chain estimates need d divisible by 4");
}

bool valid_rate(double p) { return p >= 0.0 && p <= 1.0; }

// log of 2d * C(d, d/2), shared by both chain estimates.
double log_row_choices(int d) {
  return std::log(2.0 * d) + std::lgamma(d + 1.0) - 2.0 * std::lgamma(d / 2 + 1.0);
}

// 95% intervals: half the log-width over 1.96.
constexpr double kTwoZ = 2.0 * 1.959963984540054;

struct LogPoint {
  double x;
  double y;
  double w;
};

std::vector<LogPoint> usable(const std::vector<RatePoint>& points, double p_lo, double p_hi) {
  std::vector<LogPoint> out;
  for (const auto& pt : points) {
    if (pt.p < p_lo || pt.p > p_hi) continue;
    if (!(pt.p > 0.0 && pt.p_l > 0.0 && pt.ci_low > 0.0 && pt.ci_high > pt.ci_low)) continue;
    if (!std::isfinite(pt.ci_high)) continue;
    const double sigma = (std::log(pt.ci_high) - std::log(pt.ci_low)) / kTwoZ;
    out.push_back({std::log(pt.p), std::log(pt.p_l), 1.0 / (sigma * sigma)});
  }
  return out;
}

}  // namespace

void ScalingFit::validate() const {
  for (double v : {A, p_th, B, p_th_prime}) {
    if (!(v > 0.0 && v < 1.0)) throw std::invalid_argument("scaling fit constants must lie in (0, 1)");
  }
}

double cycle_duration(int d, int k) {
  if (d < 2) throw std::invalid_argument("d must be >= 2");
  if (k < 1 || k > d * (d - 1)) throw std::invalid_argument("k must lie in [1, d(d-1)]");
  return 4.0 * d * (d - 1) / k + 5.0;
}

double cycle_duration_sublattice(int l) {
  if (l < 1) throw std::invalid_argument("sublattice spacing must be >= 1");
  return 8.0 * l * l + 5.0;
}

double bound_base(double p_g, double T, double p_tilde_c, double t, const ScalingFit& fit) {
  const double idle = std::isinf(T) ? 0.0 : 3.0 * t / (8.0 * T);
  return (p_g + idle + fit.p_th_prime / fit.p_th * p_tilde_c) / fit.p_th_prime;
}

double unified_logical_bound(double p_g, double T, double p_tilde_c, int d, double t, const ScalingFit& fit) {
  require_odd(d);
  fit.validate();
  if (!valid_rate(p_g) || !(p_tilde_c >= 0.0) || !(T > 0.0) || !(t >= 0.0)) {
    throw std::invalid_argument("invalid rate, time or coherence time");
  }
  return std::max(fit.A, fit.B) * std::pow(bound_base(p_g, T, p_tilde_c, t, fit), 0.5 * (d + 1));
}

double CrosstalkScaling::tilde(int k) const {
  return kind == Kind::uniform ? 2.0 * (k - 1) * p_c : p_c;
}

void BoundParams::validate() const {
  if (!valid_rate(p_g)) throw std::invalid_argument("p_g must lie in [0, 1]");
  if (!(T > 0.0)) throw std::invalid_argument("T must be positive");
  if (!valid_rate(crosstalk.p_c)) throw std::invalid_argument("p_c must lie in [0, 1]");
  if (scheme == ParallelismScheme::sublattice && sublattice_l < 1) {
    throw std::invalid_argument("sublattice spacing must be >= 1");
  }
  fit.validate();
}

int optimal_parallelism(double p_g, double T, const CrosstalkScaling& crosstalk, int d, const ScalingFit& fit) {
  require_odd(d);
  // The bound is increasing in the base at fixed d, so scanning the base suffices.
  int best_k = 1;
  double best = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= d * (d - 1); ++k) {
    const double b = bound_base(p_g, T, crosstalk.tilde(k), cycle_duration(d, k), fit);
    if (b < best) {
      best = b;
      best_k = k;
    }
  }
  return best_k;
}

BoundPoint evaluate_bound(const BoundParams& params, int d) {
  require_odd(d);
  params.validate();
  BoundPoint pt;
  pt.d = d;
  switch (params.scheme) {
    case ParallelismScheme::optimal:
      pt.k = optimal_parallelism(params.p_g, params.T, params.crosstalk, d, params.fit);
      break;
    case ParallelismScheme::d_minus_1:
      pt.k = d - 1;
      break;
    case ParallelismScheme::sublattice:
      pt.k = 0;
      break;
  }
  if (pt.k > 0) {
    pt.t = cycle_duration(d, pt.k);
    pt.p_tilde_c = params.crosstalk.tilde(pt.k);
  } else {
    pt.t = cycle_duration_sublattice(params.sublattice_l);
    pt.p_tilde_c = params.crosstalk.p_c;
  }
  pt.base = bound_base(params.p_g, params.T, pt.p_tilde_c, pt.t, params.fit);
  pt.bound = unified_logical_bound(params.p_g, params.T, pt.p_tilde_c, d, pt.t, params.fit);
  return pt;
}

std::vector<BoundPoint> bound_table(const BoundParams& params, int d_min, int d_max) {
  if (d_min % 2 == 0) ++d_min;
  d_min = std::max(d_min, 3);
  if (d_max < d_min) throw std::invalid_argument("empty distance range");
  std::vector<BoundPoint> out;
  for (int d = d_min; d <= d_max; d += 2) out.push_back(evaluate_bound(params, d));
  return out;
}

std::string bound_table_csv(const std::vector<BoundPoint>& table) {
  std::ostringstream out;
  out.precision(10);
  out << "d,k,t,p_tilde_c,bound\n";
  for (const auto& pt : table) out << pt.d << ',' << pt.k << ',' << pt.t << ',' << pt.p_tilde_c << ',' << pt.bound << '\n';
  return out.str();
}

int min_distance_for_target(const BoundParams& params, double target, int d_max) {
  if (!(target > 0.0)) throw std::invalid_argument("target must be positive");
  double min_base = std::numeric_limits<double>::infinity();
  for (int d = 3; d <= d_max; d += 2) {
    const auto pt = evaluate_bound(params, d);
    min_base = std::min(min_base, pt.base);
    if (pt.bound <= target) return d;
  }
  if (min_base >= 1.0) {
    std::ostringstream msg;
    msg << "no threshold: bound base " << min_base << " >= 1 for every d <= " << d_max;
    throw NoThresholdError(msg.str(), min_base);
  }
  std::ostringstream msg;
  msg << "target " << target << " not reached for d <= " << d_max;
  throw std::runtime_error(msg.str());
}

double shortest_chain_probability(int d, double p_c) {
  require_multiple_of_4(d);
  if (p_c == 0.0) return 0.0;
  const double pairings = std::lgamma(d / 2 + 1.0) - std::lgamma(d / 4 + 1.0) - (d / 4) * std::log(2.0);
  return std::exp(log_row_choices(d) + pairings + (d / 4) * std::log(p_c));
}

double typical_chain_probability(int d, double p_c) {
  require_multiple_of_4(d);
  if (p_c == 0.0) return 0.0;
  return std::exp(log_row_choices(d) + (d / 2) * std::log(static_cast<double>(d) * d * p_c));
}

double chain_crossover_constant() { return std::exp(-std::log(2.0) - 1.0); }

SlopeEstimate measure_slope(const std::vector<RatePoint>& points, double p_lo, double p_hi) {
  const auto pts = usable(points, p_lo, p_hi);
  if (pts.size() < 3) throw std::invalid_argument("slope needs at least 3 points with nonzero rate in the window");
  double sw = 0.0;
  double sx = 0.0;
  double sy = 0.0;
  for (const auto& q : pts) {
    sw += q.w;
    sx += q.w * q.x;
    sy += q.w * q.y;
  }
  const double mx = sx / sw;
  const double my = sy / sw;
  double sxx = 0.0;
  double sxy = 0.0;
  for (const auto& q : pts) {
    sxx += q.w * (q.x - mx) * (q.x - mx);
    sxy += q.w * (q.x - mx) * (q.y - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("slope needs distinct p values");
  SlopeEstimate out;
  out.slope = sxy / sxx;
  out.intercept = my - out.slope * mx;
  out.slope_stderr = std::sqrt(1.0 / sxx);
  out.n_points = pts.size();
  return out;
}

double fit_fixed_power(const std::vector<RatePoint>& points, double power) {
  const auto pts = usable(points, 0.0, std::numeric_limits<double>::infinity());
  if (pts.empty()) throw std::invalid_argument("fixed-power fit needs a point with nonzero rate");
  double sw = 0.0;
  double s = 0.0;
  for (const auto& q : pts) {
    sw += q.w;
    s += q.w * (q.y - power * q.x);
  }
  return std::exp(s / sw);
}

double pseudo_threshold(double c, double power) {
  if (!(c > 0.0) || power == 1.0) throw std::invalid_argument("pseudo-threshold needs c > 0 and power != 1");
  return std::pow(c, -1.0 / (power - 1.0));
}

ThresholdFit fit_threshold(const std::vector<std::pair<int, std::vector<RatePoint>>>& curves) {
  // log p_L - m log p = log A - m log p_th, linear in (log A, log p_th).
  double s11 = 0.0;
  double s12 = 0.0;
  double s22 = 0.0;
  double r1 = 0.0;
  double r2 = 0.0;
  std::size_t n = 0;
  for (const auto& [d, pts] : curves) {
    const double m = 0.5 * (d + 1);
    for (const auto& q : usable(pts, 0.0, std::numeric_limits<double>::infinity())) {
      const double z = q.y - m * q.x;
      s11 += q.w;
      s12 -= q.w * m;
      s22 += q.w * m * m;
      r1 += q.w * z;
      r2 -= q.w * m * z;
      ++n;
    }
  }
  const double det = s11 * s22 - s12 * s12;
  if (n < 2 || !(det > 1e-12 * s11 * s22)) throw std::invalid_argument("threshold fit needs two distances");
  const double logA = (r1 * s22 - s12 * r2) / det;
  const double logp = (s11 * r2 - s12 * r1) / det;
  return {std::exp(logA), std::exp(logp)};
}

double curve_crossing(const std::vector<RatePoint>& a, const std::vector<RatePoint>& b) {
  if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("crossing needs two curves on one grid");
  double prev_x = 0.0;
  double prev_g = 0.0;
  bool have_prev = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].p != b[i].p) throw std::invalid_argument("crossing needs a common p grid");
    if (!(a[i].p_l > 0.0 && b[i].p_l > 0.0)) {
      have_prev = false;
      continue;
    }
    const double x = std::log(a[i].p);
    const double g = std::log(b[i].p_l) - std::log(a[i].p_l);
    if (have_prev && prev_g < 0.0 && g >= 0.0) return std::exp(prev_x + (x - prev_x) * (-prev_g) / (g - prev_g));
    prev_x = x;
    prev_g = g;
    have_prev = true;
  }
  throw std::invalid_argument("curves do not cross on this grid");
}

std::pair<double, double> below_threshold_window(double p_th) {
  return {p_th * std::pow(10.0, -0.75), p_th * std::pow(10.0, -0.25)};
}

}  // namespace xtalk
