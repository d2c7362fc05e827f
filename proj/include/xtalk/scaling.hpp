#pragma once

#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace xtalk {

/// The bracketed base of the logical bound is >= 1 for every distance tried.
class NoThresholdError : public std::runtime_error {
 public:
  NoThresholdError(const std::string& what, double base) : std::runtime_error(what), base_(base) {}
  double base() const { return base_; }

 private:
  double base_;
};

/// p_L ~ A (p_c~ / p_th)^((d+1)/2) for crosstalk, B (p / p_th')^((d+1)/2) for
/// gate noise.
struct ScalingFit {
  double A = 0.01;
  double p_th = 0.01;
  double B = 0.015;
  double p_th_prime = 0.013;

  void validate() const;
};

/// 4 d (d-1) / k + 5 gate times; k in [1, d(d-1)].
double cycle_duration(int d, int k);
/// 8 l^2 + 5 for the sublattice schedule with spacing l.
double cycle_duration_sublattice(int l);

/// (p_g + 3t/(8T) + (p_th'/p_th) p_c~) / p_th'.
double bound_base(double p_g, double T, double p_tilde_c, double t, const ScalingFit& fit = {});

/// max(A, B) * base^((d+1)/2); d odd.
double unified_logical_bound(double p_g, double T, double p_tilde_c, int d, double t, const ScalingFit& fit = {});

/// Effective crosstalk per gate as a function of the parallelism level k.
struct CrosstalkScaling {
  enum class Kind {
    uniform,  // p_c~ = 2 (k - 1) p_c
    fixed,  // p_c~ = p_c regardless of k
  };
  Kind kind = Kind::uniform;
  double p_c = 0.0;

  double tilde(int k) const;
};

enum class ParallelismScheme { optimal, d_minus_1, sublattice };

struct BoundParams {
  double p_g = 0.0;
  double T = std::numeric_limits<double>::infinity();
  CrosstalkScaling crosstalk;
  ParallelismScheme scheme = ParallelismScheme::optimal;
  int sublattice_l = 4;
  ScalingFit fit;

  void validate() const;
};

struct BoundPoint {
  int d = 0;
  int k = 0;  // 0 for the sublattice schedule
  double t = 0.0;
  double p_tilde_c = 0.0;
  double base = 0.0;
  double bound = 0.0;
};

/// argmin over k in [1, d(d-1)] of the bound; ties go to the smaller k.
int optimal_parallelism(double p_g, double T, const CrosstalkScaling& crosstalk, int d, const ScalingFit& fit = {});

BoundPoint evaluate_bound(const BoundParams& params, int d);

/// Odd d from d_min to d_max.
std::vector<BoundPoint> bound_table(const BoundParams& params, int d_min, int d_max);
/// Header d,k,t,p_tilde_c,bound.
std::string bound_table_csv(const std::vector<BoundPoint>& table);

/// Smallest odd d <= d_max whose bound is <= target. Throws NoThresholdError
/// when the base is >= 1 for every d tried, std::runtime_error when the
/// target is not reached by d_max.
int min_distance_for_target(const BoundParams& params, double target, int d_max = 201);

/// Probability of the shortest crosstalk-only failure chains; d divisible by 4.
double shortest_chain_probability(int d, double p_c);
/// Typical-chain estimate; d divisible by 4.
double typical_chain_probability(int d, double p_c);
/// e^{-ln 2 - 1}: typical chains dominate when p_c d^3 exceeds it.
double chain_crossover_constant();

struct RatePoint {
  double p = 0.0;
  double p_l = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct SlopeEstimate {
  double slope = 0.0;
  double slope_stderr = 0.0;
  double intercept = 0.0;  // log p_L at log p = 0
  std::size_t n_points = 0;
};

/// Weighted log-log line through points with p in [p_lo, p_hi]; weights from
/// the CI widths. Needs 3 points with p_l > 0 and ci_low > 0.
SlopeEstimate measure_slope(const std::vector<RatePoint>& points, double p_lo = 0.0,
                            double p_hi = std::numeric_limits<double>::infinity());

/// Weighted fit of p_L = c p^power; returns c.
double fit_fixed_power(const std::vector<RatePoint>& points, double power);

/// p with c p^power = p.
double pseudo_threshold(double c, double power);

struct ThresholdFit {
  double A = 0.0;
  double p_th = 0.0;
};

/// Joint fit of p_L = A (p/p_th)^((d+1)/2) over curves of several distances.
ThresholdFit fit_threshold(const std::vector<std::pair<int, std::vector<RatePoint>>>& curves);

/// Threshold as the crossing of two curves sampled on a common p grid: the
/// first sign change of log(p_L,b / p_L,a), interpolated linearly in log-log.
/// `b` is the larger code, below `a` under threshold. Throws
/// std::invalid_argument when the curves do not cross.
double curve_crossing(const std::vector<RatePoint>& a, const std::vector<RatePoint>& b);

/// Window half a decade below p_th, a quarter decade wide on each side.
std::pair<double, double> below_threshold_window(double p_th);

}  // namespace xtalk
