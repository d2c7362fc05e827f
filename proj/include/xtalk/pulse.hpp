#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "xtalk/code.hpp"
#include "xtalk/ionphys.hpp"

namespace xtalk {

class NullSpaceExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InfeasibleTarget : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A constraint that held earlier in the projection chain was broken by a
/// later solve.
class DesignCheckFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TargetPair {
  std::uint32_t i = 0;  // crystal ion ids
  std::uint32_t j = 0;
  double theta = phys::kPi / 4;
};

/// Desired phases; unlisted pairs among the addressed ions target zero.
struct GateTargets {
  std::vector<TargetPair> pairs;

  /// Addressed ions in first-appearance order.
  std::vector<std::uint32_t> ions() const;
  /// Throws std::invalid_argument on repeated ions or |theta| != pi/4.
  void validate_pairwise() const;
};

struct NoiseSpec {
  double amp_fraction = 0.01;
  double detuning_halfwidth = 2.0 * phys::kPi * 500.0;  // rad/s
  int n_samples = 100;
  std::uint64_t seed = 0;
  int workers = 1;

  void validate() const;
};

struct EaseOptions {
  double null_rtol = 1e-10;
  double amplitude_cap = std::numeric_limits<double>::infinity();  // rad/s
  /// Relative tolerance for the per-step projection-chain check.
  double chain_tol = 1e-8;
  /// Also null the first derivative of every displacement with respect to the
  /// detuning (2K extra rows), for first-order robustness to frequency drift.
  bool robust_detuning = false;
};

/// Null space of M (columns orthonormal) by singular-value thresholding at
/// rtol * sigma_max.
Eigen::MatrixXd null_space(const Eigen::MatrixXd& M, double rtol);

/// Real constraint matrix for vanishing displacement: Re and Im rows of the
/// segment integrals for every mode (2K x n_seg).
Eigen::MatrixXd displacement_constraints(const ModeData& modes, double mu, double tau, int n_seg);

/// d/dmu of the segment integrals: rows Re and Im of
/// int_seg t cos(mu t) e^{i w t} dt, scaled by 1/tau (2K x n_seg).
Eigen::MatrixXd detuning_derivative_constraints(const ModeData& modes, double mu, double tau, int n_seg);

/// Midway between the two highest mode frequencies.
double default_detuning(const ModeData& modes);

/// Arbitrary simultaneous entangling phases by sequential null-space
/// projection. Addressed ions are those in `targets`.
PulseSequence ease_design(const ModeData& modes, const GateTargets& targets, double mu, double tau, int n_seg,
                          const EaseOptions& options = {});

/// Single pair with equal amplitudes on both ions.
PulseSequence single_pair_design(const ModeData& modes, std::uint32_t ion_i, std::uint32_t ion_j, double theta,
                                 double mu, double tau, int n_seg, const EaseOptions& options = {});

/// Independent re-evaluation of a design through alpha/Theta integrals.
struct DesignResidual {
  double alpha_scale = 0.0;  // max|Omega| * tau / n_seg
  double alpha_max = 0.0;  // max |alpha_jk|
  double theta_target_err = 0.0;  // max |Theta_ij - theta_ij| over targeted pairs
  double theta_untargeted_max = 0.0;  // max |Theta_ij| over other addressed pairs
  double max_rabi = 0.0;  // rad/s
  double mean_rabi = 0.0;  // mean |Omega| over addressed ions and segments

  double alpha_relative() const { return alpha_scale > 0 ? alpha_max / alpha_scale : 0.0; }
};

DesignResidual verify_design(const PulseSequence& pulse, const ModeData& modes, const GateTargets& targets);

/// Pairs of one CNOT layer as targets on crystal ions (crystal index = qubit id).
GateTargets layer_targets(const std::vector<Cnot>& layer, double theta = phys::kPi / 4);

struct LayerDesign {
  PulseSequence pulse;
  GateTargets targets;
  DesignResidual residual;
};

/// EASE over a full layer; an empty layer gives an empty pulse.
LayerDesign design_parallel_layer(const ModeData& modes, const std::vector<Cnot>& layer, double mu, double tau,
                                  int n_seg, const EaseOptions& options = {});

struct BoundaryScale {
  std::vector<double> scale;  // per pair
  std::vector<double> theta_unscaled;  // per pair, with the shared shape
  std::vector<double> theta_target;  // +-pi/4, sign of the unscaled phase
};

/// Per-pair amplitude factors making the shared shape reach |Theta| = pi/4.
/// Throws InfeasibleTarget when a pair's phase is below `floor`.
BoundaryScale rescale_for_boundary(const Eigen::VectorXd& shape, double mu, double tau,
                                   const std::vector<std::pair<std::uint32_t, std::uint32_t>>& pairs,
                                   const ModeData& modes, double floor = 1e-9);

/// Applies `shape * scale[p]` to both ions of every pair.
PulseSequence transplant(const Eigen::VectorXd& shape, double mu, double tau,
                         const std::vector<std::pair<std::uint32_t, std::uint32_t>>& pairs,
                         const std::vector<double>& scale);

struct PairCrosstalk {
  std::uint32_t ion_i = 0;
  std::uint32_t ion_j = 0;
  double r_over_a = 0.0;
  bool targeted = false;
  double theta_nominal = 0.0;
  double pc_intrinsic = 0.0;  // theta_nominal^2
  double theta_mean = 0.0;
  double delta_theta = 0.0;  // sample standard deviation
  double pc_noise = 0.0;  // delta_theta^2
  double pc_mean = 0.0;  // mean of Theta^2 over samples
};

struct DistanceBin {
  double r_over_a = 0.0;  // rounded bin centre
  std::size_t count = 0;
  double pc_intrinsic = 0.0;
  double pc_noise = 0.0;
  double pc_mean = 0.0;
};

struct CrosstalkReport {
  std::vector<PairCrosstalk> pairs;
  /// Mean noisy infidelity per targeted gate (order of the targets).
  std::vector<double> gate_infidelity;
  /// Parts of the mean infidelity: 0.8 (Theta - theta)^2 and the vacuum
  /// displacement term 0.8 sum_k (|alpha_ik|^2 + |alpha_jk|^2).
  std::vector<double> gate_phase_part;
  std::vector<double> gate_displacement;
  double nominal_detuning = 0.0;

  /// Untargeted pairs only.
  std::vector<DistanceBin> bins() const;
  double mean_untargeted_pc() const;
  double mean_gate_infidelity() const;
  /// Mean infidelity if every mode had occupation nbar.
  double mean_gate_infidelity_at(double nbar) const;
  std::string to_csv() const;
};

/// Monte Carlo over amplitude and detuning noise. `rows` selects addressed-ion
/// indices whose pairs are reported (all pairs among addressed ions when
/// empty). Results do not depend on spec.workers.
CrosstalkReport sample_noisy_crosstalk(const PulseSequence& pulse, const ModeData& modes,
                                       const std::vector<Vec2>& positions, double a, const GateTargets& targets,
                                       const NoiseSpec& spec, const std::vector<int>& rows = {});

struct PowerLawFit {
  double c = 0.0;
  double gamma = 0.0;  // p = c (r/a)^-gamma
  double residual = 0.0;  // RMS of log residuals
  double gamma_stderr = 0.0;
  std::size_t n_points = 0;
};

/// Least squares on log p vs log(r/a) over points with r/a >= r_min.
PowerLawFit fit_power_law(const std::vector<std::pair<double, double>>& points, double r_min);

// Regime drivers shared by the CLI and the acceptance checks.

struct RegimeParams {
  int d = 5;
  double a = 5e-6;
  double tau = 500e-6;
  int n_seg = 500;
  int layer = 0;
  double omega_x = phys::kDefaultOmegaX;
  /// Detuning; NaN selects default_detuning.
  double mu = std::numeric_limits<double>::quiet_NaN();
  /// Detuning as an offset below the top mode in units of the mode bandwidth;
  /// used when set and mu is NaN.
  double mu_band_offset = std::numeric_limits<double>::quiet_NaN();
  EaseOptions ease;
  NoiseSpec noise;
};

struct RegimeResult {
  CodeLayout layout;
  IonCrystal crystal;
  ModeData modes;
  PulseSequence pulse;
  GateTargets targets;
  DesignResidual residual;
  CrosstalkReport report;
  std::vector<double> scales;  // fast regime only
  std::pair<std::uint32_t, std::uint32_t> central_pair{0, 0};  // fast regime only
  double epsilon = 0.0;
};

/// EASE over a full layer of the d-code crystal and noise sampling of all pairs.
RegimeResult run_slow_regime(const RegimeParams& params);

/// Single-pair design at the crystal centre, transplanted with boundary
/// rescaling to the whole layer; crosstalk reported for the central pair's
/// ions against every other addressed ion.
RegimeResult run_fast_regime(const RegimeParams& params);

/// Detuning resolved from RegimeParams.
double resolve_detuning(const RegimeParams& params, const ModeData& modes);

}  // namespace xtalk
