#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "xtalk/code.hpp"

namespace xtalk {

namespace phys {
inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kElementaryCharge = 1.602176634e-19;  // C
inline constexpr double kVacuumPermittivity = 8.8541878128e-12;  // F/m
inline constexpr double kHbar = 1.054571817e-34;  // J s
inline constexpr double kAtomicMassUnit = 1.66053906660e-27;  // kg
inline constexpr double kYb171Mass = 171.0 * kAtomicMassUnit;
/// Counter-propagating 355 nm Raman beams.
inline constexpr double kRamanDeltaK = 4.0 * kPi / 355e-9;
inline constexpr double kDefaultOmegaX = 2.0 * kPi * 3.0e6;
/// e^2 / (4 pi eps0), J m.
inline constexpr double kCoulomb = kElementaryCharge * kElementaryCharge / (4.0 * kPi * kVacuumPermittivity);
}  // namespace phys

class InstabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

struct IonCrystal {
  std::vector<Vec2> positions;  // meters
  double mass = phys::kYb171Mass;
  double omega_x = phys::kDefaultOmegaX;  // rad/s
  double delta_k = phys::kRamanDeltaK;  // rad/m

  std::size_t size() const { return positions.size(); }
  /// Throws std::invalid_argument on coincident ions or nonpositive constants.
  void validate() const;
};

struct ModeData {
  Eigen::VectorXd omega;  // rad/s, ascending
  Eigen::MatrixXd b;  // b(j, k): ion j in mode k
  Eigen::VectorXd eta;
  Eigen::VectorXd nbar;

  Eigen::Index num_modes() const { return omega.size(); }
};

/// Piecewise-constant amplitudes on equal segments of [0, tau].
struct PulseSequence {
  int n_seg = 1;
  double tau = 1.0;  // s
  double mu = 0.0;  // rad/s
  std::vector<std::uint32_t> ions;  // crystal indices of the addressed ions
  Eigen::MatrixXd amplitudes;  // one row per addressed ion, rad/s

  double segment_length() const { return tau / n_seg; }
  void validate() const;
};

/// Triangular lattice, rows offset by a/2 alternately, row spacing a*sqrt(3)/2.
std::vector<Vec2> triangular_positions(int rows, int cols, double a);

/// Crystal positions of every code qubit (indexed by qubit id).
std::vector<Vec2> embed_layout(const CodeLayout& layout, double a);

double distance(Vec2 p, Vec2 q);

/// Transverse normal modes of the fixed-lattice crystal. Throws
/// InstabilityError if a squared frequency is not positive.
ModeData transverse_modes(const IonCrystal& crystal);

double lamb_dicke(const IonCrystal& crystal, double omega);

/// e^2 / (4 pi eps0 m omega_x^2 a^3).
double epsilon_parameter(const IonCrystal& crystal, double a);

/// Distance a transverse phonon wavepacket travels in time tau, ~ eps*omega_x*a*tau.
double propagation_radius(double epsilon, double omega_x, double a, double tau);

/// Per-segment integrals for one mode frequency:
///   E_a = int_seg sin(mu t) e^{i w t} dt
///   D_a = Im int_seg dt1 int_{seg, t2<t1} dt2 f(t1) conj(f(t2)),  f = sin(mu t) e^{i w t}
/// The phase kernel G (Theta contribution per mode is Omega_i^T G Omega_j) is
///   G_ab = Im(E_max(a,b) conj(E_min(a,b))) for a != b,  G_aa = 2 D_a.
struct SegmentIntegrals {
  Eigen::VectorXcd E;
  Eigen::VectorXd D;
};

SegmentIntegrals segment_integrals(double omega, double mu, double tau, int n_seg);

/// G v in O(n).
Eigen::VectorXd apply_phase_kernel(const SegmentIntegrals& s, const Eigen::VectorXd& v);
/// Dense G.
Eigen::MatrixXd phase_kernel_matrix(const SegmentIntegrals& s);

/// alpha(j, k) for addressed ion j and mode k.
Eigen::MatrixXcd alpha_integrals(const PulseSequence& pulse, const ModeData& modes);

/// Symmetric Theta over the addressed ions, zero diagonal.
Eigen::MatrixXd theta_integrals(const PulseSequence& pulse, const ModeData& modes);

/// Theta rows for the addressed-ion indices in `rows` against every addressed
/// ion; result is |rows| x N. Entries with the row ion itself are zero.
Eigen::MatrixXd theta_rows(const PulseSequence& pulse, const ModeData& modes, const std::vector<int>& rows);

/// Average gate infidelity over the addressed qubits; `target` is the desired
/// Theta (only i < j entries are read).
double gate_infidelity(const Eigen::MatrixXcd& alpha, const Eigen::MatrixXd& theta, const Eigen::MatrixXd& target,
                       const Eigen::VectorXd& nbar);

/// Header `n_seg tau mu`, then `ion a_1 ... a_n` per addressed ion. Numbers are
/// written in shortest round-trip form.
void write_pulse(std::ostream& out, const PulseSequence& pulse);
PulseSequence read_pulse(std::istream& in);
std::string pulse_to_string(const PulseSequence& pulse);
PulseSequence pulse_from_string(const std::string& text);

}  // namespace xtalk
