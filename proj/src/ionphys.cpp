#include "xtalk/ionphys.hpp"

#include <charconv>
#include <cmath>
#include <complex>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace xtalk {

namespace {

using cd = std::complex<double>;
constexpr double kSeriesCut = 1e-6;

// int_0^h e^{i nu s} ds
cd phi(double nu, double h) {
  const double th = nu * h;
  if (std::abs(th) < kSeriesCut) {
    const double t2 = th * th;
    return h * cd(1.0 - t2 / 6.0, th / 2.0 - th * t2 / 24.0);
  }
  const double s = std::sin(0.5 * th);
  return h * cd(std::sin(th) / th, 2.0 * s * s / th);
}

// int_0^h ds1 int_0^s1 ds2 e^{i x s1} e^{-i y s2}
cd ordered_double(double x, double y, double h) {
  if (x == y) {
    const double th = x * h;
    const double s = std::sin(0.5 * th);
    double re = 0.5;
    double im = 0.0;
    if (std::abs(th) < 1e-2) {
      const double t2 = th * th;
      re = 0.5 - t2 / 24.0 + t2 * t2 / 720.0 - t2 * t2 * t2 / 40320.0;
      im = th * (1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0 - t2 * t2 * t2 / 362880.0);
    } else {
      re = 2.0 * s * s / (th * th);
      im = (th - std::sin(th)) / (th * th);
    }
    return h * h * cd(re, im);
  }
  const cd i(0.0, 1.0);
  if (std::abs(y) >= std::abs(x)) return (phi(x, h) - phi(x - y, h)) / (i * y);
  return phi(x, h) * phi(-y, h) + (phi(-y, h) - phi(x - y, h)) / (i * x);
}

}  // namespace

void IonCrystal::validate() const {
  if (!(mass > 0.0 && omega_x > 0.0 && delta_k > 0.0)) {
    throw std::invalid_argument("crystal constants must be positive");
  }
  for (std::size_t i = 0; i < positions.size(); ++i) {
    for (std::size_t j = i + 1; j < positions.size(); ++j) {
      if (distance(positions[i], positions[j]) == 0.0) throw std::invalid_argument("coincident ions");
    }
  }
}

void PulseSequence::validate() const {
  if (n_seg < 1) throw std::invalid_argument("n_seg must be >= 1");
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (amplitudes.rows() != static_cast<Eigen::Index>(ions.size()) || amplitudes.cols() != n_seg) {
    throw std::invalid_argument("amplitude matrix does not match ions x n_seg");
  }
}

std::vector<Vec2> triangular_positions(int rows, int cols, double a) {
  if (rows < 1 || cols < 1 || !(a > 0.0)) throw std::invalid_argument("bad triangular lattice shape");
  std::vector<Vec2> out;
  out.reserve(static_cast<std::size_t>(rows) * cols);
  const double dy = a * std::sqrt(3.0) / 2.0;
  for (int r = 0; r < rows; ++r) {
    const double shift = (r % 2) ? 0.5 * a : 0.0;
    for (int c = 0; c < cols; ++c) out.push_back({c * a + shift, r * dy});
  }
  return out;
}

std::vector<Vec2> embed_layout(const CodeLayout& layout, double a) {
  std::vector<Vec2> out;
  out.reserve(layout.num_qubits());
  for (QubitId q = 0; q < layout.num_qubits(); ++q) {
    const auto p = lattice_position(layout.coord(q));
    out.push_back({a * p.x, a * p.y});
  }
  return out;
}

double distance(Vec2 p, Vec2 q) { return std::hypot(p.x - q.x, p.y - q.y); }

ModeData transverse_modes(const IonCrystal& crystal) {
  crystal.validate();
  const auto n = static_cast<Eigen::Index>(crystal.size());
  const double w2 = crystal.omega_x * crystal.omega_x;
  Eigen::MatrixXd K = Eigen::MatrixXd::Constant(n, n, 0.0);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index l = j + 1; l < n; ++l) {
      const double r = distance(crystal.positions[j], crystal.positions[l]);
      const double t = phys::kCoulomb / (crystal.mass * r * r * r);
      K(j, l) = t;
      K(l, j) = t;
    }
  }
  for (Eigen::Index j = 0; j < n; ++j) K(j, j) = w2 - K.row(j).sum();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(K);
  if (solver.info() != Eigen::Success) throw InstabilityError("mode eigendecomposition failed");
  const auto& ev = solver.eigenvalues();
  if (n > 0 && !(ev(0) > 0.0)) {
    std::ostringstream msg;
    msg << "transverse mode with squared frequency " << ev(0) << " rad^2/s^2";
    throw InstabilityError(msg.str());
  }
  ModeData m;
  m.omega = ev.array().sqrt();
  m.b = solver.eigenvectors();
  // Fix each mode's sign so the largest component is positive.
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index arg = 0;
    m.b.col(k).cwiseAbs().maxCoeff(&arg);
    if (m.b(arg, k) < 0.0) m.b.col(k) *= -1.0;
  }
  m.eta.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) m.eta(k) = lamb_dicke(crystal, m.omega(k));
  m.nbar = Eigen::VectorXd::Zero(n);
  return m;
}

double lamb_dicke(const IonCrystal& crystal, double omega) {
  if (!(omega > 0.0)) throw std::invalid_argument("mode frequency must be positive");
  return crystal.delta_k * std::sqrt(phys::kHbar / (2.0 * crystal.mass * omega));
}

double epsilon_parameter(const IonCrystal& crystal, double a) {
  if (!(a > 0.0)) throw std::invalid_argument("spacing must be positive");
  return phys::kCoulomb / (crystal.mass * crystal.omega_x * crystal.omega_x * a * a * a);
}

double propagation_radius(double epsilon, double omega_x, double a, double tau) {
  return epsilon * omega_x * a * tau;
}

SegmentIntegrals segment_integrals(double omega, double mu, double tau, int n_seg) {
  const double h = tau / n_seg;
  const double nu_p = omega + mu;
  const double nu_m = omega - mu;
  const cd c_p(0.0, -0.5);
  const cd c_m(0.0, 0.5);
  const cd phi_p = phi(nu_p, h);
  const cd phi_m = phi(nu_m, h);
  const cd j_pp = ordered_double(nu_p, nu_p, h);
  const cd j_mm = ordered_double(nu_m, nu_m, h);
  const cd j_pm = ordered_double(nu_p, nu_m, h);
  const cd j_mp = ordered_double(nu_m, nu_p, h);
  SegmentIntegrals s;
  s.E.resize(n_seg);
  s.D.resize(n_seg);
  for (int a = 0; a < n_seg; ++a) {
    const double t = a * h;
    s.E(a) = c_p * std::polar(1.0, nu_p * t) * phi_p + c_m * std::polar(1.0, nu_m * t) * phi_m;
    const cd cross = std::polar(1.0, 2.0 * mu * t);
    s.D(a) = 0.25 * (j_pp + j_mm - cross * j_pm - std::conj(cross) * j_mp).imag();
  }
  return s;
}

Eigen::VectorXd apply_phase_kernel(const SegmentIntegrals& s, const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  const Eigen::VectorXd R = s.E.real();
  const Eigen::VectorXd I = s.E.imag();
  Eigen::VectorXd out(n);
  // Lower part: sum over b < a of (I_a R_b - R_a I_b) v_b.
  double pr = 0.0;
  double pi = 0.0;
  for (Eigen::Index a = 0; a < n; ++a) {
    out(a) = I(a) * pr - R(a) * pi + 2.0 * s.D(a) * v(a);
    pr += R(a) * v(a);
    pi += I(a) * v(a);
  }
  // Upper part: sum over b > a of (I_b R_a - R_b I_a) v_b.
  double sr = 0.0;
  double si = 0.0;
  for (Eigen::Index a = n - 1; a >= 0; --a) {
    out(a) += R(a) * si - I(a) * sr;
    sr += R(a) * v(a);
    si += I(a) * v(a);
  }
  return out;
}

Eigen::MatrixXd phase_kernel_matrix(const SegmentIntegrals& s) {
  const Eigen::Index n = s.E.size();
  Eigen::MatrixXd G(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    G(a, a) = 2.0 * s.D(a);
    for (Eigen::Index b = 0; b < a; ++b) {
      const double g = (s.E(a) * std::conj(s.E(b))).imag();
      G(a, b) = g;
      G(b, a) = g;
    }
  }
  return G;
}

namespace {

// c(j, k) = eta_k b_{ion j, k} over the addressed ions.
Eigen::MatrixXd coupling(const PulseSequence& pulse, const ModeData& modes) {
  Eigen::MatrixXd c(static_cast<Eigen::Index>(pulse.ions.size()), modes.num_modes());
  for (std::size_t j = 0; j < pulse.ions.size(); ++j) {
    if (pulse.ions[j] >= modes.b.rows()) throw std::out_of_range("addressed ion outside the crystal");
    c.row(static_cast<Eigen::Index>(j)) = modes.b.row(pulse.ions[j]).cwiseProduct(modes.eta.transpose());
  }
  return c;
}

}  // namespace

Eigen::MatrixXcd alpha_integrals(const PulseSequence& pulse, const ModeData& modes) {
  pulse.validate();
  const Eigen::MatrixXd c = coupling(pulse, modes);
  Eigen::MatrixXcd alpha(c.rows(), c.cols());
  for (Eigen::Index k = 0; k < modes.num_modes(); ++k) {
    const auto s = segment_integrals(modes.omega(k), pulse.mu, pulse.tau, pulse.n_seg);
    const Eigen::VectorXcd proj = pulse.amplitudes.cast<cd>() * s.E;
    for (Eigen::Index j = 0; j < c.rows(); ++j) alpha(j, k) = cd(0.0, -1.0) * c(j, k) * proj(j);
  }
  return alpha;
}

Eigen::MatrixXd theta_rows(const PulseSequence& pulse, const ModeData& modes, const std::vector<int>& rows) {
  pulse.validate();
  const Eigen::MatrixXd c = coupling(pulse, modes);
  const Eigen::Index n_ions = c.rows();
  const auto n_rows = static_cast<Eigen::Index>(rows.size());
  for (int r : rows) {
    if (r < 0 || r >= n_ions) throw std::out_of_range("theta row outside the addressed ions");
  }
  Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(n_rows, n_ions);
  Eigen::MatrixXd W(pulse.n_seg, n_rows);
  for (Eigen::Index k = 0; k < modes.num_modes(); ++k) {
    const auto s = segment_integrals(modes.omega(k), pulse.mu, pulse.tau, pulse.n_seg);
    for (Eigen::Index r = 0; r < n_rows; ++r) {
      W.col(r) = apply_phase_kernel(s, pulse.amplitudes.row(rows[r]).transpose());
    }
    const Eigen::MatrixXd P = pulse.amplitudes * W;  // n_ions x n_rows
    for (Eigen::Index r = 0; r < n_rows; ++r) {
      const double cr = c(rows[r], k);
      theta.row(r) += cr * c.col(k).cwiseProduct(P.col(r)).transpose();
    }
  }
  for (Eigen::Index r = 0; r < n_rows; ++r) theta(r, rows[r]) = 0.0;
  return theta;
}

Eigen::MatrixXd theta_integrals(const PulseSequence& pulse, const ModeData& modes) {
  std::vector<int> all(pulse.ions.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  const Eigen::MatrixXd t = theta_rows(pulse, modes, all);
  Eigen::MatrixXd sym = 0.5 * (t + t.transpose());
  sym.diagonal().setZero();
  return sym;
}

double gate_infidelity(const Eigen::MatrixXcd& alpha, const Eigen::MatrixXd& theta, const Eigen::MatrixXd& target,
                       const Eigen::VectorXd& nbar) {
  const Eigen::Index n = theta.rows();
  if (theta.cols() != n || target.rows() != n || target.cols() != n || alpha.rows() != n ||
      alpha.cols() != nbar.size()) {
    throw std::invalid_argument("inconsistent infidelity inputs");
  }
  double sum = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index k = 0; k < alpha.cols(); ++k) sum += std::norm(alpha(j, k)) * (2.0 * nbar(k) + 1.0);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = theta(i, j) - target(i, j);
      sum += d * d;
    }
  }
  // D/(D+1) with D = 2^n.
  return sum / (1.0 + std::ldexp(1.0, -static_cast<int>(n)));
}

namespace {

void put_double(std::ostream& out, double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  out.write(buf, res.ptr - buf);
}

double parse_double(const std::string& tok) {
  double x = 0.0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), x);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw std::invalid_argument("bad number in pulse file: " + tok);
  }
  return x;
}

}  // namespace

void write_pulse(std::ostream& out, const PulseSequence& pulse) {
  pulse.validate();
  out << pulse.n_seg << ' ';
  put_double(out, pulse.tau);
  out << ' ';
  put_double(out, pulse.mu);
  out << '\n';
  for (std::size_t j = 0; j < pulse.ions.size(); ++j) {
    out << pulse.ions[j];
    for (int a = 0; a < pulse.n_seg; ++a) {
      out << ' ';
      put_double(out, pulse.amplitudes(static_cast<Eigen::Index>(j), a));
    }
    out << '\n';
  }
}

PulseSequence read_pulse(std::istream& in) {
  PulseSequence p;
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty pulse file");
  {
    std::istringstream head(line);
    std::string n, tau, mu, extra;
    if (!(head >> n >> tau >> mu) || (head >> extra)) throw std::invalid_argument("bad pulse header");
    p.n_seg = std::stoi(n);
    p.tau = parse_double(tau);
    p.mu = parse_double(mu);
  }
  if (p.n_seg < 1) throw std::invalid_argument("n_seg must be >= 1");
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    p.ions.push_back(static_cast<std::uint32_t>(std::stoul(tok)));
    std::vector<double> amps;
    while (ls >> tok) amps.push_back(parse_double(tok));
    if (amps.size() != static_cast<std::size_t>(p.n_seg)) throw std::invalid_argument("amplitude count != n_seg");
    rows.push_back(std::move(amps));
  }
  p.amplitudes.resize(static_cast<Eigen::Index>(rows.size()), p.n_seg);
  for (std::size_t j = 0; j < rows.size(); ++j) {
    for (int a = 0; a < p.n_seg; ++a) p.amplitudes(static_cast<Eigen::Index>(j), a) = rows[j][a];
  }
  return p;
}

std::string pulse_to_string(const PulseSequence& pulse) {
  std::ostringstream out;
  write_pulse(out, pulse);
  return out.str();
}

PulseSequence pulse_from_string(const std::string& text) {
  std::istringstream in(text);
  return read_pulse(in);
}

}  // namespace xtalk
