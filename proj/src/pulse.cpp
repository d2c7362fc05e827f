#include "xtalk/pulse.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include "xtalk/rng.hpp"

namespace xtalk {

namespace {

using cd = std::complex<double>;

struct ModeTables {
  Eigen::MatrixXd R;  // n x K
  Eigen::MatrixXd I;
  Eigen::MatrixXd D;
  std::vector<SegmentIntegrals> segs;
};

ModeTables mode_tables(const ModeData& modes, double mu, double tau, int n_seg) {
  const auto K = modes.num_modes();
  ModeTables t;
  t.R.resize(n_seg, K);
  t.I.resize(n_seg, K);
  t.D.resize(n_seg, K);
  t.segs.reserve(static_cast<std::size_t>(K));
  for (Eigen::Index k = 0; k < K; ++k) {
    t.segs.push_back(segment_integrals(modes.omega(k), mu, tau, n_seg));
    t.R.col(k) = t.segs.back().E.real();
    t.I.col(k) = t.segs.back().E.imag();
    t.D.col(k) = t.segs.back().D;
  }
  return t;
}

// sum_k w_k G_k as a dense matrix.
Eigen::MatrixXd weighted_kernel(const ModeTables& t, const Eigen::VectorXd& w) {
  const Eigen::MatrixXd L = t.I * w.asDiagonal() * t.R.transpose() - t.R * w.asDiagonal() * t.I.transpose();
  const Eigen::Index n = L.rows();
  Eigen::MatrixXd M(n, n);
  for (Eigen::Index b = 0; b < n; ++b) {
    for (Eigen::Index a = b + 1; a < n; ++a) {
      M(a, b) = L(a, b);
      M(b, a) = L(a, b);
    }
  }
  M.diagonal() = 2.0 * t.D * w;
  return M;
}

// [G_k v]_k as columns.
Eigen::MatrixXd kernel_images(const ModeTables& t, const Eigen::VectorXd& v) {
  Eigen::MatrixXd out(v.size(), static_cast<Eigen::Index>(t.segs.size()));
  for (std::size_t k = 0; k < t.segs.size(); ++k) {
    out.col(static_cast<Eigen::Index>(k)) = apply_phase_kernel(t.segs[k], v);
  }
  return out;
}

Eigen::RowVectorXd coupling_row(const ModeData& modes, std::uint32_t ion) {
  if (ion >= modes.b.rows()) throw std::out_of_range("ion outside the crystal");
  return modes.b.row(ion).cwiseProduct(modes.eta.transpose());
}

std::string describe(const char* what, std::uint32_t ion, Eigen::Index rows, Eigen::Index dim) {
  std::ostringstream msg;
  msg << what << " for ion " << ion << " (" << rows << " constraints on a " << dim
      << "-dimensional null space); increase n_seg";
  return msg.str();
}

// One pass over the modes producing Theta rows, selected pair phases and alpha.
struct Evaluation {
  Eigen::MatrixXd theta_rows;  // |rows| x N
  std::vector<double> pair_theta;
  Eigen::MatrixXcd alpha;  // N x K
};

Evaluation evaluate(const PulseSequence& pulse, const ModeData& modes, const std::vector<int>& rows,
                    const std::vector<std::pair<int, int>>& pairs, bool want_alpha) {
  const auto N = static_cast<Eigen::Index>(pulse.ions.size());
  const auto K = modes.num_modes();
  Eigen::MatrixXd c(N, K);
  for (Eigen::Index j = 0; j < N; ++j) c.row(j) = coupling_row(modes, pulse.ions[j]);
  Evaluation ev;
  ev.theta_rows = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), N);
  ev.pair_theta.assign(pairs.size(), 0.0);
  if (want_alpha) ev.alpha.resize(N, K);
  Eigen::MatrixXd W(pulse.n_seg, static_cast<Eigen::Index>(rows.size()));
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto s = segment_integrals(modes.omega(k), pulse.mu, pulse.tau, pulse.n_seg);
    if (!rows.empty()) {
      for (std::size_t r = 0; r < rows.size(); ++r) {
        W.col(static_cast<Eigen::Index>(r)) = apply_phase_kernel(s, pulse.amplitudes.row(rows[r]).transpose());
      }
      const Eigen::MatrixXd P = pulse.amplitudes * W;
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto ri = static_cast<Eigen::Index>(r);
        ev.theta_rows.row(ri) += c(rows[r], k) * c.col(k).cwiseProduct(P.col(ri)).transpose();
      }
    }
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const auto [i, j] = pairs[p];
      const Eigen::VectorXd g = apply_phase_kernel(s, pulse.amplitudes.row(i).transpose());
      ev.pair_theta[p] += c(i, k) * c(j, k) * pulse.amplitudes.row(j).dot(g);
    }
    if (want_alpha) {
      const Eigen::VectorXcd proj = pulse.amplitudes.cast<cd>() * s.E;
      for (Eigen::Index j = 0; j < N; ++j) ev.alpha(j, k) = cd(0.0, -1.0) * c(j, k) * proj(j);
    }
  }
  return ev;
}

struct TargetIndex {
  std::map<std::uint32_t, int> row_of;  // crystal ion -> addressed row
  std::vector<std::pair<int, int>> pairs;  // addressed rows of each target
};

TargetIndex index_targets(const PulseSequence& pulse, const GateTargets& targets) {
  TargetIndex t;
  for (std::size_t j = 0; j < pulse.ions.size(); ++j) t.row_of[pulse.ions[j]] = static_cast<int>(j);
  for (const auto& tp : targets.pairs) {
    const auto a = t.row_of.find(tp.i);
    const auto b = t.row_of.find(tp.j);
    if (a == t.row_of.end() || b == t.row_of.end()) throw std::invalid_argument("target ion is not addressed");
    t.pairs.push_back({a->second, b->second});
  }
  return t;
}

}  // namespace

std::vector<std::uint32_t> GateTargets::ions() const {
  std::vector<std::uint32_t> out;
  for (const auto& p : pairs) {
    for (auto q : {p.i, p.j}) {
      if (std::find(out.begin(), out.end(), q) == out.end()) out.push_back(q);
    }
  }
  return out;
}

void GateTargets::validate_pairwise() const {
  std::vector<std::uint32_t> seen;
  for (const auto& p : pairs) {
    if (p.i == p.j) throw std::invalid_argument("target pair repeats an ion");
    if (std::abs(std::abs(p.theta) - phys::kPi / 4) > 1e-12) throw std::invalid_argument("|theta| must be pi/4");
    for (auto q : {p.i, p.j}) {
      if (std::find(seen.begin(), seen.end(), q) != seen.end()) {
        throw std::invalid_argument("ion appears in two gates of one layer");
      }
      seen.push_back(q);
    }
  }
}

void NoiseSpec::validate() const {
  if (!(amp_fraction >= 0.0)) throw std::invalid_argument("amp_fraction must be >= 0");
  if (!(detuning_halfwidth >= 0.0)) throw std::invalid_argument("detuning_halfwidth must be >= 0");
  if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
}

Eigen::MatrixXd null_space(const Eigen::MatrixXd& M, double rtol) {
  const Eigen::Index n = M.cols();
  if (M.rows() == 0) return Eigen::MatrixXd::Identity(n, n);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double cut = rtol * (sv.size() ? sv(0) : 0.0);
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > cut) ++rank;
  if (sv.size() && sv(0) == 0.0) rank = 0;
  return svd.matrixV().rightCols(n - rank);
}

Eigen::MatrixXd displacement_constraints(const ModeData& modes, double mu, double tau, int n_seg) {
  const auto K = modes.num_modes();
  Eigen::MatrixXd A(2 * K, n_seg);
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto s = segment_integrals(modes.omega(k), mu, tau, n_seg);
    A.row(2 * k) = s.E.real().transpose();
    A.row(2 * k + 1) = s.E.imag().transpose();
  }
  return A;
}

namespace {

// int_0^h s e^{i nu s} ds
cd first_moment(double nu, double h) {
  const double th = nu * h;
  if (std::abs(th) < 0.1) {
    // sum_n (i th)^n / (n! (n + 2))
    cd term(1.0, 0.0);
    cd sum(0.0, 0.0);
    for (int n = 0; n < 14; ++n) {
      sum += term / static_cast<double>(n + 2);
      term *= cd(0.0, th) / static_cast<double>(n + 1);
    }
    return h * h * sum;
  }
  const cd e = std::polar(1.0, th);
  return (e * cd(1.0, -th) - 1.0) / (nu * nu);
}

cd zeroth_moment(double nu, double h) {
  const double th = nu * h;
  if (std::abs(th) < 1e-6) return h * cd(1.0 - th * th / 6.0, th / 2.0);
  const double s = std::sin(0.5 * th);
  return h * cd(std::sin(th) / th, 2.0 * s * s / th);
}

}  // namespace

Eigen::MatrixXd detuning_derivative_constraints(const ModeData& modes, double mu, double tau, int n_seg) {
  const auto K = modes.num_modes();
  const double h = tau / n_seg;
  Eigen::MatrixXd A(2 * K, n_seg);
  for (Eigen::Index k = 0; k < K; ++k) {
    const double nu_p = modes.omega(k) + mu;
    const double nu_m = modes.omega(k) - mu;
    const cd m0p = zeroth_moment(nu_p, h);
    const cd m0m = zeroth_moment(nu_m, h);
    const cd m1p = first_moment(nu_p, h);
    const cd m1m = first_moment(nu_m, h);
    for (int a = 0; a < n_seg; ++a) {
      const double t = a * h;
      // t cos(mu t) e^{i w t} = (t/2)(e^{i nu+ t} + e^{i nu- t})
      const cd v = 0.5 * (std::polar(1.0, nu_p * t) * (t * m0p + m1p) + std::polar(1.0, nu_m * t) * (t * m0m + m1m));
      A(2 * k, a) = v.real() / tau;
      A(2 * k + 1, a) = v.imag() / tau;
    }
  }
  return A;
}

double default_detuning(const ModeData& modes) {
  const auto K = modes.num_modes();
  if (K == 0) throw std::invalid_argument("no modes");
  if (K == 1) return modes.omega(0);
  Eigen::VectorXd w = modes.omega;
  std::sort(w.data(), w.data() + K);
  return 0.5 * (w(K - 1) + w(K - 2));
}

PulseSequence ease_design(const ModeData& modes, const GateTargets& targets, double mu, double tau, int n_seg,
                          const EaseOptions& options) {
  if (n_seg < 1 || !(tau > 0.0)) throw std::invalid_argument("bad pulse dimensions");
  const auto ions = targets.ions();
  const int N = static_cast<int>(ions.size());
  PulseSequence pulse;
  pulse.n_seg = n_seg;
  pulse.tau = tau;
  pulse.mu = mu;
  pulse.ions = ions;
  pulse.amplitudes = Eigen::MatrixXd::Zero(N, n_seg);
  if (N == 0) return pulse;

  std::map<std::uint32_t, int> index;
  for (int j = 0; j < N; ++j) index[ions[j]] = j;
  Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(N, N);
  for (const auto& p : targets.pairs) {
    if (p.i == p.j || p.theta == 0.0) throw std::invalid_argument("target pairs need two ions and theta != 0");
    theta(index[p.i], index[p.j]) = theta(index[p.j], index[p.i]) = p.theta;
  }
  const double theta_scale = std::max(theta.cwiseAbs().maxCoeff(), 1e-300);

  // Connected components, each ordered so the first two ions share a target.
  std::vector<std::vector<int>> components;
  std::vector<char> placed(N, 0);
  for (int s = 0; s < N; ++s) {
    if (placed[s]) continue;
    std::vector<int> comp{s};
    placed[s] = 1;
    for (std::size_t head = 0; head < comp.size(); ++head) {
      for (int j = 0; j < N; ++j) {
        if (!placed[j] && theta(comp[head], j) != 0.0) {
          placed[j] = 1;
          comp.push_back(j);
        }
      }
    }
    components.push_back(std::move(comp));
  }

  const auto tables = mode_tables(modes, mu, tau, n_seg);
  Eigen::MatrixXd c(N, modes.num_modes());
  for (int j = 0; j < N; ++j) c.row(j) = coupling_row(modes, ions[j]);

  Eigen::MatrixXd A(2 * modes.num_modes(), n_seg);
  for (Eigen::Index k = 0; k < modes.num_modes(); ++k) {
    A.row(2 * k) = tables.R.col(k).transpose();
    A.row(2 * k + 1) = tables.I.col(k).transpose();
  }
  if (options.robust_detuning) {
    const Eigen::MatrixXd Ad = detuning_derivative_constraints(modes, mu, tau, n_seg);
    A.conservativeResize(A.rows() + Ad.rows(), Eigen::NoChange);
    A.bottomRows(Ad.rows()) = Ad;
  }
  const Eigen::MatrixXd At = null_space(A, options.null_rtol);
  const Eigen::Index r = At.cols();
  if (r == 0) throw NullSpaceExhausted(describe("displacement constraints leave no freedom", ions[0], A.rows(), n_seg));

  std::vector<int> solved;
  std::vector<Eigen::MatrixXd> images(N);  // [G_k Omega_j]_k for solved ions

  // Rows Omega_{k'}^T M_{k',k} At over the given solved ions.
  auto eps_rows = [&](int k, const std::vector<int>& prev) {
    Eigen::MatrixXd E(static_cast<Eigen::Index>(prev.size()), r);
    for (std::size_t q = 0; q < prev.size(); ++q) {
      const int kp = prev[q];
      const Eigen::VectorXd w = c.row(kp).cwiseProduct(c.row(k)).transpose();
      E.row(static_cast<Eigen::Index>(q)) = (At.transpose() * (images[kp] * w)).transpose();
    }
    return E;
  };
  auto commit = [&](int k, const Eigen::VectorXd& omega) {
    if (omega.cwiseAbs().maxCoeff() > options.amplitude_cap) {
      std::ostringstream msg;
      msg << "ion " << ions[k] << " needs Rabi frequency " << omega.cwiseAbs().maxCoeff()
          << " rad/s above the cap " << options.amplitude_cap;
      throw InfeasibleTarget(msg.str());
    }
    pulse.amplitudes.row(k) = omega.transpose();
    images[k] = kernel_images(tables, omega);
    // Projection-chain check against everything solved so far.
    for (int kp : solved) {
      const Eigen::VectorXd w = c.row(kp).cwiseProduct(c.row(k)).transpose();
      const double got = omega.dot(images[kp] * w);
      if (std::abs(got - theta(kp, k)) > options.chain_tol * theta_scale) {
        std::ostringstream msg;
        msg << "phase between ions " << ions[kp] << " and " << ions[k] << " is " << got << ", wanted "
            << theta(kp, k);
        throw DesignCheckFailed(msg.str());
      }
    }
    solved.push_back(k);
  };

  for (const auto& comp : components) {
    if (comp.size() == 1) {
      commit(comp[0], Eigen::VectorXd::Zero(n_seg));
      continue;
    }
    const int p = comp[0];
    const int q = comp[1];
    const std::vector<int> before = solved;
    const Eigen::MatrixXd Np = null_space(eps_rows(p, before), options.null_rtol);
    const Eigen::MatrixXd Nq = null_space(eps_rows(q, before), options.null_rtol);
    if (Np.cols() == 0) throw NullSpaceExhausted(describe("no null space left", ions[p], before.size(), r));
    if (Nq.cols() == 0) throw NullSpaceExhausted(describe("no null space left", ions[q], before.size(), r));
    const Eigen::MatrixXd Bp = At * Np;
    const Eigen::MatrixXd Bq = At * Nq;
    const Eigen::VectorXd w = c.row(p).cwiseProduct(c.row(q)).transpose();
    const Eigen::MatrixXd M = Bp.transpose() * (weighted_kernel(tables, w) * Bq);
    Eigen::BDCSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double sigma = svd.singularValues()(0);
    if (!(sigma > 0.0)) {
      std::ostringstream msg;
      msg << "ions " << ions[p] << " and " << ions[q] << " cannot be entangled in the remaining null space";
      throw InfeasibleTarget(msg.str());
    }
    const double t = theta(p, q);
    const double s = std::sqrt(std::abs(t) / sigma);
    commit(p, Bp * (svd.matrixU().col(0) * (t < 0 ? -s : s)));
    commit(q, Bq * (svd.matrixV().col(0) * s));

    for (std::size_t l = 2; l < comp.size(); ++l) {
      const int k = comp[l];
      const Eigen::MatrixXd E = eps_rows(k, solved);
      Eigen::VectorXd rhs(static_cast<Eigen::Index>(solved.size()));
      for (std::size_t m = 0; m < solved.size(); ++m) rhs(static_cast<Eigen::Index>(m)) = theta(solved[m], k);
      const Eigen::VectorXd x = E.completeOrthogonalDecomposition().solve(rhs);
      if ((E * x - rhs).cwiseAbs().maxCoeff() > options.chain_tol * theta_scale) {
        throw NullSpaceExhausted(describe("phase constraints are inconsistent", ions[k], E.rows(), r));
      }
      commit(k, At * x);
    }
  }
  return pulse;
}

PulseSequence single_pair_design(const ModeData& modes, std::uint32_t ion_i, std::uint32_t ion_j, double theta,
                                 double mu, double tau, int n_seg, const EaseOptions& options) {
  if (ion_i == ion_j || theta == 0.0) throw std::invalid_argument("single pair needs two ions and theta != 0");
  const auto tables = mode_tables(modes, mu, tau, n_seg);
  Eigen::MatrixXd A(2 * modes.num_modes(), n_seg);
  A << tables.R.transpose(), tables.I.transpose();
  if (options.robust_detuning) {
    const Eigen::MatrixXd Ad = detuning_derivative_constraints(modes, mu, tau, n_seg);
    A.conservativeResize(A.rows() + Ad.rows(), Eigen::NoChange);
    A.bottomRows(Ad.rows()) = Ad;
  }
  const Eigen::MatrixXd At = null_space(A, options.null_rtol);
  if (At.cols() == 0) throw NullSpaceExhausted(describe("displacement constraints leave no freedom", ion_i, A.rows(), n_seg));
  const Eigen::VectorXd w = coupling_row(modes, ion_i).cwiseProduct(coupling_row(modes, ion_j)).transpose();
  const Eigen::MatrixXd M = At.transpose() * weighted_kernel(tables, w) * At;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (M + M.transpose()));
  const auto& ev = eig.eigenvalues();
  // Largest eigenvalue with the sign of theta.
  const Eigen::Index pick = theta > 0 ? ev.size() - 1 : 0;
  const double lambda = ev(pick);
  if (!(lambda * theta > 0.0)) throw InfeasibleTarget("no amplitude shape reaches a phase of this sign");
  const Eigen::VectorXd omega = At * eig.eigenvectors().col(pick) * std::sqrt(theta / lambda);
  if (omega.cwiseAbs().maxCoeff() > options.amplitude_cap) {
    throw InfeasibleTarget("single-pair design exceeds the amplitude cap");
  }
  PulseSequence p;
  p.n_seg = n_seg;
  p.tau = tau;
  p.mu = mu;
  p.ions = {ion_i, ion_j};
  p.amplitudes.resize(2, n_seg);
  p.amplitudes.row(0) = omega.transpose();
  p.amplitudes.row(1) = omega.transpose();
  return p;
}

namespace {

DesignResidual residual_from(const PulseSequence& pulse, const Evaluation& ev, const TargetIndex& idx,
                             const GateTargets& targets, const std::vector<int>& rows) {
  DesignResidual res;
  res.max_rabi = pulse.amplitudes.size() ? pulse.amplitudes.cwiseAbs().maxCoeff() : 0.0;
  res.mean_rabi = pulse.amplitudes.size() ? pulse.amplitudes.cwiseAbs().mean() : 0.0;
  res.alpha_scale = res.max_rabi * pulse.tau / pulse.n_seg;
  res.alpha_max = ev.alpha.size() ? ev.alpha.cwiseAbs().maxCoeff() : 0.0;
  for (std::size_t p = 0; p < targets.pairs.size(); ++p) {
    res.theta_target_err = std::max(res.theta_target_err, std::abs(ev.pair_theta[p] - targets.pairs[p].theta));
  }
  std::vector<std::vector<char>> targeted(pulse.ions.size(), std::vector<char>(pulse.ions.size(), 0));
  for (const auto& [i, j] : idx.pairs) targeted[i][j] = targeted[j][i] = 1;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (Eigen::Index j = 0; j < ev.theta_rows.cols(); ++j) {
      if (j == rows[r] || targeted[rows[r]][j]) continue;
      res.theta_untargeted_max =
          std::max(res.theta_untargeted_max, std::abs(ev.theta_rows(static_cast<Eigen::Index>(r), j)));
    }
  }
  return res;
}

std::vector<int> all_rows(const PulseSequence& pulse) {
  std::vector<int> rows(pulse.ions.size());
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

}  // namespace

DesignResidual verify_design(const PulseSequence& pulse, const ModeData& modes, const GateTargets& targets) {
  pulse.validate();
  const auto idx = index_targets(pulse, targets);
  // Full Theta and alpha through the ionphys evaluators.
  const Eigen::MatrixXcd alpha = alpha_integrals(pulse, modes);
  const Eigen::MatrixXd theta = theta_integrals(pulse, modes);
  Evaluation ev;
  ev.alpha = alpha;
  ev.theta_rows = theta;
  for (const auto& [i, j] : idx.pairs) ev.pair_theta.push_back(theta(i, j));
  return residual_from(pulse, ev, idx, targets, all_rows(pulse));
}

GateTargets layer_targets(const std::vector<Cnot>& layer, double theta) {
  GateTargets t;
  for (const auto& g : layer) t.pairs.push_back({g.control, g.target, theta});
  return t;
}

LayerDesign design_parallel_layer(const ModeData& modes, const std::vector<Cnot>& layer, double mu, double tau,
                                  int n_seg, const EaseOptions& options) {
  LayerDesign out;
  out.targets = layer_targets(layer);
  out.targets.validate_pairwise();
  out.pulse = ease_design(modes, out.targets, mu, tau, n_seg, options);
  if (!layer.empty()) out.residual = verify_design(out.pulse, modes, out.targets);
  return out;
}

BoundaryScale rescale_for_boundary(const Eigen::VectorXd& shape, double mu, double tau,
                                   const std::vector<std::pair<std::uint32_t, std::uint32_t>>& pairs,
                                   const ModeData& modes, double floor) {
  const int n_seg = static_cast<int>(shape.size());
  const auto tables = mode_tables(modes, mu, tau, n_seg);
  // Per-mode quadratic form of the shape; Theta of any pair is a weighted sum.
  const Eigen::VectorXd g = kernel_images(tables, shape).transpose() * shape;
  BoundaryScale out;
  for (const auto& [i, j] : pairs) {
    const double th = coupling_row(modes, i).cwiseProduct(coupling_row(modes, j)).dot(g);
    if (!(std::abs(th) >= floor)) {
      std::ostringstream msg;
      msg << "pair (" << i << ", " << j << ") reaches only |Theta| = " << std::abs(th);
      throw InfeasibleTarget(msg.str());
    }
    const double target = th > 0 ? phys::kPi / 4 : -phys::kPi / 4;
    out.theta_unscaled.push_back(th);
    out.theta_target.push_back(target);
    out.scale.push_back(std::sqrt(target / th));
  }
  return out;
}

PulseSequence transplant(const Eigen::VectorXd& shape, double mu, double tau,
                         const std::vector<std::pair<std::uint32_t, std::uint32_t>>& pairs,
                         const std::vector<double>& scale) {
  if (scale.size() != pairs.size()) throw std::invalid_argument("one scale per pair");
  PulseSequence p;
  p.n_seg = static_cast<int>(shape.size());
  p.tau = tau;
  p.mu = mu;
  p.amplitudes.resize(static_cast<Eigen::Index>(2 * pairs.size()), p.n_seg);
  for (std::size_t q = 0; q < pairs.size(); ++q) {
    p.ions.push_back(pairs[q].first);
    p.ions.push_back(pairs[q].second);
    p.amplitudes.row(static_cast<Eigen::Index>(2 * q)) = scale[q] * shape.transpose();
    p.amplitudes.row(static_cast<Eigen::Index>(2 * q + 1)) = scale[q] * shape.transpose();
  }
  return p;
}

std::vector<DistanceBin> CrosstalkReport::bins() const {
  std::map<long long, DistanceBin> acc;
  for (const auto& p : pairs) {
    if (p.targeted) continue;
    auto& b = acc[std::llround(p.r_over_a * 1e6)];
    b.r_over_a = std::round(p.r_over_a * 1e6) / 1e6;
    ++b.count;
    b.pc_intrinsic += p.pc_intrinsic;
    b.pc_noise += p.pc_noise;
    b.pc_mean += p.pc_mean;
  }
  std::vector<DistanceBin> out;
  for (auto& [key, b] : acc) {
    const auto n = static_cast<double>(b.count);
    b.pc_intrinsic /= n;
    b.pc_noise /= n;
    b.pc_mean /= n;
    out.push_back(b);
  }
  return out;
}

double CrosstalkReport::mean_untargeted_pc() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& p : pairs) {
    if (p.targeted) continue;
    sum += p.pc_mean;
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

double CrosstalkReport::mean_gate_infidelity() const {
  if (gate_infidelity.empty()) return 0.0;
  return std::accumulate(gate_infidelity.begin(), gate_infidelity.end(), 0.0) /
         static_cast<double>(gate_infidelity.size());
}

double CrosstalkReport::mean_gate_infidelity_at(double nbar) const {
  if (!(nbar >= 0.0)) throw std::invalid_argument("nbar must be >= 0");
  if (gate_phase_part.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t g = 0; g < gate_phase_part.size(); ++g) {
    sum += gate_phase_part[g] + (2.0 * nbar + 1.0) * gate_displacement[g];
  }
  return sum / static_cast<double>(gate_phase_part.size());
}

std::string CrosstalkReport::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "ion_i,ion_j,r_over_a,theta_nominal,pc_intrinsic,delta_theta,pc_noise\n";
  for (const auto& p : pairs) {
    out << p.ion_i << ',' << p.ion_j << ',' << p.r_over_a << ',' << p.theta_nominal << ',' << p.pc_intrinsic << ','
        << p.delta_theta << ',' << p.pc_noise << '\n';
  }
  return out.str();
}

CrosstalkReport sample_noisy_crosstalk(const PulseSequence& pulse, const ModeData& modes,
                                       const std::vector<Vec2>& positions, double a, const GateTargets& targets,
                                       const NoiseSpec& spec, const std::vector<int>& rows_in) {
  spec.validate();
  pulse.validate();
  const auto idx = index_targets(pulse, targets);
  const std::vector<int> rows = rows_in.empty() ? all_rows(pulse) : rows_in;
  const auto N = static_cast<int>(pulse.ions.size());

  // Reported pairs: (row, other) with each unordered pair once.
  std::vector<char> is_row(N, 0);
  for (int r : rows) is_row.at(r) = 1;
  std::vector<std::vector<char>> targeted(N, std::vector<char>(N, 0));
  for (const auto& [i, j] : idx.pairs) targeted[i][j] = targeted[j][i] = 1;
  struct Slot {
    int row_pos;
    int other;
  };
  std::vector<Slot> slots;
  CrosstalkReport report;
  report.nominal_detuning = pulse.mu;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const int i = rows[r];
    for (int j = 0; j < N; ++j) {
      if (j == i || (is_row[j] && j < i)) continue;
      slots.push_back({static_cast<int>(r), j});
      PairCrosstalk pc;
      pc.ion_i = pulse.ions[i];
      pc.ion_j = pulse.ions[j];
      if (pc.ion_i >= positions.size() || pc.ion_j >= positions.size()) {
        throw std::out_of_range("ion has no position");
      }
      pc.r_over_a = distance(positions[pc.ion_i], positions[pc.ion_j]) / a;
      pc.targeted = targeted[i][j];
      report.pairs.push_back(pc);
    }
  }

  const auto nominal = evaluate(pulse, modes, rows, {}, false);
  for (std::size_t s = 0; s < slots.size(); ++s) {
    auto& pc = report.pairs[s];
    pc.theta_nominal = nominal.theta_rows(slots[s].row_pos, slots[s].other);
    if (!pc.targeted) pc.pc_intrinsic = pc.theta_nominal * pc.theta_nominal;
  }

  const std::size_t P = slots.size();
  const std::size_t G = idx.pairs.size();
  std::vector<double> thetas(static_cast<std::size_t>(spec.n_samples) * P);
  std::vector<double> infid(static_cast<std::size_t>(spec.n_samples) * G);
  std::vector<double> phase(infid.size());
  std::vector<double> disp(infid.size());
  auto run = [&](int worker) {
    for (int s = worker; s < spec.n_samples; s += spec.workers) {
      auto rng = CounterRng::keyed(spec.seed, static_cast<std::uint64_t>(s), 0x5eed9015eULL);
      PulseSequence noisy = pulse;
      noisy.mu = pulse.mu + rng.uniform(-spec.detuning_halfwidth, spec.detuning_halfwidth);
      for (Eigen::Index j = 0; j < noisy.amplitudes.rows(); ++j) {
        for (Eigen::Index k = 0; k < noisy.amplitudes.cols(); ++k) {
          noisy.amplitudes(j, k) *= 1.0 + rng.uniform(-spec.amp_fraction, spec.amp_fraction);
        }
      }
      const auto ev = evaluate(noisy, modes, rows, idx.pairs, true);
      for (std::size_t q = 0; q < P; ++q) {
        thetas[static_cast<std::size_t>(s) * P + q] = ev.theta_rows(slots[q].row_pos, slots[q].other);
      }
      for (std::size_t g = 0; g < G; ++g) {
        const auto [i, j] = idx.pairs[g];
        double sum = 0.0;
        double vac = 0.0;
        for (Eigen::Index k = 0; k < ev.alpha.cols(); ++k) {
          const double a2 = std::norm(ev.alpha(i, k)) + std::norm(ev.alpha(j, k));
          sum += a2 * (2.0 * modes.nbar(k) + 1.0);
          vac += a2;
        }
        const double dth = ev.pair_theta[g] - targets.pairs[g].theta;
        const std::size_t at = static_cast<std::size_t>(s) * G + g;
        infid[at] = 0.8 * (sum + dth * dth);
        phase[at] = 0.8 * dth * dth;
        disp[at] = 0.8 * vac;
      }
    }
  };
  if (spec.workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < spec.workers; ++w) pool.emplace_back(run, w);
    for (auto& t : pool) t.join();
  }

  const auto ns = static_cast<double>(spec.n_samples);
  for (std::size_t q = 0; q < P; ++q) {
    double sum = 0.0;
    double sq = 0.0;
    for (int s = 0; s < spec.n_samples; ++s) {
      const double t = thetas[static_cast<std::size_t>(s) * P + q];
      sum += t;
      sq += t * t;
    }
    auto& pc = report.pairs[q];
    pc.theta_mean = sum / ns;
    double var = 0.0;
    if (spec.n_samples > 1) {
      for (int s = 0; s < spec.n_samples; ++s) {
        const double dv = thetas[static_cast<std::size_t>(s) * P + q] - pc.theta_mean;
        var += dv * dv;
      }
      var /= ns - 1.0;
    }
    pc.delta_theta = std::sqrt(var);
    pc.pc_noise = var;
    pc.pc_mean = pc.targeted ? 0.0 : sq / ns;
  }
  report.gate_infidelity.assign(G, 0.0);
  report.gate_phase_part.assign(G, 0.0);
  report.gate_displacement.assign(G, 0.0);
  for (std::size_t g = 0; g < G; ++g) {
    for (int s = 0; s < spec.n_samples; ++s) {
      const std::size_t at = static_cast<std::size_t>(s) * G + g;
      report.gate_infidelity[g] += infid[at];
      report.gate_phase_part[g] += phase[at];
      report.gate_displacement[g] += disp[at];
    }
    report.gate_infidelity[g] /= ns;
    report.gate_phase_part[g] /= ns;
    report.gate_displacement[g] /= ns;
  }
  return report;
}

PowerLawFit fit_power_law(const std::vector<std::pair<double, double>>& points, double r_min) {
  std::vector<double> x;
  std::vector<double> y;
  for (const auto& [r, p] : points) {
    if (r < r_min) continue;
    if (!(r > 0.0) || !(p > 0.0)) throw std::invalid_argument("power-law fit needs positive r and p");
    x.push_back(std::log(r));
    y.push_back(std::log(p));
  }
  const std::size_t n = x.size();
  if (n < 2) throw std::invalid_argument("power-law fit needs at least two points above r_min");
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("power-law fit needs at least two distinct distances");
  const double slope = sxy / sxx;
  const double icpt = my - slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y[i] - (icpt + slope * x[i]);
    ssr += e * e;
  }
  PowerLawFit fit;
  fit.c = std::exp(icpt);
  fit.gamma = -slope;
  fit.residual = std::sqrt(ssr / static_cast<double>(n));
  fit.gamma_stderr = n > 2 ? std::sqrt(ssr / static_cast<double>(n - 2) / sxx) : 0.0;
  fit.n_points = n;
  return fit;
}

double resolve_detuning(const RegimeParams& params, const ModeData& modes) {
  if (std::isfinite(params.mu)) return params.mu;
  if (std::isfinite(params.mu_band_offset)) {
    const double top = modes.omega.maxCoeff();
    const double bottom = modes.omega.minCoeff();
    return top - params.mu_band_offset * (top - bottom);
  }
  return default_detuning(modes);
}

namespace {

RegimeResult regime_base(const RegimeParams& params) {
  if (params.layer < 0 || params.layer > 3) throw std::invalid_argument("layer must be 0..3");
  RegimeResult out;
  out.layout = build_rotated_surface_code(params.d);
  out.crystal.positions = embed_layout(out.layout, params.a);
  out.crystal.omega_x = params.omega_x;
  out.modes = transverse_modes(out.crystal);
  out.epsilon = epsilon_parameter(out.crystal, params.a);
  return out;
}

}  // namespace

RegimeResult run_slow_regime(const RegimeParams& params) {
  auto out = regime_base(params);
  const double mu = resolve_detuning(params, out.modes);
  auto design = design_parallel_layer(out.modes, out.layout.cnot_layers[params.layer], mu, params.tau, params.n_seg,
                                      params.ease);
  out.pulse = std::move(design.pulse);
  out.targets = std::move(design.targets);
  out.residual = design.residual;
  out.report =
      sample_noisy_crosstalk(out.pulse, out.modes, out.crystal.positions, params.a, out.targets, params.noise);
  return out;
}

RegimeResult run_fast_regime(const RegimeParams& params) {
  auto out = regime_base(params);
  const double mu = resolve_detuning(params, out.modes);
  const auto& layer = out.layout.cnot_layers[params.layer];
  if (layer.empty()) throw std::invalid_argument("empty layer");

  // Central pair: gate midpoint closest to the crystal centroid.
  Vec2 centroid{0.0, 0.0};
  for (const auto& p : out.crystal.positions) {
    centroid.x += p.x;
    centroid.y += p.y;
  }
  centroid.x /= static_cast<double>(out.crystal.size());
  centroid.y /= static_cast<double>(out.crystal.size());
  std::size_t central = 0;
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  for (std::size_t g = 0; g < layer.size(); ++g) {
    pairs.push_back({layer[g].control, layer[g].target});
    const auto& pc = out.crystal.positions[layer[g].control];
    const auto& pt = out.crystal.positions[layer[g].target];
    const double dist = distance({0.5 * (pc.x + pt.x), 0.5 * (pc.y + pt.y)}, centroid);
    if (dist < best - 1e-15) {
      best = dist;
      central = g;
    }
  }
  out.central_pair = pairs[central];
  // The sign of the reachable phase is fixed by the mode structure; -pi/4 is
  // an equally good entangler.
  PulseSequence ref;
  try {
    ref = single_pair_design(out.modes, pairs[central].first, pairs[central].second, phys::kPi / 4, mu, params.tau,
                             params.n_seg, params.ease);
  } catch (const InfeasibleTarget&) {
    ref = single_pair_design(out.modes, pairs[central].first, pairs[central].second, -phys::kPi / 4, mu, params.tau,
                             params.n_seg, params.ease);
  }
  const Eigen::VectorXd shape = ref.amplitudes.row(0).transpose();
  const auto scaling = rescale_for_boundary(shape, mu, params.tau, pairs, out.modes);
  out.scales = scaling.scale;
  out.pulse = transplant(shape, mu, params.tau, pairs, scaling.scale);
  for (std::size_t g = 0; g < pairs.size(); ++g) {
    out.targets.pairs.push_back({pairs[g].first, pairs[g].second, scaling.theta_target[g]});
  }

  const std::vector<int> rows{static_cast<int>(2 * central), static_cast<int>(2 * central + 1)};
  const auto idx = index_targets(out.pulse, out.targets);
  const auto ev = evaluate(out.pulse, out.modes, rows, idx.pairs, true);
  out.residual = residual_from(out.pulse, ev, idx, out.targets, rows);
  out.report =
      sample_noisy_crosstalk(out.pulse, out.modes, out.crystal.positions, params.a, out.targets, params.noise, rows);
  return out;
}

}  // namespace xtalk
