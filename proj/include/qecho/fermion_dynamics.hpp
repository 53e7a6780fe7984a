#pragma once

#include "qecho/lattice_model.hpp"

#include <algorithm>
#include <numeric>

namespace qecho {

// Operator ordering convention used throughout: Psi = (c_0^dag .. c_{N-1}^dag,
// c_0 .. c_{N-1})^T, so the covariance C = <Psi Psi^dag> carries the blocks
//
//     [[ <c^dag c>,  <c^dag c^dag> ],
//      [ <c c>,      <c c^dag>     ]]
//
// and obeys i dPsi/dt = H Psi with the single-particle matrix of
// build_single_particle_hamiltonian. Positive-energy eigenvectors are the
// annihilation-type normal modes; the ground state is their vacuum, which makes
// C(0) the projector onto the positive-energy eigenspace.

struct BdGDecomposition {
  int n_sites = 0;
  VectorXd energies;  // ascending, symmetric about zero
  MatrixXd modes;     // orthogonal; column k is the eigenvector of energies[k]
  // Bogoliubov amplitudes of the positive-energy modes (columns k = 0..N-1,
  // matching energies[N + k]):  eta_k = sum_i [ u(i,k) c_i + v(i,k) c_i^dag ].
  MatrixXd u;
  MatrixXd v;
};

namespace detail {

// swap the (c^dag, c) halves of a vector: maps an eigenvector of energy e to one
// of energy -e
inline VectorXd particle_hole_swap(const VectorXd& vec) {
  const int n = static_cast<int>(vec.size()) / 2;
  VectorXd out(2 * n);
  out.head(n) = vec.tail(n);
  out.tail(n) = vec.head(n);
  return out;
}

inline int index_of_largest_component(const VectorXd& vec) {
  int imax = 0;
  double best = -1;
  for (int i = 0; i < vec.size(); ++i) {
    const double a = std::abs(vec[i]);
    if (a > best) {
      best = a;
      imax = i;
    }
  }
  return imax;
}

}  // namespace detail

inline BdGDecomposition diagonalize(const MatrixXd& single_particle_h) {
  const int dim = static_cast<int>(single_particle_h.rows());
  if (dim < 2 || dim % 2 != 0 || single_particle_h.cols() != dim)
    throw ValidationError("single-particle matrix must be square with even dimension");
  if ((single_particle_h - single_particle_h.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw ValidationError("single-particle matrix must be symmetric");

  Eigen::SelfAdjointEigenSolver<MatrixXd> es(single_particle_h);
  if (es.info() != Eigen::Success) throw NumericError("single-particle eigensolver failed to converge");

  const int n = dim / 2;
  // Eigen returns ascending eigenvalues; the upper half is the non-negative one.
  VectorXd pos_energies = es.eigenvalues().tail(n);
  MatrixXd pos_modes = es.eigenvectors().rightCols(n);
  if (pos_energies[0] < 1e-12)
    warn("near-zero single-particle energy (" + format_full(pos_energies[0]) +
         "); mode assigned to the empty side");

  // Deterministic ordering and signs: stable sort by (energy, index of largest
  // component), then make the largest component of each column positive.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> anchor(n);
  for (int k = 0; k < n; ++k) anchor[k] = detail::index_of_largest_component(pos_modes.col(k));
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (pos_energies[a] != pos_energies[b]) return pos_energies[a] < pos_energies[b];
    return anchor[a] < anchor[b];
  });

  BdGDecomposition dec;
  dec.n_sites = n;
  dec.energies.resize(dim);
  dec.modes.resize(dim, dim);
  MatrixXd sorted(dim, n);
  for (int k = 0; k < n; ++k) {
    VectorXd col = pos_modes.col(order[k]);
    if (col[anchor[order[k]]] < 0) col = -col;
    sorted.col(k) = col;
    dec.energies[n + k] = pos_energies[order[k]];
  }
  // Negative-energy partners are constructed by the particle-hole swap, which
  // keeps the pairing exact also inside degenerate subspaces.
  for (int k = 0; k < n; ++k) {
    dec.modes.col(n + k) = sorted.col(k);
    dec.modes.col(n - 1 - k) = detail::particle_hole_swap(sorted.col(k));
    dec.energies[n - 1 - k] = -dec.energies[n + k];
  }
  dec.v = sorted.topRows(n);
  dec.u = sorted.bottomRows(n);
  return dec;
}

inline double ground_state_energy(const BdGDecomposition& dec) {
  return -0.5 * dec.energies.tail(dec.n_sites).sum();
}

// C(0) for the normal-mode vacuum: the projector onto the positive-energy
// eigenspace, real and idempotent with trace N.
inline MatrixXd ground_state_covariance(const BdGDecomposition& dec) {
  const int n = dec.n_sites;
  if (dec.energies[n] < 1e-12)
    throw NumericError("zero-energy mode: ground-state covariance is ambiguous");
  const auto filled = dec.modes.rightCols(n);
  return filled * filled.transpose();
}

namespace detail {

// C(t) = U e^{-it L} U^T C(0) U e^{+it L} U^T, evaluated with the cached
// W = U^T C(0) U and four real matrix products.
struct SpectralPropagator {
  const BdGDecomposition* dec = nullptr;
  MatrixXd w;

  SpectralPropagator(const BdGDecomposition& d, const MatrixXd& c0) : dec(&d) {
    w = d.modes.transpose() * c0 * d.modes;
  }

  MatrixXcd at(double t) const {
    const VectorXd phase = t * dec->energies;
    const VectorXd c = phase.array().cos();
    const VectorXd s = phase.array().sin();
    // e^{-it(E_m - E_n)} = cos(tE_m)cos(tE_n) + sin(tE_m)sin(tE_n)
    //                      - i [sin(tE_m)cos(tE_n) - cos(tE_m)sin(tE_n)]
    const MatrixXd t_re = w.cwiseProduct(c * c.transpose() + s * s.transpose());
    const MatrixXd t_im = w.cwiseProduct(c * s.transpose() - s * c.transpose());
    const MatrixXd re = dec->modes * t_re * dec->modes.transpose();
    const MatrixXd im = dec->modes * t_im * dec->modes.transpose();
    MatrixXcd out(re.rows(), re.cols());
    out.real() = re;
    out.imag() = im;
    return out;
  }
};

#ifndef NDEBUG
inline void check_spectrum_preserved(const MatrixXd& c0, const MatrixXcd& ct) {
  if (c0.rows() > 256) return;
  Eigen::SelfAdjointEigenSolver<MatrixXd> e0(c0);
  Eigen::SelfAdjointEigenSolver<MatrixXcd> e1(ct);
  const double drift = (e0.eigenvalues() - e1.eigenvalues()).cwiseAbs().maxCoeff();
  if (drift > 1e-8) throw NumericError("covariance spectrum not preserved under evolution");
}
#endif

}  // namespace detail

inline MatrixXcd evolve_covariance(const MatrixXd& c0, const BdGDecomposition& dec, double t) {
  if (t < 0) throw ValidationError("evolution time must be non-negative");
  if (c0.rows() != 2 * dec.n_sites || c0.cols() != 2 * dec.n_sites)
    throw ValidationError("covariance size does not match decomposition");
  MatrixXcd ct = detail::SpectralPropagator(dec, c0).at(t);
#ifndef NDEBUG
  detail::check_spectrum_preserved(c0, ct);
#endif
  return ct;
}

// L = |det(1 - C_dd - C_uu)|^{1/2}, accumulated as log-magnitudes of the LU
// pivots so large chains with tiny echoes neither under- nor overflow. The sum
// C_dd + C_uu is formed first, which makes the value exactly symmetric in the
// two arguments.
inline double loschmidt_echo(const MatrixXcd& c_dd, const MatrixXcd& c_uu) {
  if (c_dd.rows() != c_uu.rows() || c_dd.cols() != c_uu.cols() || c_dd.rows() != c_dd.cols())
    throw ValidationError("covariance matrices must be square and of equal size");
  MatrixXcd m = -(c_dd + c_uu);
  m.diagonal().array() += cplx(1.0, 0.0);
  Eigen::PartialPivLU<Eigen::Ref<MatrixXcd>> lu(m);  // factors in place
  double log_abs_det = 0;
  bool singular = false;
  for (int k = 0; k < lu.matrixLU().rows(); ++k) {
    const double pivot = std::abs(lu.matrixLU()(k, k));
    if (pivot == 0) {
      singular = true;
      break;
    }
    log_abs_det += std::log(pivot);
  }
  if (singular) {
    warn("echo determinant exactly singular; reporting 0");
    return 0;
  }
  const double echo = std::exp(0.5 * log_abs_det);
  if (echo > 1 + 1e-6)
    throw NumericError("echo value " + format_full(echo) + " exceeds 1 + 1e-6: pipeline bug");
  return std::min(echo, 1.0);
}

struct EchoSeries {
  std::vector<double> times;
  std::vector<double> echo;
  QuenchProtocol protocol;
};

inline BdGDecomposition decompose_uniform(int n, double j, double lambda, Boundary boundary) {
  return diagonalize(build_single_particle_hamiltonian(
      build_coupling_matrices(VectorXd::Constant(n, lambda), j, boundary)));
}

inline BdGDecomposition decompose_fields(const VectorXd& fields, double j, Boundary boundary) {
  return diagonalize(build_single_particle_hamiltonian(build_coupling_matrices(fields, j, boundary)));
}

inline BdGDecomposition channel_decomposition(const QuenchProtocol& p, Channel channel, Stage stage) {
  return decompose_fields(channel_fields(p, channel, stage), p.coupling_j, p.boundary);
}

// One diagonalization per channel, then one spectral evolution plus one
// determinant per time point. The initial covariance may be supplied directly
// (e.g. the polarized state) instead of the lambda_initial ground state.
class EchoEngine {
 public:
  explicit EchoEngine(const QuenchProtocol& p)
      : EchoEngine(ground_state_covariance(decompose_uniform(p.n_sites, p.coupling_j, p.lambda_initial, p.boundary)),
                   channel_decomposition(p, Channel::down_down, Stage::post_quench),
                   channel_decomposition(p, Channel::up_up, Stage::post_quench)) {}

  EchoEngine(const MatrixXd& c0, BdGDecomposition dec_dd, BdGDecomposition dec_uu)
      : dec_dd_(std::move(dec_dd)),
        dec_uu_(std::move(dec_uu)),
        prop_dd_(dec_dd_, c0),
        prop_uu_(dec_uu_, c0) {}

  // the propagators point into the stored decompositions
  EchoEngine(const EchoEngine&) = delete;
  EchoEngine& operator=(const EchoEngine&) = delete;

  double echo_at(double t) const {
    if (t < 0) throw ValidationError("evolution time must be non-negative");
    return loschmidt_echo(prop_dd_.at(t), prop_uu_.at(t));
  }

  std::vector<double> echo_at(const std::vector<double>& times) const {
    std::vector<double> echo(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) echo[i] = echo_at(times[i]);
    return echo;
  }

  const BdGDecomposition& channel_dd() const { return dec_dd_; }
  const BdGDecomposition& channel_uu() const { return dec_uu_; }

 private:
  BdGDecomposition dec_dd_, dec_uu_;
  detail::SpectralPropagator prop_dd_, prop_uu_;
};

namespace detail {

inline EchoSeries finish_series(const QuenchProtocol& p, const std::vector<double>& times,
                                std::vector<double> echo) {
  if (!times.empty() && times.front() == 0 && std::abs(echo.front() - 1.0) > 1e-10)
    throw NumericError("echo at t = 0 deviates from 1 beyond 1e-10: pipeline bug");
  return EchoSeries{times, std::move(echo), p};
}

}  // namespace detail

inline EchoSeries echo_timeseries(const QuenchProtocol& p, const std::vector<double>& times) {
  p.validate();
  const EchoEngine engine(p);
  return detail::finish_series(p, times, engine.echo_at(times));
}

// Echo of a single qubit coupled at site 0 only (the separation is ignored).
// Squaring this series gives the independent-baths reference.
inline EchoSeries single_defect_echo(const QuenchProtocol& p, const std::vector<double>& times) {
  p.validate();
  const MatrixXd c0 =
      ground_state_covariance(decompose_uniform(p.n_sites, p.coupling_j, p.lambda_initial, p.boundary));
  VectorXd defect_fields = VectorXd::Constant(p.n_sites, p.lambda_final);
  defect_fields[0] += p.epsilon;
  EchoEngine engine(c0, decompose_uniform(p.n_sites, p.coupling_j, p.lambda_final, p.boundary),
                    decompose_fields(defect_fields, p.coupling_j, p.boundary));
  return detail::finish_series(p, times, engine.echo_at(times));
}

}  // namespace qecho
