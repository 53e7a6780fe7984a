#pragma once

#include "qecho/lattice_model.hpp"

namespace qecho::oracle {

// Brute-force reference in the full 2^N spin basis. Everything here is dense and
// deliberately simple; size guards keep it to chains the eigensolver handles in
// seconds. Basis: bit j of the index is 0 for spin up, so sigma^z_j = 1 - 2*bit_j.

inline constexpr int kMaxSitesBuild = 12;
inline constexpr int kMaxSitesEcho = 10;

struct ManyBodyOperator {
  int n_sites = 0;
  MatrixXd matrix;  // real symmetric: the TFIM is real in the computational basis
};

// normalized amplitude vector in the 2^N computational basis
using ManyBodyState = VectorXcd;

inline double sigma_z_of(int basis_state, int site) {
  return (basis_state >> site & 1) ? -1.0 : 1.0;
}

// H = -J sum_j sx_j sx_{j+1} - sum_j lambda_j sz_j, boundary bond iff periodic.
inline ManyBodyOperator build_spin_hamiltonian(const VectorXd& fields, double j, Boundary boundary) {
  const int n = static_cast<int>(fields.size());
  if (n < 2) throw ValidationError("spin Hamiltonian requires at least 2 sites");
  if (n > kMaxSitesBuild) throw ValidationError("spin Hamiltonian limited to n <= 12");
  const int dim = 1 << n;
  ManyBodyOperator op{n, MatrixXd::Zero(dim, dim)};
  const int bonds = boundary == Boundary::periodic ? n : n - 1;
  for (int s = 0; s < dim; ++s) {
    double diag = 0;
    for (int site = 0; site < n; ++site) diag -= fields[site] * sigma_z_of(s, site);
    op.matrix(s, s) = diag;
    for (int b = 0; b < bonds; ++b) {
      const int flipped = s ^ (1 << b) ^ (1 << ((b + 1) % n));
      op.matrix(flipped, s) += -j;
    }
  }
  return op;
}

struct SpinSpectrum {
  VectorXd energies;
  MatrixXd vectors;
};

inline SpinSpectrum diagonalize(const ManyBodyOperator& op) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(op.matrix);
  if (es.info() != Eigen::Success) throw NumericError("dense spin eigensolver failed to converge");
  return {es.eigenvalues(), es.eigenvectors()};
}

// Lowest eigenvector with a deterministic phase (largest amplitude made positive).
// A gap below 1e-10 is reported instead of silently picking one state.
inline ManyBodyState ground_state(const ManyBodyOperator& op) {
  const SpinSpectrum spec = diagonalize(op);
  if (spec.energies.size() > 1 && spec.energies[1] - spec.energies[0] < 1e-10)
    throw NumericError("degenerate many-body ground space (gap < 1e-10)");
  VectorXd g = spec.vectors.col(0);
  int imax = 0;
  g.cwiseAbs().maxCoeff(&imax);
  if (g[imax] < 0) g = -g;
  return g.cast<cplx>();
}

inline double ground_energy(const ManyBodyOperator& op) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(op.matrix, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericError("dense spin eigensolver failed to converge");
  return es.eigenvalues()[0];
}

inline ManyBodyState evolve(const SpinSpectrum& spec, const ManyBodyState& state, double t) {
  VectorXcd coeffs = spec.vectors.transpose() * state;
  for (int k = 0; k < coeffs.size(); ++k) coeffs[k] *= std::exp(cplx(0, -spec.energies[k] * t));
  return spec.vectors * coeffs;
}

inline double expectation_sigma_z(const ManyBodyState& state, int n_sites, int site) {
  if (site < 0 || site >= n_sites) throw ValidationError("site index out of range");
  double value = 0;
  for (int s = 0; s < state.size(); ++s) value += std::norm(state[s]) * sigma_z_of(s, site);
  return value;
}

inline double expectation_sigma_zz(const ManyBodyState& state, int i, int j) {
  double value = 0;
  for (int s = 0; s < state.size(); ++s) value += std::norm(state[s]) * sigma_z_of(s, i) * sigma_z_of(s, j);
  return value;
}

// All pieces of one echo computation, cached so a time series costs three
// dense diagonalizations total.
class EchoOracle {
 public:
  explicit EchoOracle(const QuenchProtocol& p) : protocol_(p) {
    p.validate();
    if (p.n_sites > kMaxSitesEcho) throw ValidationError("oracle echo limited to n <= 10");
    const auto h_initial = build_spin_hamiltonian(channel_fields(p, Channel::down_down, Stage::pre_quench),
                                                  p.coupling_j, p.boundary);
    ground_ = ground_state(h_initial);
    spec_dd_ = diagonalize(build_spin_hamiltonian(channel_fields(p, Channel::down_down, Stage::post_quench),
                                                  p.coupling_j, p.boundary));
    spec_uu_ = diagonalize(build_spin_hamiltonian(channel_fields(p, Channel::up_up, Stage::post_quench),
                                                  p.coupling_j, p.boundary));
  }

  // L(t) = |<G| exp(i H_dd t) exp(-i H_uu t) |G>|^2
  double echo(double t) const {
    const VectorXcd phi_dd = evolve(spec_dd_, ground_, t);
    const VectorXcd phi_uu = evolve(spec_uu_, ground_, t);
    return std::norm(phi_dd.dot(phi_uu));
  }

  // sigma^z on `site` after evolving the ground state under one channel
  double sigma_z_at(Channel channel, int site, double t) const {
    const auto& spec = channel == Channel::up_up ? spec_uu_ : spec_dd_;
    return expectation_sigma_z(evolve(spec, ground_, t), protocol_.n_sites, site);
  }

  const ManyBodyState& ground() const { return ground_; }
  const QuenchProtocol& protocol() const { return protocol_; }

 private:
  QuenchProtocol protocol_;
  ManyBodyState ground_;
  SpinSpectrum spec_dd_, spec_uu_;
};

inline double oracle_echo(const QuenchProtocol& p, double t) { return EchoOracle(p).echo(t); }

inline std::vector<double> oracle_echo_series(const QuenchProtocol& p, const std::vector<double>& times) {
  EchoOracle oracle(p);
  std::vector<double> echo(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) echo[i] = oracle.echo(times[i]);
  return echo;
}

// Ground-state variance of the interaction Hamiltonian -eps (sz_0 + sz_d). The
// operator is diagonal in the computational basis, so no matrix products needed.
inline double oracle_variance(const QuenchProtocol& p) {
  p.validate();
  if (p.n_sites > kMaxSitesBuild) throw ValidationError("oracle variance limited to n <= 12");
  const auto h_initial = build_spin_hamiltonian(channel_fields(p, Channel::down_down, Stage::pre_quench),
                                                p.coupling_j, p.boundary);
  const VectorXcd g = ground_state(h_initial);
  double mean = 0, mean_sq = 0;
  for (int s = 0; s < g.size(); ++s) {
    const double v = -p.epsilon * (sigma_z_of(s, 0) + sigma_z_of(s, p.separation));
    const double w = std::norm(g[s]);
    mean += w * v;
    mean_sq += w * v * v;
  }
  return mean_sq - mean * mean;
}

}  // namespace qecho::oracle
