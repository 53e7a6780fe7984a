#pragma once

#include "qecho/common.hpp"

namespace qecho {

// Spin boundary condition. With periodic spins and even N the dynamics stays in
// the even parity sector, which maps to antiperiodic fermions; that sign is
// applied to the boundary bond below.
enum class Boundary { periodic, open };

enum class Channel { up_up, down_down };
enum class Stage { pre_quench, post_quench };

inline const char* to_string(Boundary b) {
  return b == Boundary::periodic ? "periodic-spin" : "open";
}

// One complete experiment: a chain of n_sites with the transverse field quenched
// lambda_initial -> lambda_final at t = 0, and two qubits coupled with strength
// epsilon at sites 0 and `separation`.
struct QuenchProtocol {
  int n_sites = 100;
  double coupling_j = 1.0;
  double lambda_initial = 1.5;
  double lambda_final = 0.5;
  double epsilon = 0.1;
  int separation = 1;
  Boundary boundary = Boundary::periodic;

  void validate() const {
    if (n_sites < 2) throw ValidationError("n must be at least 2");
    if (boundary == Boundary::periodic) {
      if (n_sites % 2 != 0) throw ValidationError("periodic-spin boundary requires even n (parity sector convention)");
      if (n_sites < 4) throw ValidationError("periodic-spin boundary requires n >= 4");
    }
    if (!(coupling_j > 0)) throw ValidationError("j must be positive");
    if (lambda_initial < 0 || lambda_final < 0) throw ValidationError("transverse fields must be non-negative");
    if (epsilon < 0) throw ValidationError("epsilon must be non-negative");
    if (separation < 0 || separation >= n_sites) throw ValidationError("d must satisfy 0 <= d < n");
  }
};

// Quadratic-form matrices of the fermionized chain,
//   H = sum_ij c_i^dag A_ij c_j + 1/2 sum_ij (c_i^dag B_ij c_j^dag + h.c.)
// hopping (A) is symmetric with the site fields on the diagonal, pairing (B) is
// antisymmetric.
struct CouplingMatrices {
  MatrixXd hopping;
  MatrixXd pairing;
};

// Per-site transverse fields of one dephasing channel. The pre-quench stage is
// channel-free: the initial state is the bare-chain ground state. Post-quench,
// the up-up channel carries extra fields epsilon at the two coupling sites
// (a single 2*epsilon defect when d = 0).
inline VectorXd channel_fields(const QuenchProtocol& p, Channel channel, Stage stage) {
  p.validate();
  const double lambda = stage == Stage::pre_quench ? p.lambda_initial : p.lambda_final;
  VectorXd fields = VectorXd::Constant(p.n_sites, lambda);
  if (stage == Stage::post_quench && channel == Channel::up_up) {
    fields[0] += p.epsilon;
    fields[p.separation] += p.epsilon;
  }
  return fields;
}

inline CouplingMatrices build_coupling_matrices(const VectorXd& fields, double j, Boundary boundary) {
  const int n = static_cast<int>(fields.size());
  if (n < 2) throw ValidationError("coupling matrices require at least 2 sites");
  if (boundary == Boundary::periodic && (n % 2 != 0 || n < 4))
    throw ValidationError("periodic-spin boundary requires even n >= 4");

  CouplingMatrices cm;
  cm.hopping = MatrixXd::Zero(n, n);
  cm.pairing = MatrixXd::Zero(n, n);
  cm.hopping.diagonal() = -2.0 * fields;
  for (int s = 0; s + 1 < n; ++s) {
    cm.hopping(s, s + 1) = cm.hopping(s + 1, s) = -j;
    cm.pairing(s, s + 1) = -j;
    cm.pairing(s + 1, s) = j;
  }
  if (boundary == Boundary::periodic) {
    // boundary bond with the antiperiodic (even parity sector) sign flip
    cm.hopping(n - 1, 0) = cm.hopping(0, n - 1) = j;
    cm.pairing(n - 1, 0) = j;
    cm.pairing(0, n - 1) = -j;
  }
  return cm;
}

// Single-particle matrix acting on Psi = (c^dag, c):  [[-A, -B], [B, A]].
// Symmetric by construction since A = A^T and B = -B^T.
inline MatrixXd build_single_particle_hamiltonian(const CouplingMatrices& cm) {
  const int n = static_cast<int>(cm.hopping.rows());
  if (cm.hopping.cols() != n || cm.pairing.rows() != n || cm.pairing.cols() != n)
    throw ValidationError("coupling matrices must be square and of equal size");
  MatrixXd h(2 * n, 2 * n);
  h.topLeftCorner(n, n) = -cm.hopping;
  h.topRightCorner(n, n) = -cm.pairing;
  h.bottomLeftCorner(n, n) = cm.pairing;
  h.bottomRightCorner(n, n) = cm.hopping;
  return h;
}

}  // namespace qecho
