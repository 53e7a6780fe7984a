#include "qecho/fermion_dynamics.hpp"
#include "qecho/ed_oracle.hpp"

#include <doctest.h>

using namespace qecho;

namespace {

QuenchProtocol small_protocol() {
  QuenchProtocol p;
  p.n_sites = 4;
  p.lambda_initial = 1.5;
  p.lambda_final = 0.5;
  p.epsilon = 0.1;
  p.separation = 1;
  return p;
}

}  // namespace

TEST_CASE("channel fields: defects only in the post-quench up-up channel") {
  QuenchProtocol p = small_protocol();

  const VectorXd up = channel_fields(p, Channel::up_up, Stage::post_quench);
  CHECK(up[0] == doctest::Approx(0.6));
  CHECK(up[1] == doctest::Approx(0.6));
  CHECK(up[2] == doctest::Approx(0.5));
  CHECK(up[3] == doctest::Approx(0.5));

  const VectorXd down = channel_fields(p, Channel::down_down, Stage::post_quench);
  for (int i = 0; i < 4; ++i) CHECK(down[i] == 0.5);

  for (Channel ch : {Channel::up_up, Channel::down_down}) {
    const VectorXd pre = channel_fields(p, ch, Stage::pre_quench);
    for (int i = 0; i < 4; ++i) CHECK(pre[i] == 1.5);
  }
}

TEST_CASE("channel fields: up-up and down-down differ by epsilon at the coupling sites") {
  QuenchProtocol p = small_protocol();
  p.n_sites = 8;
  for (int d : {0, 1, 3, 7}) {
    p.separation = d;
    const VectorXd up = channel_fields(p, Channel::up_up, Stage::post_quench);
    const VectorXd down = channel_fields(p, Channel::down_down, Stage::post_quench);
    int differing = 0;
    for (int i = 0; i < p.n_sites; ++i)
      if (up[i] != down[i]) {
        ++differing;
        CHECK(up[i] - down[i] == doctest::Approx(d == 0 ? 2 * p.epsilon : p.epsilon));
      }
    CHECK(differing == (d == 0 ? 1 : 2));
  }
}

TEST_CASE("coupling matrices: two-site open chain") {
  const auto cm = build_coupling_matrices(VectorXd::Constant(2, 0.5), 1.0, Boundary::open);
  MatrixXd a_expect(2, 2), b_expect(2, 2);
  a_expect << -1, -1, -1, -1;
  b_expect << 0, -1, 1, 0;
  CHECK((cm.hopping - a_expect).cwiseAbs().maxCoeff() == 0);
  CHECK((cm.pairing - b_expect).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("coupling matrices: decoupled sites at j = 0") {
  const double lambda = 0.83;
  const auto cm = build_coupling_matrices(VectorXd::Constant(4, lambda), 0.0, Boundary::periodic);
  CHECK((cm.hopping + 2 * lambda * MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() == 0);
  CHECK(cm.pairing.cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("coupling matrices: symmetry invariants") {
  for (Boundary b : {Boundary::periodic, Boundary::open}) {
    VectorXd fields(6);
    fields << 0.3, 1.9, 0.2, 2.5, 0.0, 0.7;
    const auto cm = build_coupling_matrices(fields, 1.3, b);
    CHECK((cm.hopping - cm.hopping.transpose()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((cm.pairing + cm.pairing.transpose()).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("coupling matrices: size validation") {
  CHECK_THROWS_AS(build_coupling_matrices(VectorXd::Constant(1, 1.0), 1.0, Boundary::open), ValidationError);
  CHECK_THROWS_AS(build_coupling_matrices(VectorXd::Constant(5, 1.0), 1.0, Boundary::periodic), ValidationError);
  CHECK_THROWS_AS(build_coupling_matrices(VectorXd::Constant(2, 1.0), 1.0, Boundary::periodic), ValidationError);
}

TEST_CASE("single-particle matrix: N = 1 block form and symmetry") {
  CouplingMatrices cm;
  cm.hopping = MatrixXd::Constant(1, 1, -2.0 * 0.7);
  cm.pairing = MatrixXd::Zero(1, 1);
  const MatrixXd h = build_single_particle_hamiltonian(cm);
  CHECK(h(0, 0) == doctest::Approx(1.4));
  CHECK(h(1, 1) == doctest::Approx(-1.4));
  CHECK(h(0, 1) == 0);
  CHECK(h(1, 0) == 0);
}

TEST_CASE("single-particle matrix: symmetric for generic inputs") {
  VectorXd fields(8);
  fields << 0.1, 1.2, 0.4, 0.9, 2.0, 0.5, 1.1, 0.3;
  const auto h = build_single_particle_hamiltonian(build_coupling_matrices(fields, 0.8, Boundary::periodic));
  CHECK((h - h.transpose()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("single-particle spectrum is symmetric about zero") {
  VectorXd fields(6);
  fields << 1.5, 0.2, 0.8, 1.5, 0.9, 0.1;
  const auto h = build_single_particle_hamiltonian(build_coupling_matrices(fields, 1.0, Boundary::periodic));
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(h);
  const auto& e = es.eigenvalues();
  for (int k = 0; k < e.size(); ++k)
    CHECK(e[k] == doctest::Approx(-e[e.size() - 1 - k]).epsilon(1e-10));
}

TEST_CASE("free-fermion spectrum matches the closed-form dispersion on the antiperiodic grid") {
  const int n = 8;
  const double lambda = 1.5;
  const auto dec = decompose_uniform(n, 1.0, lambda, Boundary::periodic);
  std::vector<double> expected;
  for (int m = 0; m < n; ++m) {
    const double k = M_PI * (2 * m + 1) / n;
    expected.push_back(2.0 * std::sqrt(lambda * lambda - 2 * lambda * std::cos(k) + 1.0));
  }
  std::sort(expected.begin(), expected.end());
  for (int k = 0; k < n; ++k) CHECK(dec.energies[n + k] == doctest::Approx(expected[k]).epsilon(1e-10));
}

TEST_CASE("quadratic-form ground energy equals the dense many-body ground energy") {
  const int n = 8;
  for (Boundary b : {Boundary::periodic, Boundary::open}) {
    for (double lambda : {1.5, 0.5}) {
      const auto dec = decompose_uniform(n, 1.0, lambda, b);
      const auto h_spin = oracle::build_spin_hamiltonian(VectorXd::Constant(n, lambda), 1.0, b);
      CHECK(ground_state_energy(dec) == doctest::Approx(oracle::ground_energy(h_spin)).epsilon(1e-10));
    }
  }
}

TEST_CASE("protocol validation rejects out-of-contract parameters") {
  QuenchProtocol p = small_protocol();
  p.separation = 4;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = small_protocol();
  p.n_sites = 6;
  p.boundary = Boundary::periodic;
  CHECK_NOTHROW(p.validate());
  p.n_sites = 7;
  p.separation = 1;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = small_protocol();
  p.coupling_j = 0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = small_protocol();
  p.epsilon = -0.1;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = small_protocol();
  p.lambda_initial = -0.5;
  CHECK_THROWS_AS(p.validate(), ValidationError);
}
