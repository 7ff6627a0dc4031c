#include <gtest/gtest.h>

#include "doco/control_synthesis.hpp"
#include "doco/scenario.hpp"
#include "oracles.hpp"

using namespace doco;

namespace {

Model agent(int i) { return builtin_scenario("example1").agents.at(static_cast<std::size_t>(i)).model; }

Model integrator(int n) { return {Matrix::Zero(n, n), Matrix::Identity(n, n), Matrix::Identity(n, n)}; }

double residual(const Model& m, const RegulatorSolution<double>& r) {
  const Matrix I = Matrix::Identity(m.outputs(), m.outputs());
  return std::max({(m.B * r.Gamma - r.Psi).norm(), (m.B * r.Upsilon - m.A * r.Psi).norm(), (m.C * r.Psi - I).norm()});
}

}  // namespace

TEST(RankCondition, ScalarIntegratorHolds) { EXPECT_TRUE(check_rank_condition(integrator(1))); }

TEST(RankCondition, ExampleAgentOneMatchesDirectRank) {
  const Model m = agent(0);
  Matrix S = Matrix::Zero(4, 4);
  S.topLeftCorner(2, 2) = m.C * m.B;
  S.bottomLeftCorner(2, 2) = -m.A * m.B;
  S.bottomRightCorner(2, 2) = m.B;
  EXPECT_EQ(Eigen::FullPivLU<Matrix>(S).rank(), 4);
  EXPECT_TRUE(check_rank_condition(m));
}

TEST(RankCondition, ZeroInputMatrixFails) {
  Model m = agent(0);
  m.B.setZero();
  EXPECT_FALSE(check_rank_condition(m));
}

TEST(RankCondition, ShapeMismatchIsStructural) {
  Model m = agent(0);
  m.C = Matrix::Identity(2, 3);
  EXPECT_THROW(check_rank_condition(m), StructuralError);
}

TEST(Regulator, SingleIntegratorIsIdentity) {
  for (int n : {1, 2, 3}) {
    const auto r = solve_regulator_equations(integrator(n));
    EXPECT_EQ(r.Gamma, Matrix::Identity(n, n));
    EXPECT_EQ(r.Psi, Matrix::Identity(n, n));
    EXPECT_EQ(r.Upsilon, Matrix::Zero(n, n));
  }
}

TEST(Regulator, AgentOneMatchesDirectSolve) {
  const Model m = agent(0);
  const auto r = solve_regulator_equations(m);
  Matrix psi(2, 2);
  psi << 0.5, 0, 0, 1;
  const Matrix Binv = m.B.inverse();
  EXPECT_LE((r.Psi - psi).norm(), 1e-12);
  EXPECT_LE((r.Gamma - Binv * psi).norm(), 1e-12);
  EXPECT_LE((r.Upsilon - Binv * m.A * psi).norm(), 1e-12);
}

TEST(Regulator, AllExampleAgentsResidualBelowTolerance) {
  for (int i = 0; i < 6; ++i) EXPECT_LE(residual(agent(i), solve_regulator_equations(agent(i))), 1e-10) << i;
}

TEST(Regulator, RankFailureIsReported) {
  Model m = agent(0);
  m.B.setZero();
  EXPECT_THROW(solve_regulator_equations(m), SynthesisError);
}

TEST(Feedback, ScalarIntegratorMatchesRiccati) {
  const Model m = integrator(1);
  const Matrix K = synthesize_state_feedback(m, 1.0);
  EXPECT_NEAR(K(0, 0), 1.0 + std::sqrt(2.0), 1e-10);
  EXPECT_NEAR(K(0, 0), oracle::scalar_lqr_gain(1.0, 1.0), 1e-10);
  EXPECT_LE(spectral_abscissa(Matrix(m.A - m.B * K)), -1.0);
}

TEST(Feedback, HurwitzPlantWithZeroMargin) {
  Model m{Matrix::Constant(1, 1, -2.0), Matrix::Identity(1, 1), Matrix::Identity(1, 1)};
  const Matrix K = synthesize_state_feedback(m, 0.0);
  EXPECT_TRUE(is_hurwitz(Matrix(m.A - m.B * K)));
}

TEST(Feedback, AgentFiveIsStabilized) {
  const Model m = agent(4);
  const Matrix K = synthesize_state_feedback(m, 0.5);
  EXPECT_TRUE(is_hurwitz(Matrix(m.A - m.B * K)));
  EXPECT_LE(spectral_abscissa(Matrix(m.A - m.B * K)), -0.5 + 1e-9);
}

TEST(Feedback, UncontrollablePairThrows) {
  Matrix A(2, 2), B(2, 1);
  A << 1, 0, 0, 2;
  B << 1, 0;
  EXPECT_THROW(synthesize_state_feedback<double>(A, B, 0.5), SynthesisError);
}

TEST(Observer, ScalarDual) {
  const Matrix H = synthesize_observer_gain(integrator(1), 1.0);
  EXPECT_NEAR(H(0, 0), 1.0 + std::sqrt(2.0), 1e-10);
}

TEST(Observer, AgentThreeIsStable) {
  const Model m = agent(2);
  EXPECT_TRUE(is_hurwitz(Matrix(m.A - synthesize_observer_gain(m, 0.5) * m.C)));
}

TEST(Observer, EqualsTransposedDualFeedback) {
  for (int i = 0; i < 6; ++i) {
    const Model m = agent(i);
    const Model dual{m.A.transpose(), m.C.transpose(), m.B.transpose()};
    const Matrix H = synthesize_observer_gain(m, 0.5);
    const Matrix K = synthesize_state_feedback(dual, 0.5);
    EXPECT_LE((H - K.transpose()).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Observer, UndetectableThrows) {
  Matrix A(2, 2), C(1, 2);
  A << 1, 0, 0, 2;
  C << 1, 0;
  Model m{A, Matrix::Identity(2, 2), C};
  EXPECT_THROW(synthesize_observer_gain(m, 0.5), SynthesisError);
}

TEST(Hurwitz, Basics) {
  EXPECT_TRUE(is_hurwitz(Matrix::Constant(1, 1, -1.0)));
  Matrix rot(2, 2);
  rot << 0, 1, -1, 0;
  EXPECT_FALSE(is_hurwitz(rot));
  const Model m = agent(3);
  EXPECT_TRUE(is_hurwitz(Matrix(m.A - m.B * synthesize_state_feedback(m, 0.5))));
}

TEST(Lyapunov, MatchesKroneckerSolve) {
  for (int i = 0; i < 6; ++i) {
    const Model m = agent(i);
    const auto g = synthesize_gains(m, 0.5);
    const Matrix AH = error_dynamics_matrix<double>(m.A, m.B, m.C, g.K, g.H);
    const Matrix Q = Matrix::Identity(AH.rows(), AH.cols());
    const Matrix X = solve_lyapunov<double>(AH, Q);
    const Matrix ref = oracle::lyapunov_kron(AH, Q);
    EXPECT_LE((X - ref).norm(), 1e-9 * ref.norm()) << i;
  }
}

TEST(Certificate, ScalarAndDiagonal) {
  auto c = solve_certificate_matrix<double>(Matrix::Constant(1, 1, -1.0), 1.0);
  EXPECT_NEAR(c.P(0, 0), 0.55, 1e-14);
  Matrix D = Matrix::Zero(2, 2);
  D.diagonal() << -1, -2;
  c = solve_certificate_matrix<double>(D, 2.0);
  EXPECT_NEAR(c.P(0, 0), 1.1, 1e-14);
  EXPECT_NEAR(c.P(1, 1), 0.55, 1e-14);
  EXPECT_NEAR(c.P(0, 1), 0.0, 1e-14);
  EXPECT_THROW(solve_certificate_matrix<double>(Matrix::Zero(1, 1), 1.0), PreconditionError);
}

TEST(Certificate, NetworkCertificateProperties) {
  const auto net = build_network(builtin_scenario("example1"));
  const auto nc = network_certificate(net, 0.1);
  const Matrix& P = nc.certificate.P;
  EXPECT_LE((P - P.transpose()).norm(), 1e-12 * P.norm());
  EXPECT_GT(Eigen::SelfAdjointEigenSolver<Matrix>(P).eigenvalues().minCoeff(), 0.0);
  std::vector<Matrix> A, B, C, K, H;
  for (std::size_t i = 0; i < net.models.size(); ++i) {
    A.push_back(net.models[i].A);
    B.push_back(net.models[i].B);
    C.push_back(net.models[i].C);
    K.push_back(net.gains[i].K);
    H.push_back(net.gains[i].H);
  }
  const Matrix AH = error_dynamics_matrix<double>(block_diagonal(A), block_diagonal(B), block_diagonal(C),
                                                  block_diagonal(K), block_diagonal(H));
  const Matrix S = -(AH.transpose() * P + P * AH) - nc.certificate.varsigma2 * Matrix::Identity(AH.rows(), AH.cols());
  EXPECT_GT(Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (S + S.transpose())).eigenvalues().minCoeff(), 0.0);
}

TEST(Certificate, ConstantsFollowDefinition) {
  const Model m = agent(0);
  const auto g = synthesize_gains(m, 0.5);
  const auto [s1, s2] = certificate_constants<double>(m.A, m.B, m.C, g.K, 0.1, 1.0);
  EXPECT_DOUBLE_EQ(s1, 0.025);
  const Matrix CA = m.C * (m.A - m.B * g.K);
  const Matrix BK = m.B * g.K;
  const double a = Eigen::JacobiSVD<Matrix>(CA).singularValues()(0);
  const double b = Eigen::JacobiSVD<Matrix>(BK).singularValues()(0);
  EXPECT_NEAR(s2, 1.01 * std::max(a * a, b * b) / (4 * 0.025), 1e-9 * s2);
}

TEST(Synthesis, LongDoubleInstantiation) {
  LtiModel<long double> m;
  m.A = MatrixX<long double>::Zero(1, 1);
  m.B = MatrixX<long double>::Identity(1, 1);
  m.C = MatrixX<long double>::Identity(1, 1);
  const auto g = synthesize_gains<long double>(m, 1.0L);
  EXPECT_NEAR(static_cast<double>(g.K(0, 0)), 1.0 + std::sqrt(2.0), 1e-12);
}
