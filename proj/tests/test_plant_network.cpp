#include <gtest/gtest.h>

#include "doco/plant_network.hpp"
#include "doco/scenario.hpp"

using namespace doco;

TEST(Plant, Derivatives) {
  const Model integ{Matrix::Zero(2, 2), Matrix::Identity(2, 2), Matrix::Identity(2, 2)};
  Vector u(2);
  u << 0.3, -1;
  EXPECT_EQ(plant_derivative(integ, Vector::Zero(2), u), u);

  const Model m = builtin_scenario("example1").agents[0].model;
  const Vector xd = plant_derivative(m, Vector::Ones(2), Vector::Zero(2));
  EXPECT_DOUBLE_EQ(xd(0), 1.0);
  EXPECT_DOUBLE_EQ(xd(1), 2.0);
  EXPECT_EQ(output(m, Vector::Ones(2)), m.C * Vector::Ones(2));
  EXPECT_THROW(plant_derivative(m, Vector::Ones(3), Vector::Zero(2)), StructuralError);
}

TEST(Plant, HurwitzFreeResponseDecays) {
  Matrix A(2, 2);
  A << -1, 2, 0, -3;
  const Model m{A, Matrix::Identity(2, 2), Matrix::Identity(2, 2)};
  Vector x = Vector::Ones(2);
  const double dt = 1e-3;
  for (int s = 0; s < 5000; ++s) x += dt * plant_derivative(m, x, Vector::Zero(2));
  // Slowest mode e^{-t}: by t = 5 the state is well below its start.
  EXPECT_LT(x.norm(), 0.1);
}

TEST(Observer, MatchedEstimateMimicsPlant) {
  const auto spec = builtin_scenario("example1");
  const auto net = build_network(spec);
  const Vector x = Vector::Constant(2, 0.7), u = Vector::Constant(2, -0.2);
  EXPECT_EQ(observer_derivative(net.models[0], net.gains[0], x, u, output(net.models[0], x)),
            plant_derivative(net.models[0], x, u));
}

TEST(Observer, ScalarErrorDecay) {
  const Model m{Matrix::Zero(1, 1), Matrix::Zero(1, 1), Matrix::Identity(1, 1)};
  Gains g;
  g.H = Matrix::Constant(1, 1, 2.0);
  Vector x = Vector::Constant(1, 1.0), xh = Vector::Zero(1);
  const double dt = 1e-4;
  for (int s = 0; s < 10000; ++s) xh += dt * observer_derivative(m, g, xh, Vector::Zero(1), output(m, x));
  // e(1) = e^{-2} up to first-order Euler error.
  EXPECT_NEAR((x - xh)(0), std::exp(-2.0), 2e-4);
}

TEST(Observer, ErrorEnvelopeFollowsSpectralAbscissa) {
  const auto net = build_network(builtin_scenario("example1"));
  const auto& m = net.models[0];
  const auto& g = net.gains[0];
  const double lambda = -spectral_abscissa(Matrix(m.A - g.H * m.C));
  Vector x = Vector::Zero(2), xh(2);
  xh << 1, -1;
  const double dt = 1e-4;
  const double e0 = (x - xh).norm();
  std::vector<double> logs;
  for (int s = 1; s <= 40000; ++s) {
    xh += dt * observer_derivative(m, g, xh, Vector::Zero(2), output(m, x));
    x += dt * plant_derivative(m, x, Vector::Zero(2));
    if (s % 10000 == 0) logs.push_back(std::log((x - xh).norm() / e0));
  }
  // Asymptotic slope between t = 2 and t = 4.
  const double slope = (logs[3] - logs[1]) / 2.0;
  EXPECT_LE(slope, -lambda * 0.9);
}

TEST(Graph, Connectivity) {
  EXPECT_TRUE(is_connected(Graph::ring(6)));
  Eigen::MatrixXi two(4, 4);
  two << 0, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 1, 0, 0, 1, 0;
  EXPECT_FALSE(is_connected(two));
  EXPECT_TRUE(is_connected(Eigen::MatrixXi::Zero(1, 1)));
  Eigen::MatrixXi asym(2, 2);
  asym << 0, 1, 0, 0;
  EXPECT_THROW(is_connected(asym), StructuralError);
}

TEST(Graph, Validation) {
  Eigen::MatrixXi asym(2, 2);
  asym << 0, 1, 0, 0;
  try {
    Graph g(asym);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.rule(), "adjacency not symmetric");
  }
  Eigen::MatrixXi weighted(2, 2);
  weighted << 0, 2, 2, 0;
  EXPECT_THROW(Graph{weighted}, ValidationError);
  Eigen::MatrixXi loop(2, 2);
  loop << 1, 1, 1, 0;
  EXPECT_THROW(Graph{loop}, ValidationError);
}

TEST(Graph, RandomConnectedIsReproducible) {
  const Graph a = Graph::random_connected(50, 0.1, 12);
  const Graph b = Graph::random_connected(50, 0.1, 12);
  EXPECT_EQ(a, b);
  EXPECT_TRUE(is_connected(a));
  EXPECT_EQ(Graph::ring(6).edge_count(), 6);
}

TEST(Network, InitialState) {
  const auto net = build_network(builtin_scenario("example1"));
  const auto s = initial_network_state(net);
  ASSERT_EQ(s.agents.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(s.agents[i].x, net.initial_state[i]);
    EXPECT_TRUE(s.agents[i].x_hat.isZero());
    EXPECT_TRUE(s.agents[i].eta.isZero());
    EXPECT_TRUE(s.agents[i].mu.isZero());
  }
  EXPECT_EQ(net.total_outputs(), 14);
  EXPECT_EQ(net.total_states(), 14);
}
