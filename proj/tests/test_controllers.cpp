#include <gtest/gtest.h>

#include "doco/random.hpp"
#include "doco/scenario.hpp"
#include "fixtures.hpp"

using namespace doco;

namespace {

using fixture::pair_network;

GlobalParameters pair_params(double k_mu) {
  GlobalParameters p;
  p.epsilon = 0.5;
  p.k_mu = k_mu;
  p.agents = 2;
  p.constraint_dim = 1;
  return p;
}

}  // namespace

TEST(Variant, ParseAndValidate) {
  EXPECT_EQ(parse_variant("event-triggered"), VariantKind::EventTriggered);
  EXPECT_FALSE(parse_variant("bogus").has_value());
  ControllerVariant v;
  v.kind = VariantKind::EventTriggered;
  v.sigma = 0;
  EXPECT_THROW(v.validate(), ValidationError);
}

TEST(Control, SingleIntegratorInputSubstitution) {
  Gains g;
  g.K = Matrix::Identity(1, 1);
  g.Gamma = g.Psi = Matrix::Identity(1, 1);
  g.Upsilon = Matrix::Zero(1, 1);
  const Vector xh = Vector::Constant(1, 0.4), eta = Vector::Constant(1, 1.5), ed = Vector::Constant(1, -0.2);
  EXPECT_DOUBLE_EQ(control_input(g, xh, eta, ed)(0), -0.4 + -0.2 + 1.5);
}

TEST(Control, SaddleInputReducesToFeedback) {
  const auto net = build_network(builtin_scenario("example1"));
  const auto& g = net.gains[2];
  const Vector x = Vector::Constant(2, 0.3), eta = Vector::Constant(2, 1.1);
  const Vector u = control_input(g, x, eta, Vector::Zero(2));
  EXPECT_LE((u - (-g.K * x - (g.Upsilon - g.K * g.Psi) * eta)).norm(), 1e-14);
}

TEST(Control, BoundaryBlocksOutwardPush) {
  const auto net = pair_network();
  // At y = 5 (upper face) the cost pulls down; at y = 0 with center 2 it pushes up.
  const Vector up = primal_drift(net.problems[0], 0, Vector::Constant(1, 5.0), Vector::Zero(1), 1.0);
  EXPECT_LT(up(0), 0.0);
  const auto heavy = net.problems[0];
  const Vector mu = Vector::Constant(1, 100.0);
  const Vector low = primal_drift(heavy, 0, Vector::Constant(1, 0.0), mu, 1.0);
  EXPECT_EQ(low(0), 0.0);
}

TEST(Control, ReferenceOnFaceStopsWhileOutputLags) {
  const auto net = pair_network();
  const auto params = pair_params(3.0);
  auto state = initial_network_state(net);
  // Output y_1 = 1 is interior but the reference eta_1 = 0 sits on the lower
  // face; mu_1 = 10 pushes down: -0.5 (2 (1 - 2) + 10) = -4.
  state.agents[0].mu = Vector::Constant(1, 10.0);
  const Blocks y = outputs(net, state);
  const ControlContext ctx{net, params, state.agents, y, 0.0};
  EXPECT_EQ(continuous_control(ctx, 0).eta_dot(0), 0.0);
  state.agents[0].eta = Vector::Constant(1, 1.0);
  const ControlContext inner{net, params, state.agents, y, 0.0};
  EXPECT_DOUBLE_EQ(continuous_control(inner, 0).eta_dot(0), -4.0);
}

TEST(Control, EventTriggeredHandCase) {
  const auto net = pair_network();
  const auto params = pair_params(3.0);
  auto state = initial_network_state(net);
  state.agents[0].mu = state.agents[0].mu_hat = Vector::Constant(1, 2.0);
  state.agents[1].mu = state.agents[1].mu_hat = Vector::Constant(1, 0.5);
  const Blocks y = outputs(net, state);
  const ControlContext ctx{net, params, state.agents, y, 0.0};
  // g_1 = 1 - 1 = 0; mu_1 > mu_2: eps (0 - 2 K_mu) = 0.5 * -6.
  EXPECT_DOUBLE_EQ(event_triggered_control(ctx, 0).mu_dot(0), -3.0);
  // g_2 = 2 - 1 = 1: 0.5 * (1 + 6).
  EXPECT_DOUBLE_EQ(event_triggered_control(ctx, 1).mu_dot(0), 3.5);
  // Continuous variant uses K_mu once.
  EXPECT_DOUBLE_EQ(continuous_control(ctx, 0).mu_dot(0), -1.5);

  state.agents[1].mu_hat = state.agents[0].mu_hat;
  const ControlContext equal{net, params, state.agents, y, 0.0};
  EXPECT_DOUBLE_EQ(event_triggered_control(equal, 1).mu_dot(0), 0.5);
}

TEST(Control, NoisyWithZeroNoiseEqualsContinuous) {
  const auto net = pair_network();
  const auto params = pair_params(3.0);
  auto state = initial_network_state(net);
  state.agents[0].mu = Vector::Constant(1, 0.8);
  const Blocks y = outputs(net, state);
  const ControlContext ctx{net, params, state.agents, y, 0.3};
  for (int i = 0; i < 2; ++i) {
    const auto a = continuous_control(ctx, i);
    const auto b = noisy_control(ctx, i, [](int) { return Vector::Zero(1); });
    EXPECT_EQ(a.mu_dot, b.mu_dot);
    EXPECT_EQ(a.eta_dot, b.eta_dot);
    EXPECT_EQ(a.u, b.u);
  }
  // Equal multipliers: noise is scaled by |mu_i - mu_j| = 0.
  state.agents[0].mu = state.agents[1].mu;
  const ControlContext same{net, params, state.agents, y, 0.3};
  EXPECT_EQ(noisy_control(same, 0, [](int) { return Vector::Constant(1, 0.9); }).mu_dot,
            continuous_control(same, 0).mu_dot);
}

TEST(Trigger, HandEvaluatedThreshold) {
  GlobalParameters p = pair_params(2.0);
  Eigen::MatrixXi a(2, 2);
  a << 0, 1, 1, 0;
  const Graph g(a);
  const Blocks mu_hat{Vector::Constant(1, 1.0), Vector::Constant(1, 1.0)};
  EXPECT_NEAR(trigger_threshold(0, mu_hat, g, p, 1.0, 0.7, 0.0), 1.0 / 24.0, 1e-15);
  EXPECT_TRUE(trigger_check(Vector::Constant(1, 0.05), 0, mu_hat, g, p, 1.0, 0.7, 0.0));
  EXPECT_FALSE(trigger_check(Vector::Constant(1, 0.01), 0, mu_hat, g, p, 1.0, 0.7, 0.0));
  EXPECT_FALSE(trigger_check(Vector::Zero(1), 0, mu_hat, g, p, 1.0, 0.7, 0.0));
}

TEST(GainConditions, ExampleOne) {
  const auto spec = builtin_scenario("example1");
  const auto constants = problem_constants(build_problems(spec));
  GlobalParameters p;
  p.agents = 6;
  p.constraint_dim = 1;
  p.epsilon = 0.1;
  p.k_mu = 200;
  ControllerVariant v;
  auto r = validate_gain_conditions(p, v, constants);
  EXPECT_TRUE(r.certified());
  p.k_mu = 179;
  r = validate_gain_conditions(p, v, constants);
  ASSERT_FALSE(r.certified());
  EXPECT_EQ(r.first_failure()->rule, "K_mu >= N*K_g");
  p.k_mu = 0;
  EXPECT_FALSE(validate_gain_conditions(p, v, constants).certified());
}

TEST(GainConditions, NoisyBoundary) {
  ProblemConstants c;
  c.k_g = 30;
  GlobalParameters p;
  p.agents = 6;
  p.constraint_dim = 1;
  p.epsilon = 0.1;
  p.k_mu = 36 * 30;
  ControllerVariant v;
  v.kind = VariantKind::Noisy;
  auto r = validate_gain_conditions(p, v, c);
  EXPECT_TRUE(r.certified());
  EXPECT_DOUBLE_EQ(r.conditions[2].margin(), 0.0);
  EXPECT_DOUBLE_EQ(r.conditions[3].value, 0.0);  // budget 1/2 - 1/2
  v.noise.amplitude = 0.1;
  EXPECT_FALSE(validate_gain_conditions(p, v, c).certified());
}

TEST(Noise, SymmetryIdentity) {
  const NoiseModel noise{0.2};
  const double d = 0.3;
  const int n = 100000;
  double plus = 0, minus = 0, plus_sq = 0;
  for (int k = 0; k < n; ++k) {
    const double e = noise.sample(counter_uniform(1, static_cast<std::uint64_t>(k), 0, 0, 0));
    const double a = d + e * std::abs(d) > 0 ? 1.0 : -1.0;
    const double b = d - e * std::abs(d) > 0 ? 1.0 : -1.0;
    plus += a;
    minus += b;
    plus_sq += a * a;
  }
  plus /= n;
  minus /= n;
  const double se = std::sqrt((plus_sq / n - plus * plus) / n) + 1e-12;
  EXPECT_LE(std::abs(plus - minus), 3 * se + 1e-12);
  EXPECT_DOUBLE_EQ(noise.expected_l1(1), 0.1);
}
