#include <gtest/gtest.h>

#include <cmath>

#include "doco/scenario.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace doco;

namespace {

Trajectory synthetic(std::vector<double> cost, std::vector<Vector> constraint) {
  Trajectory t;
  t.dt = 0.1;
  for (std::size_t s = 0; s < cost.size(); ++s) {
    t.sample_steps.push_back(static_cast<long>(s) * 10);
    t.times.push_back(static_cast<double>(s));
  }
  t.steps = t.sample_steps.back();
  t.cost_integral = std::move(cost);
  t.constraint_integral = std::move(constraint);
  t.y.resize(t.times.size());
  return t;
}

}  // namespace

TEST(Oracle, InactiveConstraintGivesCenters) {
  const auto net = fixture::pair_network(2, 3, 100, 100);
  const auto sol = offline_optimum(net.problems, 10.0, {.grid_k = 50});
  EXPECT_NEAR(sol.y_star[0](0), 2.0, 1e-6);
  EXPECT_NEAR(sol.y_star[1](0), 3.0, 1e-6);
  EXPECT_LE(sol.kkt_residual, 1e-6);
}

TEST(Oracle, CoupledToyMatchesGridSearch) {
  const auto net = fixture::pair_network();
  const auto sol = offline_optimum(net.problems, 10.0, {.grid_k = 50});
  EXPECT_NEAR(sol.y_star[0](0), 1.0, 1e-6);
  EXPECT_NEAR(sol.y_star[1](0), 1.0, 1e-6);
  EXPECT_NEAR(sol.feasibility_margin, 0.0, 1e-6);
  EXPECT_NEAR(sol.objective, 10.0 * 2.0, 1e-5);
}

TEST(Oracle, TimeVaryingToyMatchesGridSearch) {
  // f_1 = (y_1 - 1 - cos t)^2, f_2 = 2 (y_2 - 3)^2, y_1 + y_2 + 0.5 sin t <= 3.
  std::vector<LocalProblem> problems;
  problems.emplace_back(
      std::make_shared<SinusoidalQuadraticCost>(std::vector<SinusoidalQuadraticCost::Term>{{1, 1, 1, 1}}),
      std::make_shared<SinusoidalAffineConstraint>(
          std::vector<SinusoidalAffineConstraint::Row>{{{{1, 0, 0}}, -1.5, 0.5, 1}}, 1),
      Box::uniform(1, 0, 4));
  problems.emplace_back(
      std::make_shared<SinusoidalQuadraticCost>(std::vector<SinusoidalQuadraticCost::Term>{{2, 0, 0, 3}}),
      std::make_shared<SinusoidalAffineConstraint>(
          std::vector<SinusoidalAffineConstraint::Row>{{{{1, 0, 0}}, -1.5, 0, 0}}, 1),
      Box::uniform(1, 0, 4));
  const double T = 6.0;
  const int K = 40;
  const auto sol = offline_optimum(problems, T, {.grid_k = K});

  auto objective = [&](const Vector& y) {
    double acc = 0;
    for (int k = 0; k < K; ++k) {
      const double t = k * T / K;
      acc += problems[0].cost->value(t, y.head(1)) + problems[1].cost->value(t, y.tail(1));
    }
    return acc;
  };
  auto feasible = [&](const Vector& y) {
    for (int k = 0; k < K; ++k) {
      const double t = k * T / K;
      if (problems[0].constraint->value(t, y.head(1))(0) + problems[1].constraint->value(t, y.tail(1))(0) > 1e-12)
        return false;
    }
    return true;
  };
  const Vector ref = oracle::grid_search_2d(objective, feasible, 0, 4, 1e-3);
  EXPECT_NEAR(sol.y_star[0](0), ref(0), 2e-3);
  EXPECT_NEAR(sol.y_star[1](0), ref(1), 2e-3);
}

TEST(Oracle, RestartsAgree) {
  const auto net = fixture::pair_network(3, 1, 1, 2);
  const auto sol = offline_optimum(net.problems, 5.0, {.grid_k = 20, .restarts = 4, .seed = 3});
  EXPECT_LE(sol.restart_spread, 1e-6);
}

TEST(Oracle, EmptyBoxIntersectionForConsensus) {
  auto net = fixture::pair_network();
  net.problems[1].output_set = Box::uniform(1, 6, 7);
  EXPECT_THROW(offline_optimum(net.problems, 5.0, {.grid_k = 20, .consensus = true}), OracleError);
}

TEST(Oracle, InfeasibleProgramIsReported) {
  // y_i >= 0 but y_1 + y_2 <= -2.
  const auto net = fixture::pair_network(2, 2, -1, -1);
  try {
    offline_optimum(net.problems, 5.0, {.grid_k = 20});
    FAIL();
  } catch (const OracleError& e) {
    EXPECT_TRUE(e.infeasible());
  }
}

TEST(Fit, PositivePart) {
  Vector parts(2);
  parts << 2, -1;
  const auto traj = synthetic({0.0}, {parts});
  EXPECT_DOUBLE_EQ(fit(traj, 0).fit, 2.0);
  parts << -3, -1;
  EXPECT_EQ(positive_part_norm(parts), 0.0);
  parts << 3, 4;
  EXPECT_DOUBLE_EQ(positive_part_norm(parts), 5.0);
}

TEST(Regret, ComparatorOnSyntheticTrajectory) {
  const auto net = fixture::pair_network();
  const Blocks y_star{Vector::Constant(1, 1.0), Vector::Constant(1, 1.0)};
  // f(y*) = 2 per unit time.
  const auto traj = synthetic({0.0, 5.0, 9.0}, {Vector::Zero(1), Vector::Zero(1), Vector::Zero(1)});
  EXPECT_NEAR(regret(traj, 1, y_star, net.problems), 5.0 - 2.0, 1e-12);
  EXPECT_NEAR(regret(traj, 2, y_star, net.problems), 9.0 - 4.0, 1e-12);
  EXPECT_THROW(regret(traj, 3, y_star, net.problems), StructuralError);
}

TEST(Regret, AdditiveAndMatchesIndependentQuadrature) {
  const auto net = fixture::pair_network(3, 1, 1, 2);
  SimConfig c;
  c.horizon = 2.0;
  c.dt = 1e-3;
  c.epsilon = 0.5;
  c.k_mu = 2;
  c.log_stride = 1;
  const auto traj = run(net, c);
  const auto sol = offline_optimum(net.problems, 2.0, {.grid_k = 100});
  const auto s1 = *traj.sample_at_step(700), s2 = *traj.sample_at_step(2000);
  double gap = 0;
  for (std::size_t s = s1; s < s2; ++s)
    for (std::size_t i = 0; i < 2; ++i)
      gap += c.dt * (net.problems[i].cost->value(traj.times[s], traj.y[s][i]) -
                     net.problems[i].cost->value(traj.times[s], sol.y_star[i]));
  EXPECT_NEAR(regret(traj, s2, sol.y_star, net.problems) - regret(traj, s1, sol.y_star, net.problems), gap, 1e-9);

  const double comp = oracle::left_riemann(
      [&](double t) { return net.problems[0].cost->value(t, sol.y_star[0]) + net.problems[1].cost->value(t, sol.y_star[1]); },
      2.0, c.dt);
  EXPECT_NEAR(regret(traj, s2, sol.y_star, net.problems), traj.cost_integral[s2] - comp, 1e-9);
}

TEST(IndividualRegret, SingleAgentEqualsRegret) {
  auto net = fixture::pair_network();
  net.models.resize(1);
  net.gains.resize(1);
  net.problems.resize(1);
  net.initial_state.resize(1);
  net.graph = Graph(Eigen::MatrixXi::Zero(1, 1));
  SimConfig c;
  c.horizon = 1.0;
  c.epsilon = 0.5;
  c.k_mu = 1;
  const auto traj = run(net, c);
  const Blocks y_star{Vector::Constant(1, 1.0)};
  const std::size_t last = traj.samples() - 1;
  EXPECT_DOUBLE_EQ(individual_regret(traj, last, 0, y_star, net.problems), regret(traj, last, y_star, net.problems));
}

TEST(IndividualRegret, RequiresConsensusTrajectory) {
  const auto net = fixture::pair_network();
  SimConfig c;
  c.horizon = 0.1;
  c.k_mu = 2;
  const auto traj = run(net, c);
  const Blocks y_star{Vector::Constant(1, 1.0), Vector::Constant(1, 1.0)};
  EXPECT_THROW(individual_regret(traj, 0, 0, y_star, net.problems), StructuralError);
}

TEST(Bounds, ClosedForm) {
  BoundInputs in;
  in.agents = 4;
  in.epsilon = 0.5;
  in.k_f = 2;
  auto b = theoretical_bounds(in, 9.0);
  EXPECT_EQ(b.regret, 0.0);
  EXPECT_DOUBLE_EQ(b.fit, 2 * 4 * std::sqrt(4.0) * 3.0);
  in.output_distance = 1;
  in.certificate_energy = 3;
  b = theoretical_bounds(in, 0.0);
  EXPECT_DOUBLE_EQ(b.regret, 4.0);
  EXPECT_DOUBLE_EQ(b.fit, (2.0 + std::sqrt(24.0)) / 0.5);

  BoundInputs et = in;
  et.variant = VariantKind::EventTriggered;
  et.sigma = 0;
  EXPECT_EQ(theoretical_bounds(et, 5).regret, theoretical_bounds(in, 5).regret);
  EXPECT_EQ(theoretical_bounds(et, 5).fit, theoretical_bounds(in, 5).fit);
  et.sigma = 1;
  et.iota = 0.5;
  EXPECT_DOUBLE_EQ(theoretical_bounds(et, 5).regret, theoretical_bounds(in, 5).regret + 2.0);
  EXPECT_DOUBLE_EQ(theoretical_bounds(et, 5).fit, theoretical_bounds(in, 5).fit + std::sqrt(32.0));

  BoundInputs noisy = in;
  noisy.variant = VariantKind::Noisy;
  EXPECT_TRUE(theoretical_bounds(noisy, 1).on_expectation);
  in.epsilon = 0;
  EXPECT_THROW(theoretical_bounds(in, 1), PreconditionError);
}

TEST(Events, Statistics) {
  Trajectory t;
  t.dt = 0.01;
  t.steps = 100;
  t.events = {{0.2, 0.25, 0.9}, {}, {0.5}};
  t.max_dual_drift = 2;
  GlobalParameters p;
  p.agents = 3;
  p.constraint_dim = 1;
  p.k_mu = 1;
  ControllerVariant v;
  v.kind = VariantKind::EventTriggered;
  const auto st = event_statistics(t, p, v);
  EXPECT_EQ(st.total, 4);
  EXPECT_EQ(st.per_agent, (std::vector<long>{3, 0, 1}));
  EXPECT_NEAR(st.min_inter_event, 0.05, 1e-12);
  EXPECT_NEAR(st.zeno_lower_bound, std::exp(-0.5) / (27.0 * 2.0), 1e-15);
}

TEST(Evaluate, ExampleOneShortRunRespectsBounds) {
  const auto spec = builtin_scenario("example1");
  const auto net = build_network(spec);
  SimConfig c = default_config(spec);
  c.horizon = 5;
  const auto traj = run(net, c);
  const auto report = evaluate(net, c, traj, {.checkpoint_interval = 5, .grid_k = 200});
  ASSERT_EQ(report.checkpoints.size(), 1u);
  EXPECT_TRUE(report.gains.certified());
  EXPECT_TRUE(report.bounds_hold());
  EXPECT_EQ(report.regret_running.size(), traj.samples());
  EXPECT_GT(report.certificate.energy, 0.0);
}
