#include <gtest/gtest.h>

#include <cmath>

#include "doco/scenario.hpp"
#include "fixtures.hpp"

using namespace doco;

namespace {

SimConfig short_config(double horizon, double k_mu = 2.0) {
  SimConfig c;
  c.dt = 1e-3;
  c.horizon = horizon;
  c.epsilon = 0.5;
  c.k_mu = k_mu;
  c.log_stride = 1;
  c.checkpoint_interval = 0;
  return c;
}

bool same(const Trajectory& a, const Trajectory& b) {
  if (a.samples() != b.samples() || a.cost_integral != b.cost_integral) return false;
  for (std::size_t s = 0; s < a.samples(); ++s)
    for (std::size_t i = 0; i < a.y[s].size(); ++i)
      if (a.y[s][i] != b.y[s][i] || a.mu[s][i] != b.mu[s][i] || a.eta[s][i] != b.eta[s][i]) return false;
  return a.events == b.events;
}

}  // namespace

TEST(Simulation, RestStateStaysAtRest) {
  auto net = fixture::pair_network(0, 0, 1, 1, -1, 1);
  for (auto& x : net.initial_state) x.setZero();
  const auto traj = run(net, short_config(1.0));
  for (std::size_t s = 0; s < traj.samples(); ++s)
    for (std::size_t i = 0; i < 2; ++i) {
      ASSERT_EQ(traj.y[s][i](0), 0.0);
      ASSERT_EQ(traj.mu[s][i](0), 0.0);
      ASSERT_EQ(traj.eta[s][i](0), 0.0);
    }
  // g = -1 per agent over [0, 1].
  EXPECT_NEAR(traj.constraint_integral.back()(0), -2.0, 1e-9);
  EXPECT_EQ(traj.cost_integral.back(), 0.0);
}

TEST(Simulation, ZeroHorizonLogsInitialOnly) {
  const auto net = fixture::pair_network();
  const auto traj = run(net, short_config(0.0));
  ASSERT_EQ(traj.samples(), 1u);
  EXPECT_EQ(traj.times[0], 0.0);
  EXPECT_EQ(traj.cost_integral[0], 0.0);
}

TEST(Simulation, Deterministic) {
  const auto net = build_network(builtin_scenario("example1"));
  SimConfig c = default_config(builtin_scenario("example1"));
  c.horizon = 2.0;
  c.log_stride = 10;
  EXPECT_TRUE(same(run(net, c), run(net, c)));
  c.variant.kind = VariantKind::Noisy;
  c.variant.noise.amplitude = 0.4;
  c.k_mu = 2160;
  c.seed = 5;
  EXPECT_TRUE(same(run(net, c), run(net, c)));
}

TEST(Simulation, MultipliersStayNonnegative) {
  const auto net = fixture::pair_network(4, 4, 1, 1);
  SimConfig c = short_config(3.0);
  c.variant.kind = VariantKind::EventTriggered;
  const auto traj = run(net, c);
  double peak = 0;
  for (const auto& mu : traj.mu)
    for (const auto& m : mu) {
      ASSERT_GE(m.minCoeff(), 0.0);
      peak = std::max(peak, m.maxCoeff());
    }
  EXPECT_GT(peak, 0.0);  // the constraint is active
}

TEST(Simulation, IntegralsAreLeftRiemannSums) {
  const auto net = fixture::pair_network(3, 1, 1, 2);
  const auto traj = run(net, short_config(0.5));
  double f = 0;
  Vector g = Vector::Zero(1);
  for (std::size_t s = 0; s + 1 < traj.samples(); ++s) {
    for (std::size_t i = 0; i < 2; ++i) {
      f += traj.dt * net.problems[i].cost->value(traj.times[s], traj.y[s][i]);
      g += traj.dt * net.problems[i].constraint->value(traj.times[s], traj.y[s][i]);
    }
  }
  EXPECT_NEAR(traj.cost_integral.back(), f, 1e-10);
  EXPECT_NEAR(traj.constraint_integral.back()(0), g(0), 1e-10);
}

TEST(Simulation, CheckpointsAreLogged) {
  const auto net = fixture::pair_network();
  SimConfig c = short_config(1.0);
  c.log_stride = 300;
  c.checkpoint_interval = 0.25;
  const auto traj = run(net, c);
  for (long s : {0L, 250L, 300L, 500L, 600L, 750L, 900L, 1000L}) EXPECT_TRUE(traj.sample_at_step(s)) << s;
  EXPECT_FALSE(traj.sample_at_step(100));
}

TEST(Simulation, FreeStepMatchesSimulator) {
  const auto net = fixture::pair_network(3, 1, 1, 2);
  const SimConfig c = short_config(0.1);
  Simulator sim(net, c);
  NetworkState s = initial_network_state(net);
  for (int k = 0; k < 50; ++k) {
    sim.step();
    step(s, c, net);
  }
  EXPECT_EQ(s.step, 50);
  EXPECT_EQ(s.cost_integral, sim.state().cost_integral);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(s.agents[i].x, sim.state().agents[i].x);
}

TEST(MonteCarlo, SingleRunMatchesDirectRun) {
  const auto net = fixture::pair_network();
  SimConfig c = short_config(0.5);
  c.variant.kind = VariantKind::Noisy;
  c.variant.noise.amplitude = 0.3;
  c.seed = 9;
  const auto mc = monte_carlo(net, c, 1);
  ASSERT_EQ(mc.size(), 1u);
  ASSERT_TRUE(mc[0].trajectory);
  EXPECT_TRUE(same(*mc[0].trajectory, run(net, c)));
}

TEST(MonteCarlo, ZeroNoiseRunsAgree) {
  const auto net = fixture::pair_network(4, 0, 1, 1);
  SimConfig c = short_config(0.5);
  c.variant.kind = VariantKind::Noisy;
  const auto mc = monte_carlo(net, c, 3);
  for (const auto& r : mc) {
    ASSERT_TRUE(r.trajectory);
    EXPECT_EQ(r.trajectory->cost_integral, mc[0].trajectory->cost_integral);
  }
  EXPECT_EQ(mc[2].seed, c.seed + 2);
}

TEST(Simulation, DivergenceIsReported) {
  auto net = fixture::pair_network();
  for (auto& m : net.models) m.A = Matrix::Constant(1, 1, 10.0);
  net.initial_state[1] = Vector::Constant(1, 1e308);
  try {
    run(net, short_config(1.0));
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("agent 2"), std::string::npos) << e.what();
    EXPECT_EQ(e.time(), 0.0);
  }
}

TEST(SimConfig, Validation) {
  SimConfig c;
  c.dt = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = SimConfig{};
  c.horizon = -1;
  EXPECT_THROW(c.validate(), ValidationError);
  c = SimConfig{};
  c.horizon = 1;
  c.dt = 0.1;
  EXPECT_EQ(c.step_count(), 10);
}
