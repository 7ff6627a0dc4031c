#include "doco/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <thread>

#include "doco/random.hpp"

namespace doco {

void SimConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("dt must be positive", "dt");
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw ValidationError("T must be nonnegative", "T");
  if (log_stride < 1) throw ValidationError("log_stride must be >= 1", "log_stride");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ValidationError("epsilon must be positive", "epsilon");
  if (!(checkpoint_interval >= 0.0)) throw ValidationError("checkpoint interval must be nonnegative", "checkpoint");
  variant.validate();
}

long SimConfig::step_count() const { return static_cast<long>(std::ceil(horizon / dt - 1e-9)); }

GlobalParameters SimConfig::parameters(const Network& net) const {
  GlobalParameters p;
  p.epsilon = epsilon;
  p.k_mu = k_mu;
  p.k_y = k_y;
  p.agents = net.agents();
  p.constraint_dim = net.constraint_dim();
  return p;
}

std::optional<std::size_t> Trajectory::sample_at_step(long s) const {
  auto it = std::lower_bound(sample_steps.begin(), sample_steps.end(), s);
  if (it == sample_steps.end() || *it != s) return std::nullopt;
  return static_cast<std::size_t>(it - sample_steps.begin());
}

namespace {

struct StepOutcome {
  std::vector<int> fired;
  double max_dual_drift{0.0};
};

void check_finite(const Vector& v, int agent, const char* field, double t) {
  if (!v.allFinite())
    throw DivergenceError("non-finite " + std::string(field) + " for agent " + std::to_string(agent + 1) +
                              " at t=" + std::to_string(t),
                          t);
}

StepOutcome advance(NetworkState& state, const SimConfig& config, const GlobalParameters& params,
                    const Network& net, bool homogeneous_outputs) {
  const double dt = config.dt;
  const double t = static_cast<double>(state.step) * dt;
  const int n = net.agents();
  StepOutcome out;

  // (a) synchronous snapshot
  std::vector<AgentState> snap = state.agents;
  const Blocks y = outputs(net, state);

  // (b) triggers evaluated on the snapshot, broadcasts applied before drifts
  if (config.variant.kind == VariantKind::EventTriggered) {
    Blocks mu_hat;
    mu_hat.reserve(snap.size());
    for (const auto& a : snap) mu_hat.push_back(a.mu_hat);
    for (int i = 0; i < n; ++i) {
      auto& a = snap[static_cast<std::size_t>(i)];
      if (trigger_check(Vector(a.mu_hat - a.mu), i, mu_hat, net.graph, params, config.variant.sigma,
                        config.variant.iota, t))
        out.fired.push_back(i);
    }
    for (int i : out.fired) {
      auto& a = snap[static_cast<std::size_t>(i)];
      a.mu_hat = a.mu;
      a.last_event_time = t;
    }
  }

  // (c) drifts
  const ControlContext ctx{net, params, snap, y, t};
  const auto q = net.constraint_dim();
  std::vector<AgentDrift> drifts;
  drifts.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    switch (config.variant.kind) {
      case VariantKind::Continuous: drifts.push_back(continuous_control(ctx, i)); break;
      case VariantKind::ContinuousConsensus: drifts.push_back(consensus_control(ctx, i)); break;
      case VariantKind::EventTriggered: drifts.push_back(event_triggered_control(ctx, i)); break;
      case VariantKind::Noisy: {
        const auto& noise = config.variant.noise;
        auto draw = [&](int j) {
          Vector e(q);
          for (Eigen::Index k = 0; k < q; ++k)
            e(k) = noise.sample(counter_uniform(config.seed, static_cast<std::uint64_t>(state.step),
                                                static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j),
                                                static_cast<std::uint64_t>(k)));
          return e;
        };
        drifts.push_back(noisy_control(ctx, i, draw));
        break;
      }
    }
  }

  // (e) left-Riemann accumulation at the start-of-step outputs
  for (int i = 0; i < n; ++i) {
    const auto& problem = net.problems[static_cast<std::size_t>(i)];
    const auto& yi = y[static_cast<std::size_t>(i)];
    state.cost_integral += dt * problem.cost->value(t, yi);
    state.constraint_integral += dt * problem.constraint->value(t, yi);
    if (homogeneous_outputs) {
      double sum = 0.0;
      for (const auto& pj : net.problems) sum += pj.cost->value(t, yi);
      state.consensus_cost_integral(i) += dt * sum;
    }
  }

  // (d) Euler update; the orthant re-projection absorbs Euler overshoot
  for (int i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    const auto& model = net.models[idx];
    const auto& d = drifts[idx];
    const auto& prev = snap[idx];
    auto& next = state.agents[idx];
    next.x = prev.x + dt * plant_derivative(model, prev.x, d.u);
    next.x_hat = prev.x_hat + dt * observer_derivative(model, net.gains[idx], prev.x_hat, d.u, y[idx]);
    next.eta = prev.eta + dt * d.eta_dot;
    next.mu = (prev.mu + dt * d.mu_dot).cwiseMax(0.0);
    next.mu_hat = prev.mu_hat;
    next.last_event_time = prev.last_event_time;
    out.max_dual_drift = std::max(out.max_dual_drift, d.mu_dot.norm());
    check_finite(next.x, i, "x", t);
    check_finite(next.x_hat, i, "x_hat", t);
    check_finite(next.eta, i, "eta", t);
    check_finite(next.mu, i, "mu", t);
  }
  if (!std::isfinite(state.cost_integral) || !state.constraint_integral.allFinite())
    throw DivergenceError("non-finite cost or constraint integral at t=" + std::to_string(t), t);

  // (f)
  ++state.step;
  state.t = static_cast<double>(state.step) * dt;
  return out;
}

bool outputs_homogeneous(const Network& net) {
  for (const auto& m : net.models)
    if (m.outputs() != net.models.front().outputs()) return false;
  return true;
}

}  // namespace

void step(NetworkState& state, const SimConfig& config, const Network& net) {
  advance(state, config, config.parameters(net), net, outputs_homogeneous(net));
}

Simulator::Simulator(const Network& net, SimConfig config)
    : net_(net), config_(std::move(config)), params_(config_.parameters(net)), state_(initial_network_state(net)) {
  config_.validate();
  homogeneous_outputs_ = outputs_homogeneous(net_);
  if (config_.checkpoint_interval > 0.0)
    checkpoint_stride_ = std::max(1L, std::lround(config_.checkpoint_interval / config_.dt));
  traj_.dt = config_.dt;
  traj_.steps = config_.step_count();
  traj_.seed = config_.seed;
  traj_.variant = config_.variant.kind;
  traj_.events.assign(static_cast<std::size_t>(net_.agents()), {});
}

bool Simulator::should_log(long s) const {
  return s % config_.log_stride == 0 || (checkpoint_stride_ > 0 && s % checkpoint_stride_ == 0) ||
         s == traj_.steps;
}

void Simulator::log_sample() {
  traj_.sample_steps.push_back(state_.step);
  traj_.times.push_back(state_.t);
  traj_.y.push_back(outputs(net_, state_));
  Blocks mu, eta;
  for (const auto& a : state_.agents) {
    mu.push_back(a.mu);
    eta.push_back(a.eta);
  }
  traj_.mu.push_back(std::move(mu));
  traj_.eta.push_back(std::move(eta));
  traj_.cost_integral.push_back(state_.cost_integral);
  traj_.constraint_integral.push_back(state_.constraint_integral);
  traj_.consensus_cost_integral.push_back(state_.consensus_cost_integral);
  traj_.events_total.push_back(events_so_far_);
}

void Simulator::step() {
  const double t = state_.t;
  const auto out = advance(state_, config_, params_, net_, homogeneous_outputs_);
  for (int i : out.fired) traj_.events[static_cast<std::size_t>(i)].push_back(t);
  events_so_far_ += static_cast<long>(out.fired.size());
  traj_.max_dual_drift = std::max(traj_.max_dual_drift, out.max_dual_drift);
}

Trajectory Simulator::run() {
  if (state_.step == 0 && traj_.samples() == 0) log_sample();
  while (state_.step < traj_.steps) {
    step();
    if (should_log(state_.step)) log_sample();
  }
  return traj_;
}

Trajectory run(const Network& net, const SimConfig& config) {
  Simulator sim(net, config);
  return sim.run();
}

std::vector<MonteCarloRun> monte_carlo(const Network& net, const SimConfig& config, int runs) {
  if (runs < 1) throw PreconditionError("monte_carlo: need at least one run");
  std::vector<MonteCarloRun> results(static_cast<std::size_t>(runs));
  auto one = [&](int r) {
    MonteCarloRun mc;
    SimConfig c = config;
    c.seed = config.seed + static_cast<std::uint64_t>(r);
    mc.seed = c.seed;
    try {
      mc.trajectory = run(net, c);
    } catch (const DivergenceError& e) {
      mc.error = e.what();
    }
    return mc;
  };
  const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  for (int start = 0; start < runs; start += static_cast<int>(workers)) {
    std::vector<std::future<MonteCarloRun>> batch;
    for (int r = start; r < std::min(runs, start + static_cast<int>(workers)); ++r)
      batch.push_back(std::async(workers > 1 ? std::launch::async : std::launch::deferred, one, r));
    for (std::size_t k = 0; k < batch.size(); ++k) results[static_cast<std::size_t>(start) + k] = batch[k].get();
  }
  return results;
}

}  // namespace doco
