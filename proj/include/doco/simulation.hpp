#pragma once

// Fixed-step explicit Euler integration of the closed-loop network with
// synchronous agent updates, event scheduling and left-Riemann integral
// accumulation.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "doco/controllers.hpp"

namespace doco {

struct SimConfig {
  double dt{1e-3};
  double horizon{50.0};
  double epsilon{0.1};
  double k_mu{0.0};
  double k_y{0.0};
  ControllerVariant variant;
  std::uint64_t seed{0};
  long log_stride{100};
  // Samples are also forced at every multiple of this interval (0 disables).
  double checkpoint_interval{5.0};

  /// Throws ValidationError on dt <= 0, horizon < 0, log_stride < 1.
  void validate() const;
  long step_count() const;
  GlobalParameters parameters(const Network& net) const;
};

struct Trajectory {
  double dt{0.0};
  long steps{0};
  std::uint64_t seed{0};
  VariantKind variant{VariantKind::Continuous};
  std::string config_hash;

  // One entry per logged sample (sample 0 is the initial state).
  std::vector<long> sample_steps;
  std::vector<double> times;
  std::vector<Blocks> y;
  std::vector<Blocks> mu;
  std::vector<Blocks> eta;
  std::vector<double> cost_integral;
  std::vector<Vector> constraint_integral;
  std::vector<Vector> consensus_cost_integral;
  std::vector<long> events_total;

  // Per agent: broadcast instants (event-triggered variant).
  std::vector<std::vector<double>> events;
  // sup over the run of |mu_i'| (drift bound used by the inter-event lower bound).
  double max_dual_drift{0.0};

  std::size_t samples() const { return times.size(); }
  /// Index of the sample logged at exactly `step`, if any.
  std::optional<std::size_t> sample_at_step(long step) const;
};

/// Owns one run's mutable state.
class Simulator {
 public:
  Simulator(const Network& net, SimConfig config);

  /// One synchronous Euler step. Throws DivergenceError on a non-finite value.
  void step();
  const NetworkState& state() const { return state_; }
  const SimConfig& config() const { return config_; }
  const GlobalParameters& parameters() const { return params_; }
  /// Integrates to the horizon and returns the logged trajectory.
  Trajectory run();

 private:
  void log_sample();
  bool should_log(long step) const;

  const Network& net_;
  SimConfig config_;
  GlobalParameters params_;
  NetworkState state_;
  Trajectory traj_;
  bool homogeneous_outputs_{false};
  long checkpoint_stride_{0};
  long events_so_far_{0};
};

/// Advances `state` by one step (free-function form of Simulator::step).
void step(NetworkState& state, const SimConfig& config, const Network& net);

Trajectory run(const Network& net, const SimConfig& config);

struct MonteCarloRun {
  std::uint64_t seed{0};
  std::optional<Trajectory> trajectory;
  std::string error;
};

/// Runs seeds config.seed, config.seed + 1, ...; a divergent run is reported
/// in its entry without aborting the others.
std::vector<MonteCarloRun> monte_carlo(const Network& net, const SimConfig& config, int runs);

}  // namespace doco
