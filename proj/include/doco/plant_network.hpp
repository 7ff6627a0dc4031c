#pragma once

// Agent plants, observers, and the assembled network with its mutable state.

#include <vector>

#include "doco/control_synthesis.hpp"
#include "doco/graph.hpp"
#include "doco/problem_model.hpp"

namespace doco {

using Model = LtiModel<double>;
using Gains = GainSet<double>;

/// x' = A x + B u.
Vector plant_derivative(const Model& model, const Vector& x, const Vector& u);
/// y = C x.
Vector output(const Model& model, const Vector& x);
/// xhat' = A xhat + B u + H (y - C xhat).
Vector observer_derivative(const Model& model, const Gains& gains, const Vector& x_hat, const Vector& u,
                           const Vector& y);

struct AgentState {
  Vector x;
  Vector x_hat;
  Vector eta;
  Vector mu;
  Vector mu_hat;  // last broadcast multiplier
  double last_event_time{0.0};
};

/// Static description of the closed-loop network: plants, synthesized gains,
/// local problems and the communication graph.
struct Network {
  std::vector<Model> models;
  std::vector<Gains> gains;
  std::vector<LocalProblem> problems;
  Graph graph;
  std::vector<Vector> initial_state;  // x_i(0)

  int agents() const { return static_cast<int>(models.size()); }
  Eigen::Index constraint_dim() const { return problems.empty() ? 0 : problems.front().constraint_dim(); }
  Eigen::Index total_outputs() const;
  Eigen::Index total_states() const;
  /// Throws StructuralError on inconsistent sizes across the aggregate.
  void check() const;
};

struct NetworkState {
  std::vector<AgentState> agents;
  long step{0};
  double t{0.0};
  double cost_integral{0.0};
  Vector constraint_integral;
  // Per agent i: integral of sum_j f_j(t, y_i(t)); only kept when all output
  // dimensions agree.
  Vector consensus_cost_integral;
};

/// x(0) from the network, xhat(0) = 0, eta(0) = 0, mu(0) = mu_hat(0) = 0.
NetworkState initial_network_state(const Network& net);

/// Block-diagonal stacking of per-agent matrices.
Matrix block_diagonal(const std::vector<Matrix>& blocks);

/// Stacked y_i = C_i x_i.
Blocks outputs(const Network& net, const NetworkState& state);

}  // namespace doco
