#pragma once

// The distributed controllers: continuous, event-triggered, noisy-measurement
// and identical-output variants, plus the trigger rule and the gain-condition
// checks that certify the regret / fit bounds.

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "doco/plant_network.hpp"

namespace doco {

enum class VariantKind { Continuous, EventTriggered, Noisy, ContinuousConsensus };

std::string_view to_string(VariantKind kind);
/// Accepts "continuous", "event-triggered", "noisy", "continuous-consensus".
std::optional<VariantKind> parse_variant(std::string_view name);

/// Relative-direction measurement noise, i.i.d. uniform on [-a, a]^q.
struct NoiseModel {
  double amplitude{0.0};

  bool is_zero() const { return amplitude == 0.0; }
  /// E |eps|_1 = q a / 2.
  double expected_l1(Eigen::Index q) const { return static_cast<double>(q) * amplitude / 2.0; }
  /// Maps a uniform draw u in [0, 1) to [-a, a].
  double sample(double u) const { return amplitude * (2.0 * u - 1.0); }
  bool operator==(const NoiseModel&) const = default;
};

struct ControllerVariant {
  VariantKind kind{VariantKind::Continuous};
  double sigma{1.0};  // event-triggered only
  double iota{0.5};   // event-triggered only
  NoiseModel noise;   // noisy only

  /// Throws ValidationError for sigma <= 0 / iota <= 0 (event-triggered) or a
  /// negative noise amplitude.
  void validate() const;
  bool operator==(const ControllerVariant&) const = default;
};

struct AgentDrift {
  Vector u;
  Vector eta_dot;
  Vector mu_dot;
};

/// u = -K xhat + Gamma eta' - (Upsilon - K Psi) eta.
Vector control_input(const Gains& gains, const Vector& x_hat, const Vector& eta, const Vector& eta_dot);

/// -eps (grad f + J^T mu + extra) at the clamped output, projected on the
/// tangent cone of Y at the clamped `cone_at` (default: the clamped output).
Vector primal_drift(const LocalProblem& problem, double t, const Vector& y_i, const Vector& mu_i,
                    double epsilon, const Vector* consensus_term = nullptr, const Vector* cone_at = nullptr);

/// Pi_{R+}[mu_i, eps g_i - eps gain sum_signs].
Vector dual_drift(const Vector& g_i, const Vector& sign_sum, double epsilon, double gain, const Vector& mu_i);

/// Read-only view of everything one agent's controller may use at time t.
struct ControlContext {
  const Network& net;
  const GlobalParameters& params;
  const std::vector<AgentState>& agents;  // synchronous snapshot
  const Blocks& y;                        // snapshot outputs y_i = C_i x_i
  double t;
};

AgentDrift continuous_control(const ControlContext& ctx, int i);
/// Identical-output extension: adds K_y sum_j a_ij sgn(y_i - y_j) to the primal subgradient.
AgentDrift consensus_control(const ControlContext& ctx, int i);
/// Dual drift from broadcast values mu_hat with gain 2 K_mu.
AgentDrift event_triggered_control(const ControlContext& ctx, int i);
/// `noise(j)` returns eps_ij(t) in R^q for neighbor j.
AgentDrift noisy_control(const ControlContext& ctx, int i, const std::function<Vector(int)>& noise);

/// Right-hand side of the trigger rule:
///   1/(6 N sqrt q) sum_j a_ij |mu_hat_i - mu_hat_j|_1 + sigma e^{-iota t} / (3 N^2 K_mu sqrt q).
double trigger_threshold(int i, const Blocks& mu_hat, const Graph& graph, const GlobalParameters& params,
                         double sigma, double iota, double t);
/// |e_i| >= trigger_threshold(...).
bool trigger_check(const Vector& e_i, int i, const Blocks& mu_hat, const Graph& graph,
                   const GlobalParameters& params, double sigma, double iota, double t);

struct GainCondition {
  std::string rule;
  double value{0.0};
  double required{0.0};
  bool passed{false};
  double margin() const { return value - required; }
};

struct GainReport {
  std::vector<GainCondition> conditions;
  bool certified() const;
  /// First failed condition, if any.
  const GainCondition* first_failure() const;
};

GainReport validate_gain_conditions(const GlobalParameters& params, const ControllerVariant& variant,
                                    const ProblemConstants& constants);

}  // namespace doco
