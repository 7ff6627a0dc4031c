#include "doco/controllers.hpp"

#include <cmath>
#include <limits>

namespace doco {

std::string_view to_string(VariantKind kind) {
  switch (kind) {
    case VariantKind::Continuous: return "continuous";
    case VariantKind::EventTriggered: return "event-triggered";
    case VariantKind::Noisy: return "noisy";
    case VariantKind::ContinuousConsensus: return "continuous-consensus";
  }
  return "unknown";
}

std::optional<VariantKind> parse_variant(std::string_view name) {
  for (auto k : {VariantKind::Continuous, VariantKind::EventTriggered, VariantKind::Noisy,
                 VariantKind::ContinuousConsensus})
    if (to_string(k) == name) return k;
  return std::nullopt;
}

void ControllerVariant::validate() const {
  if (kind == VariantKind::EventTriggered) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("sigma must be positive", "variant.sigma");
    if (!(iota > 0.0) || !std::isfinite(iota)) throw ValidationError("iota must be positive", "variant.iota");
  }
  if (!(noise.amplitude >= 0.0) || !std::isfinite(noise.amplitude))
    throw ValidationError("noise amplitude must be nonnegative", "variant.noise_amplitude");
}

Vector control_input(const Gains& gains, const Vector& x_hat, const Vector& eta, const Vector& eta_dot) {
  return -gains.K * x_hat + gains.Gamma * eta_dot - (gains.Upsilon - gains.K * gains.Psi) * eta;
}

Vector primal_drift(const LocalProblem& problem, double t, const Vector& y_i, const Vector& mu_i, double epsilon,
                    const Vector* consensus_term, const Vector* cone_at) {
  // Transients may carry y_i outside Y_i; the controller acts on the nearest
  // point of the box.
  const Vector y = euclidean_project(problem.output_set, y_i);
  Vector sub = problem.cost->gradient(t, y) + problem.constraint->jacobian(t, y).transpose() * mu_i;
  if (consensus_term) sub += *consensus_term;
  const Vector at = cone_at ? euclidean_project(problem.output_set, *cone_at) : y;
  return tangent_projection(problem.output_set, at, Vector(-epsilon * sub));
}

Vector dual_drift(const Vector& g_i, const Vector& sign_sum, double epsilon, double gain, const Vector& mu_i) {
  const Vector v = epsilon * g_i - epsilon * gain * sign_sum;
  return tangent_projection(Box::orthant(mu_i.size()), mu_i, v);
}

namespace {

const Vector& agent_output(const ControlContext& ctx, int i) { return ctx.y[static_cast<std::size_t>(i)]; }

Vector clamped_constraint(const ControlContext& ctx, int i) {
  const auto& problem = ctx.net.problems[static_cast<std::size_t>(i)];
  return problem.constraint->value(ctx.t, euclidean_project(problem.output_set, agent_output(ctx, i)));
}

AgentDrift finish(const ControlContext& ctx, int i, Vector eta_dot, Vector mu_dot) {
  const auto& a = ctx.agents[static_cast<std::size_t>(i)];
  AgentDrift d;
  d.u = control_input(ctx.net.gains[static_cast<std::size_t>(i)], a.x_hat, a.eta, eta_dot);
  d.eta_dot = std::move(eta_dot);
  d.mu_dot = std::move(mu_dot);
  return d;
}

Vector mu_sign_sum(const ControlContext& ctx, int i, bool broadcast) {
  const auto& agents = ctx.agents;
  const auto& self = agents[static_cast<std::size_t>(i)];
  const Vector& mi = broadcast ? self.mu_hat : self.mu;
  Vector s = Vector::Zero(mi.size());
  for (int j : ctx.net.graph.neighbors(i)) {
    const auto& other = agents[static_cast<std::size_t>(j)];
    s += sign_select(mi - (broadcast ? other.mu_hat : other.mu));
  }
  return s;
}

Vector plain_primal(const ControlContext& ctx, int i) {
  const auto& a = ctx.agents[static_cast<std::size_t>(i)];
  return primal_drift(ctx.net.problems[static_cast<std::size_t>(i)], ctx.t, agent_output(ctx, i), a.mu,
                      ctx.params.epsilon, nullptr, &a.eta);
}

}  // namespace

AgentDrift continuous_control(const ControlContext& ctx, int i) {
  const auto& a = ctx.agents[static_cast<std::size_t>(i)];
  Vector eta_dot = plain_primal(ctx, i);
  Vector mu_dot = dual_drift(clamped_constraint(ctx, i), mu_sign_sum(ctx, i, false), ctx.params.epsilon,
                             ctx.params.k_mu, a.mu);
  return finish(ctx, i, std::move(eta_dot), std::move(mu_dot));
}

AgentDrift consensus_control(const ControlContext& ctx, int i) {
  const auto& a = ctx.agents[static_cast<std::size_t>(i)];
  const auto& problem = ctx.net.problems[static_cast<std::size_t>(i)];
  // Neighbors are compared through their clamped outputs, like the agent itself.
  Blocks clamped;
  clamped.reserve(ctx.y.size());
  for (std::size_t j = 0; j < ctx.y.size(); ++j)
    clamped.push_back(euclidean_project(ctx.net.problems[j].output_set, ctx.y[j]));
  const Vector extra = output_consensus_term(i, clamped, ctx.net.graph, ctx.params.k_y);
  Vector eta_dot = primal_drift(problem, ctx.t, agent_output(ctx, i), a.mu, ctx.params.epsilon, &extra, &a.eta);
  Vector mu_dot = dual_drift(clamped_constraint(ctx, i), mu_sign_sum(ctx, i, false), ctx.params.epsilon,
                             ctx.params.k_mu, a.mu);
  return finish(ctx, i, std::move(eta_dot), std::move(mu_dot));
}

AgentDrift event_triggered_control(const ControlContext& ctx, int i) {
  const auto& a = ctx.agents[static_cast<std::size_t>(i)];
  Vector eta_dot = plain_primal(ctx, i);
  Vector mu_dot = dual_drift(clamped_constraint(ctx, i), mu_sign_sum(ctx, i, true), ctx.params.epsilon,
                             2.0 * ctx.params.k_mu, a.mu);
  return finish(ctx, i, std::move(eta_dot), std::move(mu_dot));
}

AgentDrift noisy_control(const ControlContext& ctx, int i, const std::function<Vector(int)>& noise) {
  const auto& a = ctx.agents[static_cast<std::size_t>(i)];
  Vector s = Vector::Zero(a.mu.size());
  for (int j : ctx.net.graph.neighbors(i)) {
    const Vector diff = a.mu - ctx.agents[static_cast<std::size_t>(j)].mu;
    s += sign_select(diff + noise(j) * diff.norm());
  }
  Vector eta_dot = plain_primal(ctx, i);
  Vector mu_dot = dual_drift(clamped_constraint(ctx, i), s, ctx.params.epsilon, ctx.params.k_mu, a.mu);
  return finish(ctx, i, std::move(eta_dot), std::move(mu_dot));
}

double trigger_threshold(int i, const Blocks& mu_hat, const Graph& graph, const GlobalParameters& params,
                         double sigma, double iota, double t) {
  const double n = static_cast<double>(params.agents);
  const double sq = std::sqrt(static_cast<double>(params.constraint_dim));
  double disagreement = 0.0;
  const auto& mi = mu_hat[static_cast<std::size_t>(i)];
  for (int j : graph.neighbors(i)) disagreement += (mi - mu_hat[static_cast<std::size_t>(j)]).lpNorm<1>();
  return disagreement / (6.0 * n * sq) + sigma * std::exp(-iota * t) / (3.0 * n * n * params.k_mu * sq);
}

bool trigger_check(const Vector& e_i, int i, const Blocks& mu_hat, const Graph& graph,
                   const GlobalParameters& params, double sigma, double iota, double t) {
  return e_i.norm() >= trigger_threshold(i, mu_hat, graph, params, sigma, iota, t);
}

bool GainReport::certified() const { return first_failure() == nullptr; }

const GainCondition* GainReport::first_failure() const {
  for (const auto& c : conditions)
    if (!c.passed) return &c;
  return nullptr;
}

GainReport validate_gain_conditions(const GlobalParameters& params, const ControllerVariant& variant,
                                    const ProblemConstants& constants) {
  GainReport report;
  const double n = static_cast<double>(params.agents);
  auto add = [&](std::string rule, double value, double required) {
    report.conditions.push_back({std::move(rule), value, required, value >= required});
  };
  report.conditions.push_back({"epsilon > 0", params.epsilon, 0.0, params.epsilon > 0.0});
  report.conditions.push_back({"K_mu > 0", params.k_mu, 0.0, params.k_mu > 0.0});
  if (variant.kind == VariantKind::Noisy) {
    add("K_mu >= N^2*K_g", params.k_mu, n * n * constants.k_g);
    const double budget = params.k_mu > 0.0 ? 0.5 - n * n * constants.k_g / (2.0 * params.k_mu)
                                             : -std::numeric_limits<double>::infinity();
    // Stored as (budget, expected) so that value >= required means "within budget".
    add("E|noise|_1 <= 1/2 - N^2*K_g/(2*K_mu)", budget, variant.noise.expected_l1(params.constraint_dim));
  } else {
    add("K_mu >= N*K_g", params.k_mu, n * constants.k_g);
  }
  if (variant.kind == VariantKind::ContinuousConsensus) add("K_y >= N*K_df", params.k_y, n * constants.k_df);
  return report;
}

}  // namespace doco
