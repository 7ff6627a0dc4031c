#include "doco/plant_network.hpp"

#include <string>

namespace doco {

Vector plant_derivative(const Model& model, const Vector& x, const Vector& u) {
  if (x.size() != model.states() || u.size() != model.inputs())
    throw StructuralError("plant_derivative: dimension mismatch");
  return model.A * x + model.B * u;
}

Vector output(const Model& model, const Vector& x) {
  if (x.size() != model.states()) throw StructuralError("output: dimension mismatch");
  return model.C * x;
}

Vector observer_derivative(const Model& model, const Gains& gains, const Vector& x_hat, const Vector& u,
                           const Vector& y) {
  if (x_hat.size() != model.states() || u.size() != model.inputs() || y.size() != model.outputs() ||
      gains.H.rows() != model.states() || gains.H.cols() != model.outputs())
    throw StructuralError("observer_derivative: dimension mismatch");
  return model.A * x_hat + model.B * u + gains.H * (y - model.C * x_hat);
}

Eigen::Index Network::total_outputs() const {
  Eigen::Index p = 0;
  for (const auto& m : models) p += m.outputs();
  return p;
}

Eigen::Index Network::total_states() const {
  Eigen::Index n = 0;
  for (const auto& m : models) n += m.states();
  return n;
}

void Network::check() const {
  const auto n = models.size();
  if (n == 0) throw StructuralError("network has no agents");
  if (gains.size() != n || problems.size() != n || initial_state.size() != n ||
      static_cast<std::size_t>(graph.size()) != n)
    throw StructuralError("network: per-agent lists differ in length");
  const auto q = constraint_dim();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& m = models[i];
    m.check_dimensions();
    const auto& g = gains[i];
    const std::string who = "agent " + std::to_string(i + 1);
    if (g.K.rows() != m.inputs() || g.K.cols() != m.states() || g.H.rows() != m.states() ||
        g.H.cols() != m.outputs() || g.Gamma.rows() != m.inputs() || g.Psi.rows() != m.states() ||
        g.Upsilon.rows() != m.inputs())
      throw StructuralError(who + ": gain dimensions do not match the plant");
    if (problems[i].output_dim() != m.outputs()) throw StructuralError(who + ": problem output dimension");
    if (problems[i].constraint_dim() != q) throw StructuralError(who + ": constraint dimension differs");
    if (initial_state[i].size() != m.states()) throw StructuralError(who + ": initial state dimension");
  }
}

NetworkState initial_network_state(const Network& net) {
  net.check();
  NetworkState s;
  const auto q = net.constraint_dim();
  for (std::size_t i = 0; i < net.models.size(); ++i) {
    const auto& m = net.models[i];
    AgentState a;
    a.x = net.initial_state[i];
    a.x_hat = Vector::Zero(m.states());
    a.eta = Vector::Zero(m.outputs());
    a.mu = Vector::Zero(q);
    a.mu_hat = a.mu;
    s.agents.push_back(std::move(a));
  }
  s.constraint_integral = Vector::Zero(q);
  s.consensus_cost_integral = Vector::Zero(static_cast<Eigen::Index>(net.models.size()));
  return s;
}

Matrix block_diagonal(const std::vector<Matrix>& blocks) {
  Eigen::Index rows = 0, cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  Matrix out = Matrix::Zero(rows, cols);
  Eigen::Index r = 0, c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

Blocks outputs(const Network& net, const NetworkState& state) {
  Blocks y;
  y.reserve(state.agents.size());
  for (std::size_t i = 0; i < state.agents.size(); ++i) y.push_back(net.models[i].C * state.agents[i].x);
  return y;
}

}  // namespace doco
