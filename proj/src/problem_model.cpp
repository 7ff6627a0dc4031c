#include "doco/problem_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace doco {

namespace {

void require_member(const LocalProblem& problem, const Vector& y, const char* op) {
  if (y.size() != problem.output_dim())
    throw StructuralError(std::string(op) + ": output dimension mismatch");
  if (!problem.output_set.contains(y))
    throw PreconditionError(std::string(op) + ": output outside its box");
}

void require_bounded(const Box& set, const char* what) {
  if (!set.bounded()) throw PreconditionError(std::string(what) + ": bound needs a compact box");
}

}  // namespace

SinusoidalQuadraticCost::SinusoidalQuadraticCost(std::vector<Term> terms) : terms_(std::move(terms)) {
  if (terms_.empty()) throw StructuralError("quadratic cost needs at least one term");
  for (const auto& term : terms_) {
    if (!(term.weight > 0.0)) throw PreconditionError("quadratic cost weights must be positive");
    if (!std::isfinite(term.amplitude) || !std::isfinite(term.frequency) || !std::isfinite(term.offset))
      throw PreconditionError("quadratic cost coefficients must be finite");
  }
}

Vector SinusoidalQuadraticCost::center(double t) const {
  Vector c(dim());
  for (std::size_t k = 0; k < terms_.size(); ++k)
    c(static_cast<Eigen::Index>(k)) = terms_[k].amplitude * std::cos(terms_[k].frequency * t) + terms_[k].offset;
  return c;
}

double SinusoidalQuadraticCost::value(double t, const Vector& y) const {
  double f = 0.0;
  for (std::size_t k = 0; k < terms_.size(); ++k) {
    const auto& term = terms_[k];
    const double d = y(static_cast<Eigen::Index>(k)) - term.amplitude * std::cos(term.frequency * t) - term.offset;
    f += term.weight * d * d;
  }
  return f;
}

Vector SinusoidalQuadraticCost::gradient(double t, const Vector& y) const {
  Vector g(dim());
  for (std::size_t k = 0; k < terms_.size(); ++k) {
    const auto& term = terms_[k];
    const auto idx = static_cast<Eigen::Index>(k);
    g(idx) = 2.0 * term.weight * (y(idx) - term.amplitude * std::cos(term.frequency * t) - term.offset);
  }
  return g;
}

Matrix SinusoidalQuadraticCost::hessian(double, const Vector&) const {
  Vector w(dim());
  for (std::size_t k = 0; k < terms_.size(); ++k) w(static_cast<Eigen::Index>(k)) = 2.0 * terms_[k].weight;
  return w.asDiagonal();
}

double SinusoidalQuadraticCost::max_distance(const Box& set, std::size_t k) const {
  const auto idx = static_cast<Eigen::Index>(k);
  const double a = std::abs(terms_[k].amplitude);
  const double b = terms_[k].offset;
  return std::max(std::abs(set.upper(idx) - (b - a)), std::abs(set.lower(idx) - (b + a)));
}

double SinusoidalQuadraticCost::value_bound(const Box& set) const {
  require_bounded(set, "cost bound");
  if (set.dim() != dim()) throw StructuralError("cost bound: dimension mismatch");
  double bound = 0.0;
  for (std::size_t k = 0; k < terms_.size(); ++k) {
    const double d = max_distance(set, k);
    bound += terms_[k].weight * d * d;
  }
  return bound;
}

double SinusoidalQuadraticCost::gradient_bound(const Box& set) const {
  require_bounded(set, "gradient bound");
  if (set.dim() != dim()) throw StructuralError("gradient bound: dimension mismatch");
  double sq = 0.0;
  for (std::size_t k = 0; k < terms_.size(); ++k) {
    const double g = 2.0 * terms_[k].weight * max_distance(set, k);
    sq += g * g;
  }
  return std::sqrt(sq);
}

double SinusoidalQuadraticCost::strong_convexity() const {
  double w = std::numeric_limits<double>::infinity();
  for (const auto& term : terms_) w = std::min(w, term.weight);
  return 2.0 * w;
}

SinusoidalAffineConstraint::SinusoidalAffineConstraint(std::vector<Row> rows, Eigen::Index input_dim)
    : rows_(std::move(rows)), input_dim_(input_dim) {
  if (rows_.empty()) throw StructuralError("affine constraint needs at least one row");
  for (const auto& row : rows_)
    if (static_cast<Eigen::Index>(row.coefficients.size()) != input_dim_)
      throw StructuralError("affine constraint row length differs from the output dimension");
}

Vector SinusoidalAffineConstraint::value(double t, const Vector& y) const {
  Vector g(output_dim());
  for (std::size_t j = 0; j < rows_.size(); ++j) {
    const auto& row = rows_[j];
    double v = row.offset + row.offset_amplitude * std::sin(row.offset_frequency * t);
    for (std::size_t k = 0; k < row.coefficients.size(); ++k) {
      const auto& c = row.coefficients[k];
      v += (c.amplitude * std::sin(c.frequency * t) + c.gain) * y(static_cast<Eigen::Index>(k));
    }
    g(static_cast<Eigen::Index>(j)) = v;
  }
  return g;
}

Matrix SinusoidalAffineConstraint::jacobian(double t, const Vector&) const {
  Matrix J(output_dim(), input_dim_);
  for (std::size_t j = 0; j < rows_.size(); ++j)
    for (std::size_t k = 0; k < rows_[j].coefficients.size(); ++k) {
      const auto& c = rows_[j].coefficients[k];
      J(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = c.amplitude * std::sin(c.frequency * t) + c.gain;
    }
  return J;
}

double SinusoidalAffineConstraint::value_bound(const Box& set) const {
  require_bounded(set, "constraint bound");
  if (set.dim() != input_dim_) throw StructuralError("constraint bound: dimension mismatch");
  // Each row is bilinear in (coefficient, y_k) over a product of intervals,
  // so its extremes sit at interval corners.
  double sq = 0.0;
  for (const auto& row : rows_) {
    double hi = row.offset + std::abs(row.offset_amplitude);
    double lo = row.offset - std::abs(row.offset_amplitude);
    for (std::size_t k = 0; k < row.coefficients.size(); ++k) {
      const auto& c = row.coefficients[k];
      const double c_lo = c.gain - std::abs(c.amplitude), c_hi = c.gain + std::abs(c.amplitude);
      const double y_lo = set.lower(static_cast<Eigen::Index>(k)), y_hi = set.upper(static_cast<Eigen::Index>(k));
      const double corners[4] = {c_lo * y_lo, c_lo * y_hi, c_hi * y_lo, c_hi * y_hi};
      hi += *std::max_element(corners, corners + 4);
      lo += *std::min_element(corners, corners + 4);
    }
    const double m = std::max(std::abs(hi), std::abs(lo));
    sq += m * m;
  }
  return std::sqrt(sq);
}

LocalProblem::LocalProblem(std::shared_ptr<const CostFunction> f, std::shared_ptr<const ConstraintFunction> g,
                           Box set)
    : cost(std::move(f)), constraint(std::move(g)), output_set(std::move(set)) {
  if (!cost || !constraint) throw StructuralError("LocalProblem: cost and constraint are required");
  if (cost->dim() != output_set.dim() || constraint->input_dim() != output_set.dim())
    throw StructuralError("LocalProblem: cost, constraint and box dimensions differ");
}

ProblemConstants problem_constants(const std::vector<LocalProblem>& problems) {
  ProblemConstants c;
  c.strong_convexity = std::numeric_limits<double>::infinity();
  for (const auto& p : problems) {
    c.k_f = std::max(c.k_f, p.cost->value_bound(p.output_set));
    c.k_g = std::max(c.k_g, p.constraint->value_bound(p.output_set));
    c.k_df = std::max(c.k_df, p.cost->gradient_bound(p.output_set));
    c.strong_convexity = std::min(c.strong_convexity, p.cost->strong_convexity());
  }
  if (problems.empty()) c.strong_convexity = 0.0;
  return c;
}

double cost_eval(const LocalProblem& problem, double t, const Vector& y) {
  require_member(problem, y, "cost_eval");
  return problem.cost->value(t, y);
}

Vector cost_subgradient(const LocalProblem& problem, double t, const Vector& y) {
  require_member(problem, y, "cost_subgradient");
  return problem.cost->gradient(t, y);
}

Vector constraint_eval(const LocalProblem& problem, double t, const Vector& y) {
  require_member(problem, y, "constraint_eval");
  return problem.constraint->value(t, y);
}

Matrix constraint_jacobian(const LocalProblem& problem, double t, const Vector& y) {
  require_member(problem, y, "constraint_jacobian");
  return problem.constraint->jacobian(t, y);
}

namespace {

double pairwise_l1(const Blocks& v, const Graph& graph) {
  if (static_cast<int>(v.size()) != graph.size()) throw StructuralError("block count differs from graph size");
  double total = 0.0;
  for (int i = 0; i < graph.size(); ++i)
    for (int j : graph.neighbors(i)) {
      const auto& vi = v[static_cast<std::size_t>(i)];
      const auto& vj = v[static_cast<std::size_t>(j)];
      if (vi.size() != vj.size()) throw StructuralError("neighboring blocks differ in size");
      total += (vi - vj).lpNorm<1>();
    }
  return 0.5 * total;
}

}  // namespace

double disagreement_h(const Blocks& mu, const Graph& graph) {
  for (const auto& m : mu)
    if ((m.array() < 0.0).any()) throw PreconditionError("disagreement_h: negative multiplier entry");
  return pairwise_l1(mu, graph);
}

double disagreement_chi(const Blocks& y, const Graph& graph) { return pairwise_l1(y, graph); }

double lagrangian_value(double t, const Blocks& y, const Blocks& mu, const std::vector<LocalProblem>& problems,
                        const GlobalParameters& params, const Graph& graph, bool identical_outputs) {
  if (y.size() != problems.size() || mu.size() != problems.size())
    throw StructuralError("lagrangian_value: block counts differ");
  double value = 0.0;
  for (std::size_t i = 0; i < problems.size(); ++i) {
    value += cost_eval(problems[i], t, y[i]);
    value += mu[i].dot(constraint_eval(problems[i], t, y[i]));
  }
  value -= params.k_mu * disagreement_h(mu, graph);
  if (identical_outputs) value += params.k_y * disagreement_chi(y, graph);
  return value;
}

Vector primal_subgradient(const LocalProblem& problem, double t, const Vector& y_i, const Vector& mu_i) {
  if ((mu_i.array() < 0.0).any()) throw PreconditionError("primal_subgradient: negative multiplier entry");
  return cost_subgradient(problem, t, y_i) + constraint_jacobian(problem, t, y_i).transpose() * mu_i;
}

Vector output_consensus_term(int i, const Blocks& y, const Graph& graph, double k_y) {
  const auto& yi = y[static_cast<std::size_t>(i)];
  Vector s = Vector::Zero(yi.size());
  for (int j : graph.neighbors(i)) s += sign_select(yi - y[static_cast<std::size_t>(j)]);
  return k_y * s;
}

Vector dual_subgradient(const LocalProblem& problem, double t, const Vector& y_i, int i, const Blocks& mu,
                        const Graph& graph, double k_mu) {
  const auto& mi = mu[static_cast<std::size_t>(i)];
  if ((mi.array() < 0.0).any()) throw PreconditionError("dual_subgradient: negative multiplier entry");
  Vector s = Vector::Zero(mi.size());
  for (int j : graph.neighbors(i)) s += sign_select(mi - mu[static_cast<std::size_t>(j)]);
  return constraint_eval(problem, t, y_i) - k_mu * s;
}

}  // namespace doco
