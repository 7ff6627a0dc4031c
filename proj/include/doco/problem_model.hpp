#pragma once

// Time-varying local costs and constraints, their bound constants, and the
// consensus-penalized Lagrangian with its primal and dual subgradients.

#include <memory>
#include <vector>

#include "doco/control_synthesis.hpp"
#include "doco/convex_geometry.hpp"
#include "doco/graph.hpp"

namespace doco {

/// Per-agent blocks of a stacked vector (outputs y_i, multipliers mu_i, ...).
using Blocks = std::vector<Vector>;

class CostFunction {
 public:
  virtual ~CostFunction() = default;
  virtual Eigen::Index dim() const = 0;
  virtual double value(double t, const Vector& y) const = 0;
  virtual Vector gradient(double t, const Vector& y) const = 0;
  virtual Matrix hessian(double t, const Vector& y) const = 0;
  /// sup |f(t, y)| over t >= 0 and y in `set`.
  virtual double value_bound(const Box& set) const = 0;
  /// sup |grad f(t, y)| over t >= 0 and y in `set`.
  virtual double gradient_bound(const Box& set) const = 0;
  virtual double strong_convexity() const = 0;
};

class ConstraintFunction {
 public:
  virtual ~ConstraintFunction() = default;
  virtual Eigen::Index input_dim() const = 0;
  virtual Eigen::Index output_dim() const = 0;
  virtual Vector value(double t, const Vector& y) const = 0;
  virtual Matrix jacobian(double t, const Vector& y) const = 0;
  /// sup |g(t, y)| over t >= 0 and y in `set`.
  virtual double value_bound(const Box& set) const = 0;
};

/// f(t, y) = sum_k w_k (y_k - a_k cos(omega_k t) - b_k)^2.
class SinusoidalQuadraticCost final : public CostFunction {
 public:
  struct Term {
    double weight{1.0};
    double amplitude{0.0};
    double frequency{0.0};
    double offset{0.0};
    bool operator==(const Term&) const = default;
  };

  explicit SinusoidalQuadraticCost(std::vector<Term> terms);

  const std::vector<Term>& terms() const { return terms_; }
  Vector center(double t) const;

  Eigen::Index dim() const override { return static_cast<Eigen::Index>(terms_.size()); }
  double value(double t, const Vector& y) const override;
  Vector gradient(double t, const Vector& y) const override;
  Matrix hessian(double t, const Vector& y) const override;
  double value_bound(const Box& set) const override;
  double gradient_bound(const Box& set) const override;
  double strong_convexity() const override;

  bool operator==(const SinusoidalQuadraticCost& o) const { return terms_ == o.terms_; }

 private:
  // Largest |y_k - c_k(t)| over the box and all t.
  double max_distance(const Box& set, std::size_t k) const;
  std::vector<Term> terms_;
};

/// g_j(t, y) = sum_k (beta_jk sin(nu_jk t) + alpha_jk) y_k
///             + delta_j + rho_j sin(kappa_j t).
class SinusoidalAffineConstraint final : public ConstraintFunction {
 public:
  struct Coefficient {
    double gain{0.0};       // alpha
    double amplitude{0.0};  // beta
    double frequency{0.0};  // nu
    bool operator==(const Coefficient&) const = default;
  };
  struct Row {
    std::vector<Coefficient> coefficients;
    double offset{0.0};            // delta
    double offset_amplitude{0.0};  // rho
    double offset_frequency{0.0};  // kappa
    bool operator==(const Row&) const = default;
  };

  SinusoidalAffineConstraint(std::vector<Row> rows, Eigen::Index input_dim);

  const std::vector<Row>& rows() const { return rows_; }

  Eigen::Index input_dim() const override { return input_dim_; }
  Eigen::Index output_dim() const override { return static_cast<Eigen::Index>(rows_.size()); }
  Vector value(double t, const Vector& y) const override;
  Matrix jacobian(double t, const Vector& y) const override;
  double value_bound(const Box& set) const override;

  bool operator==(const SinusoidalAffineConstraint& o) const {
    return input_dim_ == o.input_dim_ && rows_ == o.rows_;
  }

 private:
  std::vector<Row> rows_;
  Eigen::Index input_dim_;
};

/// One agent's cost, private constraint and output box.
struct LocalProblem {
  std::shared_ptr<const CostFunction> cost;
  std::shared_ptr<const ConstraintFunction> constraint;
  Box output_set;

  LocalProblem() = default;
  LocalProblem(std::shared_ptr<const CostFunction> f, std::shared_ptr<const ConstraintFunction> g,
               Box set);

  Eigen::Index output_dim() const { return output_set.dim(); }
  Eigen::Index constraint_dim() const { return constraint->output_dim(); }
};

struct GlobalParameters {
  double epsilon{0.1};
  double k_mu{0.0};
  double k_y{0.0};
  int agents{0};
  Eigen::Index constraint_dim{0};
};

/// Bound constants shared by all agents: K_f, K_g, K_df are maxima over
/// agents, l is the minimum strong-convexity modulus.
struct ProblemConstants {
  double k_f{0.0};
  double k_g{0.0};
  double k_df{0.0};
  double strong_convexity{0.0};
};

ProblemConstants problem_constants(const std::vector<LocalProblem>& problems);

// Membership-checked evaluations (PreconditionError when y is outside Y_i).
double cost_eval(const LocalProblem& problem, double t, const Vector& y);
Vector cost_subgradient(const LocalProblem& problem, double t, const Vector& y);
Vector constraint_eval(const LocalProblem& problem, double t, const Vector& y);
Matrix constraint_jacobian(const LocalProblem& problem, double t, const Vector& y);

/// h(mu) = 1/2 sum_i sum_j a_ij |mu_i - mu_j|_1. Multipliers must be >= 0.
double disagreement_h(const Blocks& mu, const Graph& graph);
/// chi(y) = 1/2 sum_i sum_j a_ij |y_i - y_j|_1 (equal block sizes).
double disagreement_chi(const Blocks& y, const Graph& graph);

/// sum f_i + sum mu_i^T g_i - K_mu h(mu)  (+ K_y chi(y) when `identical_outputs`).
double lagrangian_value(double t, const Blocks& y, const Blocks& mu,
                        const std::vector<LocalProblem>& problems, const GlobalParameters& params,
                        const Graph& graph, bool identical_outputs = false);

/// grad f_i + J_i^T mu_i.
Vector primal_subgradient(const LocalProblem& problem, double t, const Vector& y_i, const Vector& mu_i);

/// K_y sum_j a_ij sgn(y_i - y_j): the extra primal term of the identical-output Lagrangian.
Vector output_consensus_term(int i, const Blocks& y, const Graph& graph, double k_y);

/// g_i(t, y_i) - K_mu sum_j a_ij sgn(mu_i - mu_j).
Vector dual_subgradient(const LocalProblem& problem, double t, const Vector& y_i, int i,
                        const Blocks& mu, const Graph& graph, double k_mu);

}  // namespace doco
