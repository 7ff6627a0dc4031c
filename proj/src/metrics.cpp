#include "doco/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <mutex>

#include "doco/random.hpp"

namespace doco {

Vector OfflineSolution::stacked() const {
  Eigen::Index n = 0;
  for (const auto& b : y_star) n += b.size();
  Vector out(n);
  Eigen::Index k = 0;
  for (const auto& b : y_star) {
    out.segment(k, b.size()) = b;
    k += b.size();
  }
  return out;
}

namespace {

// Decision variable z and the map z -> (y_1, ..., y_N). Separate mode stacks
// the blocks; consensus mode shares one block between all agents.
struct Layout {
  bool consensus{false};
  std::vector<Eigen::Index> offset;
  std::vector<Eigen::Index> size;
  Eigen::Index dim{0};

  Layout(const std::vector<LocalProblem>& problems, bool shared) : consensus(shared) {
    for (const auto& p : problems) {
      const auto d = p.output_dim();
      if (shared) {
        if (d != problems.front().output_dim())
          throw StructuralError("consensus oracle needs equal output dimensions");
        offset.push_back(0);
      } else {
        offset.push_back(dim);
      }
      size.push_back(d);
      if (!shared) dim += d;
    }
    if (shared) dim = problems.front().output_dim();
  }

  Blocks split(const Vector& z) const {
    Blocks y;
    for (std::size_t i = 0; i < offset.size(); ++i) y.push_back(z.segment(offset[i], size[i]));
    return y;
  }
};

struct Program {
  Matrix G;  // rows: G z + c <= 0
  Vector c;
  Eigen::Index grid_rows{0};
  Vector lower, upper;
};

Program build_program(const std::vector<LocalProblem>& problems, const Layout& layout,
                      const std::vector<double>& times) {
  Program prog;
  const auto q = problems.front().constraint_dim();
  prog.lower = Vector::Constant(layout.dim, -std::numeric_limits<double>::infinity());
  prog.upper = Vector::Constant(layout.dim, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < problems.size(); ++i) {
    auto lo = prog.lower.segment(layout.offset[i], layout.size[i]);
    auto hi = prog.upper.segment(layout.offset[i], layout.size[i]);
    lo = lo.cwiseMax(problems[i].output_set.lower);
    hi = hi.cwiseMin(problems[i].output_set.upper);
  }
  if ((prog.lower.array() > prog.upper.array()).any())
    throw OracleError("output boxes have empty intersection", 0.0, true);

  Eigen::Index box_rows = 0;
  for (Eigen::Index k = 0; k < layout.dim; ++k)
    box_rows += std::isfinite(prog.lower(k)) + std::isfinite(prog.upper(k));
  prog.grid_rows = static_cast<Eigen::Index>(times.size()) * q;
  prog.G = Matrix::Zero(prog.grid_rows + box_rows, layout.dim);
  prog.c = Vector::Zero(prog.grid_rows + box_rows);

  Eigen::Index row = 0;
  for (double t : times) {
    for (std::size_t i = 0; i < problems.size(); ++i) {
      const auto& p = problems[i];
      const Vector ref = euclidean_project(p.output_set, Vector(Vector::Zero(p.output_dim())));
      const Matrix J = p.constraint->jacobian(t, ref);
      prog.G.block(row, layout.offset[i], q, layout.size[i]) += J;
      prog.c.segment(row, q) += p.constraint->value(t, ref) - J * ref;
    }
    row += q;
  }
  for (Eigen::Index k = 0; k < layout.dim; ++k) {
    if (std::isfinite(prog.upper(k))) {
      prog.G(row, k) = 1.0;
      prog.c(row++) = -prog.upper(k);
    }
    if (std::isfinite(prog.lower(k))) {
      prog.G(row, k) = -1.0;
      prog.c(row++) = prog.lower(k);
    }
  }
  return prog;
}

struct IpmResult {
  Vector z;
  double residual{0.0};
  int iterations{0};
};

// Primal-dual interior point with an infeasible start on the convex program
// min F(z) s.t. G z + c <= 0, F = grid average of the costs.
IpmResult interior_point(const std::vector<LocalProblem>& problems, const Layout& layout, const Program& prog,
                         const std::vector<double>& times, Vector z, const OracleOptions& opt) {
  const auto m = prog.G.rows();
  const double inv_k = 1.0 / static_cast<double>(times.size());
  Vector s = (-(prog.G * z + prog.c)).cwiseMax(1.0);
  Vector lambda = Vector::Ones(m);
  Vector grad(layout.dim);
  Matrix hess(layout.dim, layout.dim);
  double residual = std::numeric_limits<double>::infinity();
  double primal_residual = residual;

  for (int it = 0; it < opt.max_iterations; ++it) {
    grad.setZero();
    hess.setZero();
    const Blocks y = layout.split(z);
    for (double t : times)
      for (std::size_t i = 0; i < problems.size(); ++i) {
        grad.segment(layout.offset[i], layout.size[i]) += problems[i].cost->gradient(t, y[i]);
        hess.block(layout.offset[i], layout.offset[i], layout.size[i], layout.size[i]) +=
            problems[i].cost->hessian(t, y[i]);
      }
    grad *= inv_k;
    hess *= inv_k;

    const Vector r_d = grad + prog.G.transpose() * lambda;
    const Vector r_p = prog.G * z + prog.c + s;
    const Vector comp = s.cwiseProduct(lambda);
    primal_residual = r_p.lpNorm<Eigen::Infinity>();
    residual = std::max({r_d.lpNorm<Eigen::Infinity>(), primal_residual, comp.maxCoeff()});
    if (residual <= opt.tolerance) return {z, residual, it};

    const double tau = 0.1 * comp.mean();
    const Vector r_c = comp.array() - tau;
    const Vector d = lambda.cwiseQuotient(s);
    const Matrix M = hess + prog.G.transpose() * d.asDiagonal() * prog.G;
    const Vector rhs = -r_d - prog.G.transpose() * (lambda.cwiseProduct(r_p) - r_c).cwiseQuotient(s);
    const Vector dz = M.ldlt().solve(rhs);
    if (!dz.allFinite()) break;
    const Vector ds = -r_p - prog.G * dz;
    const Vector dl = (-r_c - lambda.cwiseProduct(ds)).cwiseQuotient(s);

    auto step_to_boundary = [](const Vector& v, const Vector& dv) {
      double a = 1.0;
      for (Eigen::Index k = 0; k < v.size(); ++k)
        if (dv(k) < 0.0) a = std::min(a, -0.99 * v(k) / dv(k));
      return a;
    };
    const double ap = step_to_boundary(s, ds);
    const double ad = step_to_boundary(lambda, dl);
    z += ap * dz;
    s += ap * ds;
    lambda += ad * dl;
  }
  char buf[160];
  if (primal_residual > 1e-6) {
    std::snprintf(buf, sizeof buf, "offline oracle: sampled feasible set appears empty (primal residual %.3g)",
                  primal_residual);
    throw OracleError(buf, residual, true);
  }
  std::snprintf(buf, sizeof buf, "offline oracle did not converge (KKT residual %.3g)", residual);
  throw OracleError(buf, residual, false);
}

std::mutex cache_mutex;
std::map<std::string, OfflineSolution>& cache() {
  static std::map<std::string, OfflineSolution> c;
  return c;
}

double stacked_cost(const std::vector<LocalProblem>& problems, double t, const Blocks& y) {
  double f = 0.0;
  for (std::size_t i = 0; i < problems.size(); ++i) f += problems[i].cost->value(t, y[i]);
  return f;
}

}  // namespace

void clear_oracle_cache() {
  std::lock_guard<std::mutex> lock(cache_mutex);
  cache().clear();
}

OfflineSolution offline_optimum(const std::vector<LocalProblem>& problems, double horizon,
                                const OracleOptions& opt) {
  if (problems.empty()) throw PreconditionError("offline oracle: no agents");
  if (opt.grid_k < 2) throw PreconditionError("offline oracle: grid_k must be >= 2");
  if (!(horizon > 0.0)) throw PreconditionError("offline oracle: horizon must be positive");
  if (opt.restarts < 1) throw PreconditionError("offline oracle: restarts must be >= 1");

  std::string key;
  if (!opt.cache_key.empty()) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "|%d|%.17g|%d|%d|%llu", opt.grid_k, horizon, opt.consensus ? 1 : 0,
                  opt.restarts, static_cast<unsigned long long>(opt.seed));
    key = opt.cache_key + buf;
    std::lock_guard<std::mutex> lock(cache_mutex);
    if (auto it = cache().find(key); it != cache().end()) return it->second;
  }

  const Layout layout(problems, opt.consensus);
  std::vector<double> times(static_cast<std::size_t>(opt.grid_k));
  for (int k = 0; k < opt.grid_k; ++k) times[static_cast<std::size_t>(k)] = horizon * k / opt.grid_k;
  const Program prog = build_program(problems, layout, times);

  Rng rng(opt.seed);
  std::vector<IpmResult> results;
  for (int r = 0; r < opt.restarts; ++r) {
    Vector z0(layout.dim);
    for (Eigen::Index k = 0; k < layout.dim; ++k) {
      const double lo = std::isfinite(prog.lower(k)) ? prog.lower(k) : -1.0;
      const double hi = std::isfinite(prog.upper(k)) ? prog.upper(k) : 1.0;
      z0(k) = r == 0 ? 0.5 * (lo + hi) : rng.uniform(lo, hi);
    }
    results.push_back(interior_point(problems, layout, prog, times, z0, opt));
  }

  OfflineSolution sol;
  const auto& best = results.front();
  sol.y_star = layout.split(best.z);
  sol.kkt_residual = best.residual;
  sol.iterations = best.iterations;
  for (const auto& r : results) {
    sol.kkt_residual = std::max(sol.kkt_residual, r.residual);
    sol.restart_spread = std::max(sol.restart_spread, (r.z - best.z).lpNorm<Eigen::Infinity>());
  }
  const Vector g = prog.G.topRows(prog.grid_rows) * best.z + prog.c.head(prog.grid_rows);
  sol.feasibility_margin = prog.grid_rows ? -g.maxCoeff() : std::numeric_limits<double>::infinity();
  const double dt = horizon / opt.grid_k;
  for (double t : times) sol.objective += dt * stacked_cost(problems, t, sol.y_star);

  if (!key.empty()) {
    std::lock_guard<std::mutex> lock(cache_mutex);
    cache().emplace(key, sol);
  }
  return sol;
}

std::vector<double> comparator_integral(const std::vector<LocalProblem>& problems, const Blocks& y_star,
                                        double dt, long steps) {
  if (y_star.size() != problems.size()) throw StructuralError("comparator: y* block count differs from agents");
  std::vector<double> out(static_cast<std::size_t>(steps) + 1, 0.0);
  double acc = 0.0;
  for (long s = 0; s < steps; ++s) {
    acc += dt * stacked_cost(problems, static_cast<double>(s) * dt, y_star);
    out[static_cast<std::size_t>(s) + 1] = acc;
  }
  return out;
}

namespace {

void check_sample(const Trajectory& traj, std::size_t sample) {
  if (sample >= traj.samples() || !(traj.dt > 0.0))
    throw StructuralError("trajectory sample out of range or grid missing");
}

}  // namespace

double regret(const Trajectory& traj, std::size_t sample, const Blocks& y_star,
              const std::vector<LocalProblem>& problems) {
  check_sample(traj, sample);
  const long s = traj.sample_steps[sample];
  return traj.cost_integral[sample] - comparator_integral(problems, y_star, traj.dt, s).back();
}

double positive_part_norm(const Vector& parts) { return parts.cwiseMax(0.0).norm(); }

FitValue fit(const Trajectory& traj, std::size_t sample) {
  check_sample(traj, sample);
  FitValue f;
  f.parts = traj.constraint_integral[sample];
  f.fit = positive_part_norm(f.parts);
  return f;
}

double individual_regret(const Trajectory& traj, std::size_t sample, int i, const Blocks& y_star,
                         const std::vector<LocalProblem>& problems) {
  if (traj.variant != VariantKind::ContinuousConsensus && problems.size() != 1)
    throw StructuralError("individual regret needs an identical-output trajectory");
  check_sample(traj, sample);
  if (i < 0 || static_cast<std::size_t>(i) >= problems.size()) throw StructuralError("agent index out of range");
  const double own = problems.size() == 1 ? traj.cost_integral[sample] : traj.consensus_cost_integral[sample](i);
  return own - comparator_integral(problems, y_star, traj.dt, traj.sample_steps[sample]).back();
}

TheoreticalBounds theoretical_bounds(const BoundInputs& in, double horizon) {
  if (!(in.epsilon > 0.0) || in.agents < 1) throw PreconditionError("bounds need epsilon > 0 and N >= 1");
  const double n = in.agents;
  const double d = in.output_distance;
  const double e = std::max(0.0, in.certificate_energy);
  TheoreticalBounds b;
  b.regret = (d * d + e) / (2.0 * in.epsilon);
  b.fit = (std::sqrt(n) * d + std::sqrt(2.0 * n * e)) / in.epsilon +
          2.0 * n * std::sqrt(in.k_f / in.epsilon) * std::sqrt(std::max(0.0, horizon));
  if (in.variant == VariantKind::EventTriggered && in.sigma > 0.0) {
    b.regret += in.sigma / in.iota;
    b.fit += std::sqrt(2.0 * n * in.sigma / (in.epsilon * in.iota));
  }
  b.certified = in.certified;
  b.on_expectation = in.variant == VariantKind::Noisy;
  return b;
}

NetworkCertificate network_certificate(const Network& net, double epsilon) {
  std::vector<Matrix> A, B, C, K, H;
  Vector x0(net.total_states());
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < net.models.size(); ++i) {
    A.push_back(net.models[i].A);
    B.push_back(net.models[i].B);
    C.push_back(net.models[i].C);
    K.push_back(net.gains[i].K);
    H.push_back(net.gains[i].H);
    x0.segment(k, net.initial_state[i].size()) = net.initial_state[i];
    k += net.initial_state[i].size();
  }
  const Matrix Ab = block_diagonal(A), Bb = block_diagonal(B), Cb = block_diagonal(C);
  const Matrix Kb = block_diagonal(K), Hb = block_diagonal(H);
  const double l = problem_constants(net.problems).strong_convexity;
  const auto [s1, s2] = certificate_constants<double>(Ab, Bb, Cb, Kb, epsilon, l);
  NetworkCertificate nc;
  nc.certificate = solve_certificate_matrix<double>(error_dynamics_matrix<double>(Ab, Bb, Cb, Kb, Hb), s2, s1);
  // xhat(0) = 0 and eta(0) = 0, so both error blocks start at x(0).
  Vector z0(2 * x0.size());
  z0 << x0, x0;
  nc.energy = z0.dot(nc.certificate.P * z0);
  return nc;
}

EventStatistics event_statistics(const Trajectory& traj, const GlobalParameters& params,
                                 const ControllerVariant& variant) {
  EventStatistics st;
  st.min_inter_event = std::numeric_limits<double>::infinity();
  for (const auto& ev : traj.events) {
    st.per_agent.push_back(static_cast<long>(ev.size()));
    st.total += static_cast<long>(ev.size());
    double prev = 0.0;
    for (double t : ev) {
      st.min_inter_event = std::min(st.min_inter_event, t - prev);
      prev = t;
    }
  }
  if (variant.kind == VariantKind::EventTriggered && traj.max_dual_drift > 0.0 && params.k_mu > 0.0) {
    const double horizon = static_cast<double>(traj.steps) * traj.dt;
    const double n = params.agents;
    st.zeno_lower_bound = variant.sigma * std::exp(-variant.iota * horizon) /
                          (3.0 * n * n * params.k_mu * std::sqrt(static_cast<double>(params.constraint_dim)) *
                           traj.max_dual_drift);
  }
  return st;
}

bool MetricsReport::bounds_hold() const {
  return std::all_of(checkpoints.begin(), checkpoints.end(), [](const Checkpoint& c) { return c.regret_ok && c.fit_ok; });
}

namespace {

double block_distance(const Blocks& a, const Blocks& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]).squaredNorm();
  return std::sqrt(s);
}

bool is_checkpoint(double t, double interval) {
  if (!(interval > 0.0) || !(t > 0.0)) return false;
  const double r = t / interval;
  return std::abs(r - std::round(r)) < 1e-9;
}

}  // namespace

MetricsReport evaluate(const Network& net, const SimConfig& config, const Trajectory& traj,
                       const MetricsOptions& options) {
  if (traj.samples() == 0) throw StructuralError("metrics: empty trajectory");
  MetricsReport rep;
  const auto params = config.parameters(net);
  const auto constants = problem_constants(net.problems);
  rep.gains = validate_gain_conditions(params, config.variant, constants);
  rep.certificate = network_certificate(net, config.epsilon);
  rep.events = event_statistics(traj, params, config.variant);

  OracleOptions oopt;
  oopt.grid_k = options.grid_k;
  oopt.cache_key = options.cache_key;
  const double horizon = traj.times.back();
  const Blocks& y0 = traj.y.front();

  if (horizon > 0.0) {
    rep.horizon_optimum = offline_optimum(net.problems, horizon, oopt);
    const auto cmp = comparator_integral(net.problems, rep.horizon_optimum.y_star, traj.dt, traj.sample_steps.back());
    for (std::size_t s = 0; s < traj.samples(); ++s)
      rep.regret_running.push_back(traj.cost_integral[s] - cmp[static_cast<std::size_t>(traj.sample_steps[s])]);
  } else {
    rep.regret_running.assign(traj.samples(), 0.0);
  }
  for (std::size_t s = 0; s < traj.samples(); ++s) rep.fit_running.push_back(fit(traj, s).fit);

  const bool consensus = config.variant.kind == VariantKind::ContinuousConsensus;
  for (std::size_t s = 1; s < traj.samples(); ++s) {
    const double t = traj.times[s];
    if (!is_checkpoint(t, options.checkpoint_interval) && s + 1 != traj.samples()) continue;
    Checkpoint cp;
    cp.time = t;
    cp.sample = s;
    const auto opt = offline_optimum(net.problems, t, oopt);
    cp.oracle_residual = opt.kkt_residual;
    cp.regret = regret(traj, s, opt.y_star, net.problems);
    cp.fit = fit(traj, s);
    BoundInputs in;
    in.agents = net.agents();
    in.epsilon = config.epsilon;
    in.k_f = constants.k_f;
    in.output_distance = block_distance(y0, opt.y_star);
    in.certificate_energy = rep.certificate.energy;
    in.variant = config.variant.kind;
    in.sigma = config.variant.sigma;
    in.iota = config.variant.iota;
    in.certified = rep.gains.certified() && !rep.certificate.certificate.ill_conditioned;
    cp.bounds = theoretical_bounds(in, t);
    cp.regret_ok = cp.regret <= cp.bounds.regret;
    cp.fit_ok = cp.fit.fit <= cp.bounds.fit;
    cp.events_total = traj.events_total[s];
    if (consensus) {
      OracleOptions copt = oopt;
      copt.consensus = true;
      const auto common = offline_optimum(net.problems, t, copt);
      for (int i = 0; i < net.agents(); ++i)
        cp.individual_regret.push_back(individual_regret(traj, s, i, common.y_star, net.problems));
    }
    rep.checkpoints.push_back(std::move(cp));
  }
  return rep;
}

MonteCarloSummary summarize(const std::vector<MonteCarloRun>& runs, const Blocks& y_star,
                            const std::vector<LocalProblem>& problems) {
  MonteCarloSummary sum;
  Vector positive_parts;
  for (const auto& r : runs) {
    if (!r.trajectory) {
      ++sum.failed;
      continue;
    }
    const auto& traj = *r.trajectory;
    const std::size_t last = traj.samples() - 1;
    sum.regrets.push_back(regret(traj, last, y_star, problems));
    const Vector pp = traj.constraint_integral[last].cwiseMax(0.0);
    if (positive_parts.size() == 0) positive_parts = Vector::Zero(pp.size());
    positive_parts += pp;
    ++sum.runs;
  }
  if (sum.runs > 0) {
    for (double r : sum.regrets) sum.mean_regret += r;
    sum.mean_regret /= sum.runs;
    sum.mean_fit = (positive_parts / sum.runs).norm();
  }
  return sum;
}

}  // namespace doco
