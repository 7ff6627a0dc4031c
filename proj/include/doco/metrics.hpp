#pragma once

// Offline (hindsight) optimum, regret / fit evaluation and the closed-form
// regret and fit bounds for each controller variant.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "doco/simulation.hpp"

namespace doco {

struct OracleOptions {
  int grid_k{2000};
  // Solve with all outputs tied to one common value (individual-regret comparator).
  bool consensus{false};
  int restarts{1};  // > 1 adds random starting points and reports their spread
  std::uint64_t seed{1};
  double tolerance{1e-9};
  int max_iterations{200};
  // Non-empty: results are memoized in-process under this key (plus grid and horizon).
  std::string cache_key;
};

struct OfflineSolution {
  Blocks y_star;
  double kkt_residual{0.0};
  // min over grid times and rows of -sum_i g_i(t, y*).
  double feasibility_margin{0.0};
  // Integral of f(t, y*) over [0, T] on the oracle grid.
  double objective{0.0};
  int iterations{0};
  // Largest sup-norm distance between restart solutions (0 with one start).
  double restart_spread{0.0};

  Vector stacked() const;
};

/// Minimizes the grid average of f(t, y) over y in Y subject to
/// sum_i g_i(t_k, y_i) <= 0 at every grid time t_k = k T / grid_k.
/// Throws OracleError when the sampled set is empty or the solver stalls.
OfflineSolution offline_optimum(const std::vector<LocalProblem>& problems, double horizon,
                                const OracleOptions& options = {});
void clear_oracle_cache();

/// Running integral of f(t, y*) on the simulation grid: entry s covers [0, s dt).
std::vector<double> comparator_integral(const std::vector<LocalProblem>& problems, const Blocks& y_star,
                                        double dt, long steps);

/// Regret at logged sample `sample` against y* (left-Riemann on the trajectory grid).
double regret(const Trajectory& traj, std::size_t sample, const Blocks& y_star,
              const std::vector<LocalProblem>& problems);

struct FitValue {
  double fit{0.0};
  Vector parts;  // F_j^T
};
FitValue fit(const Trajectory& traj, std::size_t sample);
/// |[F]_+| for a vector of cumulative constraint integrals.
double positive_part_norm(const Vector& parts);

/// integral of (sum_j f_j(t, y_i(t)) - f(t, y*)); consensus-variant trajectories only.
double individual_regret(const Trajectory& traj, std::size_t sample, int i, const Blocks& y_star,
                         const std::vector<LocalProblem>& problems);

/// Quantities entering the closed-form bounds.
struct BoundInputs {
  int agents{0};
  double epsilon{0.0};
  double k_f{0.0};
  double output_distance{0.0};  // |y(0) - y*|
  double certificate_energy{0.0};  // z0^T P z0
  VariantKind variant{VariantKind::Continuous};
  double sigma{0.0};
  double iota{1.0};
  bool certified{true};
};

struct TheoreticalBounds {
  double regret{0.0};
  double fit{0.0};
  bool certified{true};
  bool on_expectation{false};
};

TheoreticalBounds theoretical_bounds(const BoundInputs& in, double horizon);

/// Network certificate P for the stacked error dynamics and the energy
/// z0^T P z0 with z0 = [x(0) - xhat(0); x(0) - Psi eta(0)].
struct NetworkCertificate {
  CertificateMatrix<double> certificate;
  double energy{0.0};
};
NetworkCertificate network_certificate(const Network& net, double epsilon);

struct Checkpoint {
  double time{0.0};
  std::size_t sample{0};
  double regret{0.0};
  FitValue fit;
  TheoreticalBounds bounds;
  bool regret_ok{false};
  bool fit_ok{false};
  long events_total{0};
  std::vector<double> individual_regret;  // consensus variant only
  double oracle_residual{0.0};
};

struct EventStatistics {
  long total{0};
  std::vector<long> per_agent;
  // Smallest gap between consecutive broadcasts of one agent (first gap measured from t = 0).
  double min_inter_event{0.0};
  // sigma e^{-iota T} / (3 N^2 K_mu sqrt(q) delta), delta = largest observed |mu'|.
  double zeno_lower_bound{0.0};
};

EventStatistics event_statistics(const Trajectory& traj, const GlobalParameters& params,
                                 const ControllerVariant& variant);

struct MetricsReport {
  std::vector<Checkpoint> checkpoints;
  GainReport gains;
  NetworkCertificate certificate;
  EventStatistics events;
  // y* of the full horizon, used for the running regret column.
  OfflineSolution horizon_optimum;
  std::vector<double> regret_running;  // one entry per logged sample
  std::vector<double> fit_running;

  bool bounds_hold() const;
};

struct MetricsOptions {
  double checkpoint_interval{5.0};
  int grid_k{2000};
  std::string cache_key;
};

MetricsReport evaluate(const Network& net, const SimConfig& config, const Trajectory& traj,
                       const MetricsOptions& options = {});

/// Monte Carlo aggregate at the final sample: mean regret and |mean([F]_+)|.
struct MonteCarloSummary {
  int runs{0};
  int failed{0};
  double mean_regret{0.0};
  double mean_fit{0.0};
  std::vector<double> regrets;
};
MonteCarloSummary summarize(const std::vector<MonteCarloRun>& runs, const Blocks& y_star,
                            const std::vector<LocalProblem>& problems);

}  // namespace doco
