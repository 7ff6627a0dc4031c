#pragma once

// Scenario definitions (built-in examples and JSON files), network assembly,
// experiment plans and CSV / JSON export.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "doco/metrics.hpp"

namespace doco {

struct AgentSpec {
  Model model;
  std::optional<Vector> x0;  // drawn from the scenario seed when absent
  Box output_box;
  std::vector<SinusoidalQuadraticCost::Term> cost;
  std::vector<SinusoidalAffineConstraint::Row> constraint;

  bool operator==(const AgentSpec& o) const;
};

struct GraphSpec {
  std::string type{"ring"};  // "ring", "adjacency" or "random-connected"
  int n{0};
  Eigen::MatrixXi matrix;  // "adjacency" only
  double edge_prob{0.1};   // "random-connected" only
  std::uint64_t seed{0};   // "random-connected" only

  bool operator==(const GraphSpec& o) const;
  Graph build() const;
};

struct ScenarioSpec {
  std::string name;
  std::uint64_t seed{0};
  GraphSpec graph;
  double epsilon{0.1};
  double k_mu{0.0};
  double k_y{0.0};
  ControllerVariant variant;
  double stability_margin{kDefaultStabilityMargin};
  std::vector<AgentSpec> agents;

  bool operator==(const ScenarioSpec& o) const;
};

/// "example1" or "example2-pev". Throws ValidationError("unknown scenario").
ScenarioSpec builtin_scenario(const std::string& name);
std::vector<std::string> builtin_scenario_names();

nlohmann::json to_json(const ScenarioSpec& spec);
/// Throws ValidationError naming the offending field.
ScenarioSpec scenario_from_json(const nlohmann::json& j);

/// Parses and validates. Parse errors carry the line number; validation
/// errors carry the rule name.
ScenarioSpec load_scenario(const std::filesystem::path& path);
/// Built-in name or a file path.
ScenarioSpec resolve_scenario(const std::string& name_or_path);
void save_scenario(const ScenarioSpec& spec, const std::filesystem::path& path);

std::vector<LocalProblem> build_problems(const ScenarioSpec& spec);
/// Synthesizes gains and draws any missing initial state.
Network build_network(const ScenarioSpec& spec);

/// Checks finiteness, shapes, graph connectivity, rank / stabilizability and
/// the gain conditions of the scenario's variant. Throws ValidationError.
void validate_scenario(const ScenarioSpec& spec);

/// Simulation settings taken from the scenario (epsilon, gains, variant).
SimConfig default_config(const ScenarioSpec& spec);

/// 16 hex digits of FNV-1a over the canonical JSON of scenario and settings.
std::string config_hash(const ScenarioSpec& spec, const SimConfig& config);
std::string fnv1a_hex(const std::string& text);

void write_trajectory_csv(std::ostream& os, const Network& net, const Trajectory& traj,
                          const MetricsReport& report);
void write_metrics_csv(std::ostream& os, const MetricsReport& report);
nlohmann::json bound_report(const MetricsReport& report, const SimConfig& config);

struct ExperimentPlan {
  std::string scenario;  // built-in name or path
  std::filesystem::path output_dir{"runs"};
  VariantKind variant{VariantKind::Continuous};
  double horizon{50.0};
  double dt{1e-3};
  std::optional<double> epsilon;
  std::optional<double> k_mu;
  std::optional<double> noise_amplitude;
  std::vector<double> sigma{1.0};
  std::vector<double> iota{0.5};
  std::uint64_t first_seed{0};
  int seed_count{1};
  double checkpoint_interval{5.0};
  long log_stride{100};
  int grid_k{2000};
  // Sweep values chosen without a published grid to copy.
  bool illustrative{false};

  /// Throws ValidationError("empty sweep grid") and similar.
  void validate() const;
};

ExperimentPlan plan_from_json(const nlohmann::json& j);
ExperimentPlan load_plan(const std::filesystem::path& path);

struct RunRecord {
  std::string run_id;
  double sigma{0.0};
  double iota{0.0};
  std::uint64_t seed{0};
  std::string config_hash;
  std::string status;  // "ok", "diverged", "oracle-failed"
  double regret{0.0};
  double fit{0.0};
  long events_total{0};
  bool bounds_hold{false};
  Vector fit_parts;  // [F]_+ at the final sample
};

struct ExperimentResult {
  std::vector<RunRecord> runs;
  // One per sweep point with more than one seed.
  std::vector<RunRecord> means;
};

/// Runs every grid point, writing <out>/<run_id>/{trajectory.csv, metrics.csv,
/// report.json} and <out>/index.csv. Failed runs are recorded and skipped.
ExperimentResult run_experiment(const ExperimentPlan& plan);

struct RunArtifacts {
  Trajectory trajectory;
  MetricsReport report;
  std::string config_hash;
};

/// Simulates, evaluates and writes the three per-run files into `dir`.
RunArtifacts run_to_directory(const ScenarioSpec& spec, const Network& net, const SimConfig& config,
                              const std::filesystem::path& dir, int grid_k = 2000);

}  // namespace doco
