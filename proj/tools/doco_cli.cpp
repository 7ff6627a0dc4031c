// Command-line front end: run, sweep, validate, oracle.

#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "doco/scenario.hpp"

namespace {

enum Exit { kOk = 0, kValidation = 2, kDivergence = 3, kOracle = 4 };

struct RunOptions {
  std::string scenario{"example1"};
  std::optional<std::string> variant;
  std::optional<double> horizon, dt, epsilon, k_mu, sigma, iota, noise;
  std::optional<std::uint64_t> seed;
  long log_stride{100};
  int grid_k{2000};
  std::string out{"run"};
};

int cmd_run(const RunOptions& o) {
  const auto spec = doco::resolve_scenario(o.scenario);
  auto config = doco::default_config(spec);
  if (o.variant) {
    const auto kind = doco::parse_variant(*o.variant);
    if (!kind) throw doco::ValidationError("unknown variant", *o.variant);
    config.variant.kind = *kind;
  }
  if (o.horizon) config.horizon = *o.horizon;
  if (o.dt) config.dt = *o.dt;
  if (o.epsilon) config.epsilon = *o.epsilon;
  if (o.k_mu) config.k_mu = *o.k_mu;
  if (o.sigma) config.variant.sigma = *o.sigma;
  if (o.iota) config.variant.iota = *o.iota;
  if (o.noise) config.variant.noise.amplitude = *o.noise;
  if (o.seed) config.seed = *o.seed;
  config.log_stride = o.log_stride;
  config.validate();

  const auto net = doco::build_network(spec);
  const auto art = doco::run_to_directory(spec, net, config, o.out, o.grid_k);
  const auto& last = art.report.checkpoints.empty() ? doco::Checkpoint{} : art.report.checkpoints.back();
  std::cout << "scenario " << spec.name << ", variant " << doco::to_string(config.variant.kind) << ", hash "
            << art.config_hash << "\n"
            << "T=" << last.time << " regret=" << last.regret << " (bound " << last.bounds.regret << ")"
            << " fit=" << last.fit.fit << " (bound " << last.bounds.fit << ")"
            << " events=" << art.report.events.total << "\n"
            << (art.report.bounds_hold() ? "bounds hold" : "bounds violated")
            << (last.bounds.certified ? "" : " (gains not certified)") << "\n";
  return kOk;
}

int cmd_sweep(const std::string& plan_path) {
  const auto plan = doco::load_plan(plan_path);
  const auto res = doco::run_experiment(plan);
  int failed = 0;
  for (const auto& r : res.runs) failed += r.status != "ok";
  std::cout << res.runs.size() << " runs, " << failed << " failed; index at "
            << (plan.output_dir / "index.csv").string() << "\n";
  return kOk;
}

int cmd_validate(const std::string& path) {
  const auto spec = doco::load_scenario(path);
  std::cout << spec.name << ": valid (" << spec.agents.size() << " agents)\n";
  return kOk;
}

int cmd_oracle(const std::string& scenario, int grid_k, double horizon, int restarts) {
  const auto spec = doco::resolve_scenario(scenario);
  doco::OracleOptions opt;
  opt.grid_k = grid_k;
  opt.restarts = restarts;
  const auto sol = doco::offline_optimum(doco::build_problems(spec), horizon, opt);
  nlohmann::json j;
  const doco::Vector y = sol.stacked();
  j["y_star"] = std::vector<double>(y.data(), y.data() + y.size());
  j["kkt_residual"] = sol.kkt_residual;
  j["feasibility_margin"] = sol.feasibility_margin;
  j["objective"] = sol.objective;
  j["restart_spread"] = sol.restart_spread;
  std::cout << j.dump(2) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed online optimization simulator for linear multi-agent networks"};
  app.require_subcommand(1);

  RunOptions ro;
  auto* run = app.add_subcommand("run", "simulate one scenario and write trajectory, metrics and bound report");
  run->add_option("--scenario", ro.scenario, "built-in name (example1, example2-pev) or JSON path");
  run->add_option("--variant", ro.variant, "continuous | event-triggered | noisy | continuous-consensus");
  run->add_option("--T", ro.horizon, "horizon in seconds");
  run->add_option("--dt", ro.dt, "step in seconds");
  run->add_option("--epsilon", ro.epsilon);
  run->add_option("--k-mu", ro.k_mu);
  run->add_option("--sigma", ro.sigma);
  run->add_option("--iota", ro.iota);
  run->add_option("--noise", ro.noise, "uniform noise amplitude (noisy variant)");
  run->add_option("--seed", ro.seed);
  run->add_option("--log-stride", ro.log_stride);
  run->add_option("--grid-k", ro.grid_k);
  run->add_option("--out", ro.out, "output directory");

  std::string plan;
  auto* sweep = app.add_subcommand("sweep", "run an experiment plan");
  sweep->add_option("--plan", plan)->required();

  std::string vpath;
  auto* validate = app.add_subcommand("validate", "parse and validate a scenario file");
  validate->add_option("--scenario", vpath)->required();

  std::string oscenario{"example1"};
  int grid_k = 2000, restarts = 1;
  double ohorizon = 50.0;
  auto* oracle = app.add_subcommand("oracle", "compute the offline optimum y*");
  oracle->add_option("--scenario", oscenario);
  oracle->add_option("--grid-k", grid_k);
  oracle->add_option("--T", ohorizon);
  oracle->add_option("--restarts", restarts);

  std::string sscenario;
  auto* show = app.add_subcommand("show", "print a scenario as JSON (built-ins included)");
  show->add_option("--scenario", sscenario)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(ro);
    if (*sweep) return cmd_sweep(plan);
    if (*validate) return cmd_validate(vpath);
    if (*show) {
      std::cout << doco::to_json(doco::resolve_scenario(sscenario)).dump(2) << "\n";
      return kOk;
    }
    if (*oracle) return cmd_oracle(oscenario, grid_k, ohorizon, restarts);
  } catch (const doco::ValidationError& e) {
    std::cerr << "validation failed: " << e.what() << "\n";
    return kValidation;
  } catch (const doco::DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return kDivergence;
  } catch (const doco::OracleError& e) {
    std::cerr << "oracle failed: " << e.what() << "\n";
    return kOracle;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kValidation;
  }
  return kOk;
}
