#include "gasnet/io.hpp"
#include "gasnet/parallel.hpp"
#include "gasnet/scenario.hpp"
#include "gasnet/verify.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int exit_check_failed = 1;
constexpr int exit_input_error = 2;
constexpr int exit_solver_error = 3;
constexpr int exit_internal_error = 4;

struct Options {
  std::string scenario;
  std::string output;
  int threads = 1;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  double transport_defect = 0.0;
};

const char* kind_name(gasnet::SolverError::Kind kind) {
  using K = gasnet::SolverError::Kind;
  switch (kind) {
    case K::VacuumGuard: return "vacuum_guard";
    case K::SteadyStateBreach: return "steady_state_breach";
    case K::ContractionFailure: return "contraction_failure";
    case K::Precondition: return "precondition";
    case K::LinearBreakdown: return "linear_breakdown";
    case K::HorizonLimited: return "horizon_limited";
  }
  return "solver";
}

struct Context {
  gasnet::Scenario scenario;
  std::optional<gasnet::Problem> problem;
};

void load(Context& ctx, const Options& opts) {
  ctx.scenario = gasnet::load_scenario(opts.scenario);
  if (opts.seed) ctx.scenario.seed = *opts.seed;
  ctx.scenario.problem.transport_defect = opts.transport_defect;
  ctx.problem.emplace(ctx.scenario.problem);
}

json trajectory_summary(const gasnet::Problem& problem, const gasnet::Trajectory& traj) {
  double min_margin = std::numeric_limits<double>::infinity();
  double max_delta = 0.0;
  for (const auto& s : traj.samples) {
    min_margin = std::min(min_margin, s.box_margin);
    max_delta = std::max(max_delta, s.contraction);
  }
  double h = 0.0;
  for (const auto& g : problem.grid().pipes) h = std::max(h, g.spacing);
  return json{{"status", traj.truncated ? "truncated horizon" : "ok"},
              {"requested_horizon", traj.requested_horizon},
              {"achieved_horizon", traj.horizon()},
              {"requested_steps", problem.time().steps},
              {"achieved_steps", traj.steps},
              {"picard_iterations", traj.iterations},
              {"contraction_ratios", traj.ratios},
              {"max_sample_delta", max_delta},
              {"max_kirchhoff_residual", traj.max_kirchhoff()},
              {"max_pressure_gap", traj.max_pressure_gap()},
              {"max_deviation", traj.max_deviation(problem.equilibrium())},
              {"min_box_margin", traj.samples.empty() ? 0.0 : min_margin},
              {"continuity_ratio", traj.continuity_ratio},
              {"h", h},
              {"tau", traj.step},
              {"r", problem.r()},
              {"c1", problem.c1()},
              {"kappa_u", problem.kappa_u()},
              {"eta", problem.controls().eta()}};
}

void write_trajectory_files(const fs::path& dir, const gasnet::Problem& problem, const gasnet::Trajectory& traj) {
  gasnet::write_text(dir / "trajectory.csv",
                     gasnet::trajectory_csv(problem.topology(), problem.grid(), traj.states, traj.step));
  gasnet::write_text(dir / "diagnostics.csv", gasnet::diagnostics_csv(traj));
}

int cmd_simulate(const Options& opts) {
  Context ctx;
  load(ctx, opts);
  const auto& problem = *ctx.problem;
  const gasnet::ControlSignal control = gasnet::build_control(ctx.scenario, problem);
  const gasnet::Trajectory traj = gasnet::picard_solve(problem, control);
  const fs::path dir(opts.output);
  fs::create_directories(dir);
  write_trajectory_files(dir, problem, traj);
  gasnet::write_json(dir / "summary.json", trajectory_summary(problem, traj));
  if (!opts.quiet) {
    std::cout << (traj.truncated ? "truncated horizon: " : "ok: ") << "T = " << traj.horizon() << " of "
              << traj.requested_horizon << ", " << traj.iterations << " Picard iterations\n";
  }
  return 0;
}

json kkt_json(const gasnet::OptimizationReport& report) {
  const auto& k = report.kkt;
  double max_lambda = 0.0;
  double min_lambda = 0.0;
  std::size_t positive = 0;
  for (const auto& m : k.multipliers) {
    max_lambda = std::max(max_lambda, m.value);
    min_lambda = std::min(min_lambda, m.value);
    if (m.value > 0.0) ++positive;
  }
  return json{{"gradient_norm", k.gradient_norm},
              {"active_points", k.multipliers.size()},
              {"positive_multipliers", positive},
              {"max_multiplier", max_lambda},
              {"min_multiplier", min_lambda},
              {"complementarity", k.complementarity},
              {"zeta", k.zeta},
              {"vi_residual", k.vi_residual},
              {"rzk_margin", k.rzk_margin}};
}

json report_json(const gasnet::OptimizationReport& report) {
  const double ratio = report.initial_cost > 0.0 ? report.final.cost() / report.initial_cost : 0.0;
  return json{{"status", gasnet::to_string(report.status)},
              {"iterations", report.iterations},
              {"initial_J", report.initial_cost},
              {"final_J", report.final.cost()},
              {"final_J_penalized", report.final.penalized()},
              {"J_ratio", ratio},
              {"final_rho", report.final.rho},
              {"feasible", report.margins.feasible},
              {"min_margin", report.margins.min_margin},
              {"worst_violation", report.margins.worst_violation},
              {"target_interior", report.target_interior},
              {"delta", report.delta},
              {"kkt", kkt_json(report)}};
}

void write_report_files(const fs::path& dir, const gasnet::Problem& problem, const gasnet::OptimizationReport& r) {
  fs::create_directories(dir);
  gasnet::write_text(dir / "iterations.csv", gasnet::iterations_csv(r.history));
  gasnet::write_text(dir / "control.csv", gasnet::control_csv(r.final.control, problem.controls().active()));
}

int cmd_optimize(const Options& opts) {
  Context ctx;
  load(ctx, opts);
  const auto& problem = *ctx.problem;
  if (!ctx.scenario.target) throw gasnet::ParseError("missing key 'target'");
  gasnet::CostConfig config = ctx.scenario.cost;
  config.target = gasnet::build_target(*ctx.scenario.target, problem);

  const gasnet::ConstraintBounds bounds = ctx.scenario.constraint_box
                                             ? gasnet::make_bounds(problem.grid(), *ctx.scenario.constraint_box)
                                             : problem.bounds();
  const gasnet::OptimizationReport report = gasnet::optimize(problem, config, bounds, ctx.scenario.seed);
  const fs::path dir(opts.output);
  write_report_files(dir, problem, report);
  write_trajectory_files(dir, problem, report.final.trajectory);
  const gasnet::AdjointTrajectory adjoint =
      gasnet::adjoint_solve(problem, report.final.trajectory, report.final.control, config.target);
  gasnet::write_text(dir / "adjoint.csv", gasnet::adjoint_csv(problem.topology(), problem.grid(), adjoint,
                                                              report.final.trajectory.step));

  json summary = report_json(report);
  summary["trajectory"] = trajectory_summary(problem, report.final.trajectory);
  summary["adjoint_stability_ratio"] = adjoint.stability_ratio;
  if (!ctx.scenario.homotopy.empty()) {
    const auto runs = gasnet::delta_homotopy(problem, config, bounds, ctx.scenario.homotopy, ctx.scenario.seed);
    json trace = json::array();
    for (std::size_t i = 0; i < runs.size(); ++i) {
      if (runs[i].ok) {
        const std::string name = "delta_" + gasnet::format_number(runs[i].delta);
        write_report_files(dir / "homotopy" / name, problem, runs[i].report);
        trace.push_back(report_json(runs[i].report));
      } else {
        trace.push_back(json{{"delta", runs[i].delta}, {"status", "error"}, {"error", runs[i].error}});
      }
    }
    summary["homotopy"] = trace;
  }
  gasnet::write_json(dir / "summary.json", summary);
  if (!opts.quiet) {
    std::cout << gasnet::to_string(report.status) << ": " << report.iterations << " iterations, J "
              << report.initial_cost << " -> " << report.final.cost() << "\n";
  }
  return 0;
}

int cmd_verify(const Options& opts) {
  Context ctx;
  load(ctx, opts);
  const auto& problem = *ctx.problem;
  gasnet::CostConfig config = ctx.scenario.cost;
  config.target = ctx.scenario.target ? gasnet::build_target(*ctx.scenario.target, problem)
                                      : gasnet::Target::constant(problem.equilibrium());
  gasnet::VerifyOptions vo;
  vo.seed = ctx.scenario.seed;
  const auto results = gasnet::run_verify(problem, config, vo);
  bool all = true;
  for (const auto& r : results) {
    all = all && r.pass;
    if (!opts.quiet || !r.pass) {
      char line[256];
      std::snprintf(line, sizeof(line), "%-22s %s  value %.3e  threshold %.3e  (%s)\n", r.name.c_str(),
                    r.pass ? "PASS" : "FAIL", r.value, r.threshold, r.detail.c_str());
      std::cout << line;
    }
  }
  if (!all) {
    for (const auto& r : results)
      if (!r.pass) std::cerr << "verify: check '" << r.name << "' failed\n";
    return exit_check_failed;
  }
  return 0;
}

int report_error(const Options& opts, const std::string& kind, const std::string& message, int code) {
  const json doc{{"status", "error"}, {"kind", kind}, {"message", message}};
  std::cerr << "error: " << message << "\n";
  if (!opts.output.empty()) {
    try {
      fs::create_directories(opts.output);
      gasnet::write_json(fs::path(opts.output) / "error.json", doc);
    } catch (const std::exception&) {
    }
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gasnet: gas network simulation and optimal boundary control"};
  app.require_subcommand(1);
  Options opts;
  int threads = 1;
  std::uint64_t seed = 0;
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", seed, "random seed (overrides the scenario)");
  app.add_flag("--quiet", opts.quiet, "suppress progress output");
  app.add_option("--transport-defect", opts.transport_defect, "test hook")->group("");

  auto* simulate = app.add_subcommand("simulate", "forward simulation");
  simulate->add_option("scenario", opts.scenario)->required()->check(CLI::ExistingFile);
  simulate->add_option("-o,--output", opts.output, "output directory")->required();

  auto* optimize = app.add_subcommand("optimize", "optimal boundary control");
  optimize->add_option("scenario", opts.scenario)->required()->check(CLI::ExistingFile);
  optimize->add_option("-o,--output", opts.output, "output directory")->required();

  auto* verify = app.add_subcommand("verify", "property battery");
  verify->add_option("scenario", opts.scenario)->required()->check(CLI::ExistingFile);

  for (auto* sub : {simulate, optimize, verify}) {
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "random seed (overrides the scenario)");
    sub->add_flag("--quiet", opts.quiet, "suppress progress output");
    sub->add_option("--transport-defect", opts.transport_defect, "test hook")->group("");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_input_error;
  }
  opts.threads = threads;
  bool seed_given = seed_opt->count() > 0;
  for (auto* sub : {simulate, optimize, verify})
    if (sub->get_option("--seed")->count() > 0) seed_given = true;
  if (seed_given) opts.seed = seed;
  gasnet::set_default_threads(opts.threads);

  try {
    if (*simulate) return cmd_simulate(opts);
    if (*optimize) return cmd_optimize(opts);
    return cmd_verify(opts);
  } catch (const gasnet::ParseError& e) {
    return report_error(opts, "parse", e.what(), exit_input_error);
  } catch (const gasnet::ValidationError& e) {
    return report_error(opts, "validation", e.what(), exit_input_error);
  } catch (const gasnet::SolverError& e) {
    return report_error(opts, kind_name(e.kind()), e.what(), exit_solver_error);
  } catch (const std::exception& e) {
    return report_error(opts, "internal", e.what(), exit_internal_error);
  }
}
