// Acceptance criteria: one PASS/FAIL line per criterion; exit status 1 if any fail.

#include "oracles.hpp"

#include "gasnet/forward.hpp"
#include "gasnet/optimize.hpp"
#include "gasnet/scenario.hpp"
#include "gasnet/verify.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <sstream>
#include <string>

using namespace gasnet;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string sci(double v) {
  std::ostringstream out;
  out.precision(3);
  out << std::scientific << v;
  return out.str();
}

Scenario scenario(const std::string& name) { return load_scenario(oracle::source_path("scenarios/" + name + ".json")); }

Vector random_vector(oracle::Rng& rng, Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

/// Kirchhoff and pressure-continuity residuals recomputed from the grid layout.
std::pair<double, double> junction_residuals(const Problem& problem, const Vector& v) {
  const auto& t = problem.topology();
  const auto& c = problem.classes();
  double flux = 0.0, gap = 0.0;
  for (auto vertex : c.inner) {
    double sum = 0.0, lo = 1e300, hi = -1e300;
    for (auto k : c.incident_pipes[vertex]) {
      const auto& g = problem.grid().pipes[k];
      const Index node = c.xi(k, vertex) == -1 ? 0 : g.intervals;
      const double d = t.pipes[k].params.diameter;
      sum += c.xi(k, vertex) * d * d * v[g.q(node)];
      lo = std::min(lo, v[g.p(node)]);
      hi = std::max(hi, v[g.p(node)]);
    }
    flux = std::max(flux, std::abs(sum));
    gap = std::max(gap, hi - lo);
  }
  return {flux, gap};
}

Outcome skew_adjointness() {
  const Problem problem(scenario("figure1").problem);
  const auto& model = problem.model();
  const Matrix Pi = Matrix(model.projector());
  const Matrix A = Matrix(model.skew_operator());
  oracle::Rng rng(1);
  double worst = 0.0;
  for (int s = 0; s < 100; ++s) {
    const Vector z = Pi * random_vector(rng, model.size());
    const double zz = oracle::weighted_dot(z, z, model.mass());
    worst = std::max(worst, std::abs(oracle::weighted_dot(A * z, z, model.mass())) / zz);
  }
  return {worst <= 1e-12, "max |(A z, z)_M| / ||z||_M^2 = " + sci(worst) + " over 100 states (<= 1e-12)"};
}

Outcome isometry() {
  auto spec = scenario("figure1").problem;
  for (auto& p : spec.topology.pipes)
    p.params = make_pipe_parameters(p.params.length, p.params.diameter, 0.0, 0.0, spec.topology.constants, p.id);
  const DiscreteModel model(spec.topology, build_grid(spec.topology, spec.resolution));
  oracle::Rng rng(2);
  const Vector u0 = Matrix(model.projector()) * random_vector(rng, model.size());
  const std::vector<Vector> forcing(1000, Vector::Zero(model.size()));
  const auto sol = linear_solve(model, u0, forcing, 0.01);
  const double n0 = std::sqrt(oracle::weighted_dot(u0, u0, model.mass()));
  double drift = 0.0;
  for (const auto& u : sol.states)
    drift = std::max(drift, std::abs(std::sqrt(oracle::weighted_dot(u, u, model.mass())) - n0) / n0);
  return {drift <= 1e-10 && sol.states.size() == 1001,
          "relative M-norm drift " + sci(drift) + " over 1000 steps (<= 1e-10)"};
}

Outcome steady_fixed_point() {
  double worst_ratio = 1e300;
  std::string detail;
  for (const char* name : {"single_pipe", "figure1"}) {
    auto spec = scenario(name).problem;
    spec.picard.tol = 1e-14;
    std::vector<double> dev;
    for (Index scale : {1, 2}) {
      for (auto& n : spec.resolution.per_pipe) n = 16 * scale;
      if (spec.resolution.per_pipe.empty()) spec.resolution.per_pipe.assign(spec.topology.num_pipes(), 16 * scale);
      spec.time.steps = 32 * scale;
      const Problem problem(spec);
      const auto traj = picard_solve(problem, problem.equilibrium_signal());
      dev.push_back(traj.truncated ? 1e300 : traj.max_deviation(problem.equilibrium()));
    }
    const double ratio = dev[0] / dev[1];
    worst_ratio = std::min(worst_ratio, ratio);
    detail += std::string(detail.empty() ? "" : ", ") + name + " " + sci(dev[0]) + " -> " + sci(dev[1]) +
              " (ratio " + sci(ratio) + ")";
  }
  return {worst_ratio >= 3.5, detail + " (ratio >= 3.5)"};
}

Outcome junction_conditions() {
  double flux = 0.0, gap = 0.0;
  int solves = 0, samples = 0;
  const auto check = [&](const Problem& problem, const ControlSignal& control) {
    const auto traj = picard_solve(problem, control);
    for (const auto& v : traj.states) {
      const auto [f, g] = junction_residuals(problem, v);
      flux = std::max(flux, f);
      gap = std::max(gap, g);
      ++samples;
    }
    ++solves;
  };
  const auto fig = scenario("figure1");
  const Problem figure1(fig.problem);
  check(figure1, build_control(fig, figure1));
  check(figure1, figure1.equilibrium_signal());
  std::mt19937_64 engine(4);
  for (int s = 0; s < 5; ++s) check(figure1, figure1.controls().full(random_reduced_control(figure1.controls(), engine, 0.9)));
  oracle::Rng rng(4);
  for (int s = 0; s < 10; ++s) {
    const Problem problem(oracle::random_problem_spec(rng));
    check(problem, problem.controls().full(random_reduced_control(problem.controls(), engine, 0.9)));
  }
  return {flux <= 1e-10 && gap <= 1e-10, "max Kirchhoff " + sci(flux) + ", max pressure gap " + sci(gap) + " over " +
                                             std::to_string(samples) + " samples of " + std::to_string(solves) +
                                             " solves (<= 1e-10)"};
}

Outcome lipschitz() {
  const Problem problem(scenario("figure1").problem);
  const auto& model = problem.model();
  const auto& lo = problem.bounds().lower;
  const auto& hi = problem.bounds().upper;
  const double c = problem.topology().constants.sound_speed;
  double bound = 0.0;
  for (std::size_t k = 0; k < problem.topology().num_pipes(); ++k) {
    const auto& b = problem.box().pipes[k];
    bound = std::max(bound, friction_lipschitz_bound(problem.topology().pipes[k].params.beta, c, b.p_lo, b.p_hi,
                                                     b.q_lo, b.q_hi));
  }
  oracle::Rng rng(5);
  double worst = 0.0;
  for (int s = 0; s < 1000; ++s) {
    Vector w1(model.size()), w2(model.size());
    for (Index i = 0; i < model.size(); ++i) {
      w1[i] = rng.uniform(lo[i], hi[i]);
      w2[i] = rng.uniform(lo[i], hi[i]);
    }
    const Vector dF = model.nonlinearity(w1) - model.nonlinearity(w2);
    const Vector dw = w1 - w2;
    worst = std::max(worst, std::sqrt(oracle::weighted_dot(dF, dF, model.mass()) /
                                      oracle::weighted_dot(dw, dw, model.mass())));
  }
  return {worst <= bound, "max sampled ratio " + sci(worst) + " over 1000 pairs, corner bound " + sci(bound)};
}

Outcome contraction() {
  bool ok = true;
  std::string detail;
  for (const char* name : {"single_pipe", "figure1"}) {
    const auto sc = scenario(name);
    auto spec = sc.problem;
    spec.picard.tol = 1e-13;
    const Problem full(spec);
    const ControlSignal control = build_control(sc, full);
    double worst = 0.0, last = 1.0;
    std::string means;
    for (Index halvings = 0; halvings <= 3; ++halvings) {
      const Index steps = full.time().steps >> halvings;
      const Problem problem = full.with_time({full.time().step() * static_cast<double>(steps), steps});
      const auto traj = picard_solve(problem, ControlSignal{problem.time(), control.values.topRows(steps + 1)});
      for (std::size_t k = 1; k < traj.ratios.size(); ++k) worst = std::max(worst, traj.ratios[k]);
      const double mean = traj.mean_ratio();
      ok = ok && mean < last;
      last = mean;
      means += (halvings ? " > " : "") + sci(mean);
    }
    ok = ok && worst < 1.0;
    detail += std::string(detail.empty() ? "" : "; ") + name + ": max delta_k " + sci(worst) + ", mean " + means;
  }
  return {ok, detail};
}

Outcome green() {
  const Problem problem(scenario("figure1").problem);
  const auto& space = problem.controls();
  std::mt19937_64 engine(7);
  oracle::Rng rng(7);
  double worst = 0.0;
  for (int s = 0; s < 20; ++s) {
    const ControlSignal phi = space.full(random_reduced_control(space, engine, 0.5));
    const Matrix h = random_reduced_control(space, engine, 1.0);
    const auto base = picard_solve(problem, phi);
    Vector vd = problem.equilibrium();
    for (Index i = 0; i < vd.size(); ++i) vd[i] += 0.05 * rng.normal();
    worst = std::max(worst, green_identity_residual(problem, phi, h, base, Target::constant(vd)));
  }
  return {worst <= 1e-10, "max relative residual " + sci(worst) + " over 20 instances (<= 1e-10)"};
}

Outcome gradient() {
  const auto sc = scenario("figure1");
  const Problem problem(sc.problem);
  CostConfig config = sc.cost;
  oracle::Rng rng(8);
  Vector vd = problem.equilibrium();
  for (Index i = 0; i < vd.size(); ++i) vd[i] += 0.02 * rng.normal();
  config.target = Target::constant(vd);
  const Objective objective(problem, config, problem.bounds());
  const auto& space = problem.controls();
  std::mt19937_64 engine(8);
  double worst = 0.0;
  for (int c = 0; c < 5; ++c) {
    const Matrix phi = random_reduced_control(space, engine, 0.5);
    const auto at = objective.evaluate(phi, 0.0, true);
    for (int d = 0; d < 5; ++d) {
      const Matrix h = random_reduced_control(space, engine, 0.4);
      const double eps = 1e-4;
      const double fd = (objective.evaluate(phi + eps * h, 0.0, false).penalized() -
                         objective.evaluate(phi - eps * h, 0.0, false).penalized()) /
                        (2.0 * eps);
      const double analytic = space.inner(at.gradient, h);
      worst = std::max(worst, std::abs(fd - analytic) / std::max(std::abs(fd), std::abs(analytic)));
    }
  }
  return {worst <= 1e-4, "max relative error " + sci(worst) + " over 5 controls x 5 directions (<= 1e-4)"};
}

struct InverseCrime {
  Scenario sc;
  Problem problem;
  CostConfig config;
  OptimizationReport direct;

  InverseCrime() : sc(scenario("inverse_crime")), problem(sc.problem), config(sc.cost) {
    config.target = build_target(*sc.target, problem);
    direct = optimize(problem, config, problem.bounds(), sc.seed);
  }
};

Outcome optimization_sanity(const InverseCrime& ic) {
  const double ratio = ic.direct.final.cost() / ic.direct.initial_cost;
  bool monotone = true;
  for (std::size_t k = 1; k < ic.direct.history.size(); ++k)
    monotone = monotone && ic.direct.history[k].cost <= ic.direct.history[k - 1].cost;

  const auto sp = scenario("single_pipe");
  const Problem problem(sp.problem);
  CostConfig config = sp.cost;
  config.target = Target::constant(problem.equilibrium());
  const auto eq = optimize(problem, config, problem.bounds(), sp.seed);
  const bool eq_ok = eq.iterations == 0 && eq.status == OptimizationStatus::Converged;

  return {ratio <= 1e-6 && monotone && eq_ok,
          "inverse crime J " + sci(ic.direct.initial_cost) + " -> " + sci(ic.direct.final.cost()) + " (ratio " +
              sci(ratio) + " <= 1e-6) in " + std::to_string(ic.direct.iterations) + " steps; history " +
              (monotone ? "nonincreasing" : "INCREASES") + "; equilibrium target " + std::to_string(eq.iterations) +
              " iterations (" + to_string(eq.status) + ")"};
}

Outcome homotopy(const InverseCrime& ic) {
  const auto runs = delta_homotopy(ic.problem, ic.config, ic.problem.bounds(), {1.0, 0.9}, ic.sc.seed);
  const auto& one = runs[0];
  const auto& nine = runs[1];
  const bool identical = one.ok && one.report.final.reduced == ic.direct.final.reduced &&
                         one.report.final.penalized() == ic.direct.final.penalized() &&
                         one.report.iterations == ic.direct.iterations;
  const bool nine_ok = nine.ok && nine.report.margins.feasible && nine.report.kkt.vi_residual >= -1e-5;

  const auto cs = scenario("constrained");
  const Problem problem(cs.problem);
  CostConfig config = cs.cost;
  config.target = build_target(*cs.target, problem);
  const ConstraintBounds bounds = make_bounds(problem.grid(), *cs.constraint_box);
  const auto con = optimize(problem, config, bounds, cs.seed);
  double min_mult = std::numeric_limits<double>::infinity();
  for (const auto& m : con.kkt.multipliers) min_mult = std::min(min_mult, m.value);
  const bool con_ok = !con.kkt.multipliers.empty() && min_mult >= 0.0 && con.kkt.complementarity <= 1e-6;

  return {identical && nine_ok && con_ok,
          std::string("delta 1 ") + (identical ? "bit-identical" : "DIFFERS") + "; delta 0.9 " +
              (nine.ok ? (nine.report.margins.feasible ? "feasible" : "INFEASIBLE") : "failed: " + nine.error) +
              ", KKT " + sci(nine.report.kkt.vi_residual) + " (>= -1e-5); constrained: " +
              std::to_string(con.kkt.multipliers.size()) + " multipliers, min " + sci(min_mult) +
              ", complementarity " + sci(con.kkt.complementarity) + " (<= 1e-6)"};
}

}  // namespace

int main() {
  int failures = 0;
  const auto report = [&](int id, const char* name, const std::function<Outcome()>& run) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("[%s] %2d %-22s %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
  };
  report(1, "skew_adjointness", skew_adjointness);
  report(2, "lossless_isometry", isometry);
  report(3, "steady_fixed_point", steady_fixed_point);
  report(4, "junction_conditions", junction_conditions);
  report(5, "friction_lipschitz", lipschitz);
  report(6, "picard_contraction", contraction);
  report(7, "green_identity", green);
  report(8, "gradient_fd", gradient);
  std::unique_ptr<InverseCrime> ic;
  try {
    ic = std::make_unique<InverseCrime>();
  } catch (const std::exception& e) {
    std::printf("inverse-crime setup failed: %s\n", e.what());
  }
  report(9, "optimization_sanity", [&] { return ic ? optimization_sanity(*ic) : Outcome{false, "no run"}; });
  report(10, "delta_homotopy", [&] { return ic ? homotopy(*ic) : Outcome{false, "no run"}; });
  std::printf("%d of 10 criteria passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}
