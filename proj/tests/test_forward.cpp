#include "oracles.hpp"

#include "gasnet/forward.hpp"
#include "gasnet/scenario.hpp"

#include <doctest.h>

#include <cmath>

using namespace gasnet;

namespace {

Vector random_vector(oracle::Rng& rng, Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

/// Admissible control: a bump scaled to half of the tighter ball.
ControlSignal admissible_control(const Problem& problem, double fraction, double phase = 0.0) {
  const auto& space = problem.controls();
  Matrix r = oracle::bump_control(problem.time(), space.active(), 1.0, phase);
  const double s = std::min(space.eta() / space.norm(r), space.kappa_u() / space.sup_norm(r));
  return space.full(fraction * s * r);
}

}  // namespace

TEST_CASE("frictionless horizontal network: midpoint steps preserve the M-norm") {
  oracle::Rng rng(5);
  oracle::ProblemOptions opt;
  opt.tree.frictionless = true;
  opt.tree.horizontal = true;
  for (int trial = 0; trial < 5; ++trial) {
    const auto spec = oracle::random_problem_spec(rng, opt);
    const DiscreteModel model(spec.topology, build_grid(spec.topology, spec.resolution));
    const Vector u0 = model.projector() * random_vector(rng, model.size());
    const std::vector<Vector> forcing(1000, Vector::Zero(model.size()));
    const auto sol = linear_solve(model, u0, forcing, 0.01);
    const double n0 = model.norm(sol.states.front());
    double drift = 0.0;
    for (const auto& u : sol.states) drift = std::max(drift, std::abs(model.norm(u) - n0) / n0);
    CHECK(drift <= 1e-10);
  }
}

TEST_CASE("linear_solve agrees with a dense midpoint oracle") {
  oracle::Rng rng(7);
  const auto spec = oracle::random_problem_spec(rng, {{3, 5}});
  const DiscreteModel model(spec.topology, build_grid(spec.topology, spec.resolution));
  const Matrix E = Matrix(model.basis());
  const Matrix M = model.mass().asDiagonal();
  const Matrix R = (E.transpose() * M * E).ldlt().solve(E.transpose() * M);
  const Matrix K = R * Matrix(model.transport() + model.source()) * E;
  const double tau = 0.02;
  const Vector u0 = random_vector(rng, model.size());
  std::vector<Vector> forcing;
  for (int n = 0; n < 30; ++n) forcing.push_back(random_vector(rng, model.size()));
  const auto sol = linear_solve(model, u0, forcing, tau);
  Vector y = R * u0;
  for (std::size_t n = 0; n < forcing.size(); ++n) {
    y = oracle::dense_midpoint_step(K, tau, y, tau * R * forcing[n]);
    CHECK((E * y - sol.states[n + 1]).norm() <= 1e-10 * (1.0 + y.norm()));
  }
}

TEST_CASE("equilibrium control stays at the discrete equilibrium up to O(h^2)") {
  const auto sc = load_scenario(oracle::source_path("scenarios/single_pipe.json"));
  auto spec = sc.problem;
  spec.picard.tol = 1e-14;
  double last = 0.0;
  for (Index n : {16, 32}) {
    spec.resolution.per_pipe = {n};
    spec.time.steps = 2 * n;
    const Problem problem(spec);
    const auto traj = picard_solve(problem, problem.equilibrium_signal());
    CHECK_FALSE(traj.truncated);
    const double dev = traj.max_deviation(problem.equilibrium());
    CHECK(dev < 1e-4);
    if (last > 0.0) CHECK(last / dev > 3.5);
    last = dev;
  }
}

TEST_CASE("property: junction residuals vanish and Picard contracts on random networks") {
  oracle::Rng rng(13);
  for (int trial = 0; trial < 12; ++trial) {
    const Problem problem(oracle::random_problem_spec(rng));
    const auto traj = picard_solve(problem, admissible_control(problem, 0.8, rng.uniform(0.0, 3.0)));
    REQUIRE_FALSE(traj.truncated);
    CHECK(traj.max_kirchhoff() <= 1e-10);
    CHECK(traj.max_pressure_gap() <= 1e-10);
    for (std::size_t k = 1; k < traj.ratios.size(); ++k) CHECK(traj.ratios[k] < 1.0);
    CHECK(traj.states.size() == static_cast<std::size_t>(problem.time().steps + 1));
    // Converged iterate is a fixed point of the midpoint scheme.
    const auto& model = problem.model();
    const double tau = problem.time().step();
    for (Index n = 0; n + 1 < static_cast<Index>(traj.states.size()); ++n) {
      const Vector& a = traj.states[static_cast<std::size_t>(n)];
      const Vector& b = traj.states[static_cast<std::size_t>(n + 1)];
      const Vector mid = 0.5 * (a + b);
      // Project the semidiscrete residual onto the homogeneous space.
      const Vector res = model.projector() *
                         ((b - a) / tau - model.transport() * mid - model.source() * mid - model.nonlinearity(mid));
      // Boundary rows are driven by the control lifting and drop out after projection.
      CHECK(model.norm(res) <= 1e-8 * (1.0 + model.norm(mid)));
    }
  }
}

TEST_CASE("r-ball breach truncates the horizon") {
  const auto sc = load_scenario(oracle::source_path("scenarios/rball_breach.json"));
  const Problem problem(sc.problem);
  const auto traj = picard_solve(problem, build_control(sc, problem));
  CHECK(traj.truncated);
  CHECK(traj.steps < problem.time().steps);
  CHECK(traj.states.size() == static_cast<std::size_t>(traj.steps + 1));
  for (const auto& s : traj.samples) CHECK(s.rball_distance < problem.rball_threshold());
}

TEST_CASE("control validation") {
  const auto sc = load_scenario(oracle::source_path("scenarios/single_pipe.json"));
  const Problem problem(sc.problem);
  ControlSignal c = problem.equilibrium_signal();
  c.values(0, 0) += 0.1;
  CHECK_THROWS_AS(picard_solve(problem, c), ValidationError);

  c = problem.equilibrium_signal();
  c.values(5, 0) += 10.0 * problem.kappa_u();
  CHECK_THROWS_WITH_AS(picard_solve(problem, c), doctest::Contains("not admissible"), ValidationError);

  c = problem.equilibrium_signal();
  c.time.horizon *= 2.0;
  CHECK_THROWS_AS(picard_solve(problem, c), ValidationError);

  PicardOptions opt;
  opt.max_iters = 0;
  CHECK_THROWS_AS(picard_solve(problem, problem.equilibrium_signal(), opt), ValidationError);
}

TEST_CASE("halving the horizon lowers the mean contraction ratio") {
  const auto sc = load_scenario(oracle::source_path("scenarios/single_pipe.json"));
  auto spec = sc.problem;
  spec.picard.tol = 1e-13;
  const Problem full(spec);
  const ControlSignal control = build_control(sc, full);
  double last = 1.0;
  for (Index halvings = 0; halvings <= 3; ++halvings) {
    // Same tau, same control restricted to the shorter window.
    const Index steps = full.time().steps >> halvings;
    const Problem problem = full.with_time({full.time().step() * static_cast<double>(steps), steps});
    const ControlSignal part{problem.time(), control.values.topRows(steps + 1)};
    const auto traj = picard_solve(problem, part);
    const double mean = traj.mean_ratio();
    CHECK(mean < last);
    last = mean;
  }
}

TEST_CASE("constraint monitor") {
  Grid grid;
  PipeGrid g;
  g.intervals = 4;
  g.offset = 0;
  grid.pipes.push_back(g);
  grid.size = 10;
  ConstraintBounds b{Vector::Zero(10), Vector::Ones(10)};
  Vector v = Vector::Constant(10, 0.5);
  v[1] = 1.0 + 1e-3;  // pressure node 1 above the upper face
  v[7] = 1e-9;        // flux node 2 inside the active tolerance of the lower face
  const auto rep = constraint_monitor(grid, {v}, b, 1e-6);
  CHECK_FALSE(rep.feasible);
  CHECK(rep.worst_violation == doctest::Approx(1e-3));
  REQUIRE(rep.active.size() == 2);
  CHECK(rep.active[0].node == 1);
  CHECK(rep.active[0].face == 1);
  CHECK(rep.active[1].component == 1);
  CHECK(rep.active[1].face == -1);
}
