#include "gasnet/verify.hpp"

#include "gasnet/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace gasnet {

namespace {

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{seed, stream};
  return std::mt19937_64(seq);
}

/// Random state with pressure and flux parts of comparable weighted size.
Vector random_state(const DiscreteModel& model, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double c = model.topology().constants.sound_speed;
  Vector x(model.size());
  for (const auto& g : model.grid().pipes)
    for (Index i = 0; i <= g.intervals; ++i) {
      x[g.p(i)] = normal(rng);
      x[g.q(i)] = normal(rng) / c;
    }
  return x;
}

std::string sci(double v) {
  std::ostringstream out;
  out.precision(3);
  out << std::scientific << v;
  return out.str();
}

CheckResult below(std::string name, double value, double threshold, std::string detail = {}) {
  return CheckResult{std::move(name), value <= threshold, value, threshold, std::move(detail)};
}

}  // namespace

double skew_defect(const DiscreteModel& model, std::uint64_t seed, int samples) {
  auto rng = make_rng(seed, 1);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const Vector z = model.projector() * random_state(model, rng);
    const double zz = model.inner(z, z);
    if (zz > 0.0) worst = std::max(worst, std::abs(model.inner(model.skew_operator() * z, z)) / zz);
  }
  return worst;
}

double projector_defect(const DiscreteModel& model, std::uint64_t seed, int samples) {
  auto rng = make_rng(seed, 2);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const Vector x = random_state(model, rng);
    const Vector px = model.projector() * x;
    const double nx = model.norm(x);
    if (nx > 0.0) worst = std::max(worst, model.norm(model.projector() * px - px) / nx);
  }
  return worst;
}

LipschitzSample lipschitz_sample(const Problem& problem, std::uint64_t seed, int pairs) {
  const auto& model = problem.model();
  const auto& topo = problem.topology();
  LipschitzSample out;
  for (std::size_t k = 0; k < topo.num_pipes(); ++k) {
    const auto& b = problem.box().pipes[k];
    out.bound = std::max(out.bound, friction_lipschitz_bound(topo.pipes[k].params.beta, topo.constants.sound_speed,
                                                             b.p_lo, b.p_hi, b.q_lo, b.q_hi));
  }
  auto rng = make_rng(seed, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto& lo = problem.bounds().lower;
  const auto& hi = problem.bounds().upper;
  for (int s = 0; s < pairs; ++s) {
    Vector w1(model.size()), w2(model.size());
    for (Index i = 0; i < model.size(); ++i) {
      w1[i] = lo[i] + unit(rng) * (hi[i] - lo[i]);
      w2[i] = lo[i] + unit(rng) * (hi[i] - lo[i]);
    }
    const double d = model.norm(w1 - w2);
    if (d > 0.0) out.max_ratio = std::max(out.max_ratio, model.norm(model.nonlinearity(w1) - model.nonlinearity(w2)) / d);
  }
  return out;
}

double steady_ode_residual(const SteadyState& steady, int points_per_pipe) {
  double worst = 0.0;
  for (std::size_t k = 0; k < steady.num_pipes(); ++k) {
    const auto& pipe = steady.pipes[k];
    const double q = steady.q_e[k];
    const double L = pipe.length;
    const double d = 2e-3 * L;
    const auto p = [&](double x) { return steady_pressure_profile(pipe, steady.p_in[k], q, x); };
    for (int i = 0; i < points_per_pipe; ++i) {
      const double x = 2.0 * d + (L - 4.0 * d) * (static_cast<double>(i) + 0.5) / points_per_pipe;
      const double dp = (-p(x + 2 * d) + 8 * p(x + d) - 8 * p(x - d) + p(x - 2 * d)) / (12 * d);
      const double px = p(x);
      const double rhs = -pipe.gamma * px - pipe.beta * q * std::abs(q) / px;
      const double scale = std::abs(pipe.gamma * px) + pipe.beta * q * q / px + std::abs(dp);
      if (scale > 0.0) worst = std::max(worst, std::abs(dp - rhs) / scale);
    }
  }
  return worst;
}

double gradient_fd_error(const Objective& objective, const Matrix& reduced, const Matrix& direction,
                         double epsilon) {
  const Evaluation base = objective.evaluate(reduced, 0.0, true);
  const double analytic = objective.problem().controls().inner(base.gradient, direction);
  const double plus = objective.evaluate(reduced + epsilon * direction, 0.0, false).cost();
  const double minus = objective.evaluate(reduced - epsilon * direction, 0.0, false).cost();
  const double fd = (plus - minus) / (2.0 * epsilon);
  const double scale = std::max(std::abs(fd), std::abs(analytic));
  return scale > 0.0 ? std::abs(fd - analytic) / scale : 0.0;
}

std::vector<CheckResult> run_verify(const Problem& problem, const CostConfig& config,
                                    const VerifyOptions& options) {
  const auto& model = problem.model();
  const auto& space = problem.controls();
  std::vector<CheckResult> results;

  results.push_back(below("skew_adjointness", skew_defect(model, options.seed, options.samples), 1e-12,
                          "max |(A_h z, z)_M| / ||z||_M^2"));
  results.push_back(below("projector_idempotence", projector_defect(model, options.seed, options.samples), 1e-12,
                          "max ||Pi^2 x - Pi x||_M / ||x||_M"));

  // Green identity on random (Phi, h, v_d).
  {
    std::vector<double> residuals(static_cast<std::size_t>(options.green_instances));
    parallel_for(residuals.size(), [&](std::size_t i) {
      auto rng = make_rng(options.seed, 100 + i);
      const ControlSignal phi = space.full(random_reduced_control(space, rng, 0.5));
      const Matrix h = random_reduced_control(space, rng, 1.0);
      const Trajectory base = picard_solve(problem, phi);
      if (base.truncated) throw SolverError(SolverError::Kind::HorizonLimited, "green check: base solve truncated");
      std::normal_distribution<double> normal(0.0, 1.0);
      Vector vd = problem.equilibrium();
      const Vector width = problem.bounds().upper - problem.bounds().lower;
      for (Index k = 0; k < vd.size(); ++k) vd[k] += 1e-3 * width[k] * normal(rng);
      residuals[i] = green_identity_residual(problem, phi, h, base, Target::constant(vd));
    });
    results.push_back(below("green_identity", *std::max_element(residuals.begin(), residuals.end()), 1e-10,
                            std::to_string(options.green_instances) + " random instances"));
  }

  // Gradient against central finite differences.
  {
    const Objective objective(problem, config, problem.bounds());
    const auto n = static_cast<std::size_t>(options.fd_controls * options.fd_directions);
    std::vector<double> errors(n);
    parallel_for(n, [&](std::size_t i) {
      auto rng = make_rng(options.seed, 200 + i / static_cast<std::size_t>(options.fd_directions));
      const Matrix phi = random_reduced_control(space, rng, 0.5);
      auto rng_h = make_rng(options.seed, 1000 + i);
      const Matrix h = random_reduced_control(space, rng_h, 0.4);
      errors[i] = gradient_fd_error(objective, phi, h, options.fd_epsilon);
    });
    results.push_back(below("gradient_fd", *std::max_element(errors.begin(), errors.end()), 1e-4,
                            std::to_string(n) + " (control, direction) pairs, eps " + sci(options.fd_epsilon)));
  }

  {
    const LipschitzSample lip = lipschitz_sample(problem, options.seed, options.lipschitz_pairs);
    results.push_back(CheckResult{"lipschitz_bound", lip.max_ratio <= lip.bound, lip.max_ratio, lip.bound,
                                  "sampled ratio vs analytic bound"});
  }

  results.push_back(below("steady_state_ode", steady_ode_residual(problem.steady()), 1e-7,
                          "relative residual of p' = -gamma p - beta q|q|/p"));
  return results;
}

}  // namespace gasnet
