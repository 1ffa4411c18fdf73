#include "gasnet/optimize.hpp"

#include "gasnet/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace gasnet {

namespace {

double time_weight(Index j, Index steps, double tau) { return j == steps ? 0.5 * tau : tau; }

void check_target(const Target& target, const Problem& problem) {
  const Index M = problem.time().steps;
  const auto n = target.states.size();
  if (n != 1 && n != static_cast<std::size_t>(M + 1))
    throw ValidationError("target must be constant or have one state per time sample");
  for (const auto& s : target.states) {
    if (s.size() != problem.model().size()) throw ValidationError("target state has the wrong size");
    if (!s.allFinite()) throw ValidationError("target contains non-finite values");
  }
}

void check_config(const CostConfig& config) {
  if (!(config.sigma > 0.0)) throw ValidationError("sigma must be positive");
  if (!(config.penalty.rho0 > 0.0)) throw ValidationError("penalty.rho0 must be positive");
  if (!(config.penalty.factor > 1.0)) throw ValidationError("penalty.factor must exceed 1");
  if (!(config.penalty.rho_max >= config.penalty.rho0)) throw ValidationError("penalty.rho_max must be at least rho0");
  if (config.optimizer.max_iters < 0) throw ValidationError("optimizer.max_iters must be nonnegative");
  if (!(config.optimizer.tol >= 0.0)) throw ValidationError("optimizer.tol must be nonnegative");
  if (!(config.optimizer.armijo_c > 0.0 && config.optimizer.armijo_c < 1.0))
    throw ValidationError("optimizer.armijo_c must lie in (0, 1)");
}

IterationRecord make_record(int iteration, int stage, const Evaluation& e, const ControlSpace& space,
                            const ConstraintBounds& bounds) {
  IterationRecord r;
  r.iteration = iteration;
  r.stage = stage;
  r.rho = e.rho;
  r.cost = e.cost();
  r.penalized = e.penalized();
  r.penalty = e.penalty;
  r.gradient_norm = space.norm(e.gradient);
  double margin = std::numeric_limits<double>::infinity();
  for (const auto& v : e.trajectory.states)
    margin = std::min({margin, (v - bounds.lower).minCoeff(), (bounds.upper - v).minCoeff()});
  r.min_margin = margin;
  r.picard_iters = e.trajectory.iterations;
  for (double d : e.trajectory.ratios) r.max_contraction = std::max(r.max_contraction, d);
  return r;
}

}  // namespace

Objective::Objective(const Problem& problem, const CostConfig& config, ConstraintBounds bounds)
    : problem_(&problem), config_(config), bounds_(std::move(bounds)) {
  check_config(config_);
  check_target(config_.target, problem);
  const auto& grid = problem.grid();
  if (bounds_.lower.size() != grid.size || bounds_.upper.size() != grid.size)
    throw ValidationError("constraint bounds have the wrong size");
  space_weights_.resize(grid.size);
  for (const auto& g : grid.pipes)
    for (Index i = 0; i <= g.intervals; ++i) {
      space_weights_[g.p(i)] = g.weights[i];
      space_weights_[g.q(i)] = g.weights[i];
    }
}

double Objective::penalty(const Trajectory& trajectory, double rho) const {
  if (rho == 0.0) return 0.0;
  double sum = 0.0;
  for (Index j = 1; j <= trajectory.steps; ++j) {
    const Vector& v = trajectory.states[j];
    const Vector viol = (bounds_.lower - v).cwiseMax(v - bounds_.upper).cwiseMax(0.0);
    sum += time_weight(j, trajectory.steps, trajectory.step) * space_weights_.dot(viol.cwiseAbs2());
  }
  return rho * sum;
}

std::vector<Vector> Objective::penalty_sources(const Trajectory& trajectory, double rho) const {
  std::vector<Vector> g(static_cast<std::size_t>(trajectory.steps + 1), Vector::Zero(space_weights_.size()));
  if (rho == 0.0) return g;
  for (Index j = 1; j <= trajectory.steps; ++j) {
    const Vector& v = trajectory.states[j];
    const double w = 2.0 * rho * time_weight(j, trajectory.steps, trajectory.step);
    for (Index i = 0; i < v.size(); ++i) {
      if (v[i] < bounds_.lower[i]) g[j][i] = -w * space_weights_[i] * (bounds_.lower[i] - v[i]);
      else if (v[i] > bounds_.upper[i]) g[j][i] = w * space_weights_[i] * (v[i] - bounds_.upper[i]);
    }
  }
  return g;
}

double Objective::multiplier(Index sample, Index index, double violation, double rho) const {
  if (!(violation > 0.0) || sample == 0) return 0.0;
  const auto& time = problem_->time();
  return 2.0 * rho * time_weight(sample, time.steps, time.step()) * space_weights_[index] * violation;
}

Evaluation Objective::evaluate(const Matrix& reduced, double rho, bool with_gradient) const {
  const auto& problem = *problem_;
  const auto& space = problem.controls();
  space.check_shape(reduced);
  if (reduced.row(0).cwiseAbs().maxCoeff() != 0.0)
    throw ValidationError("reduced control must vanish at t = 0");
  Evaluation e;
  e.reduced = space.mask(reduced);
  e.control = space.full(e.reduced);
  e.rho = rho;
  e.trajectory = picard_solve(problem, e.control);
  if (e.trajectory.truncated)
    throw SolverError(SolverError::Kind::HorizonLimited,
                      "forward solve left the r-ball after t = " + std::to_string(e.trajectory.horizon()));
  const auto& model = problem.model();
  e.tracking = tracking_cost(model, e.trajectory, config_.target);
  e.regularization = 0.5 * config_.sigma * space.inner(e.reduced, e.reduced);
  e.penalty = penalty(e.trajectory, rho);
  e.gradient = space.zero();
  if (with_gradient) {
    const Linearization lin(problem, e.trajectory, e.control);
    std::vector<Vector> sources = tracking_sources(model, e.trajectory, config_.target);
    const std::vector<Vector> extra = penalty_sources(e.trajectory, rho);
    for (std::size_t j = 0; j < sources.size(); ++j) sources[j] += extra[j];
    const AdjointTrajectory adj = lin.adjoint(sources);
    e.gradient = space.riesz(lin.pairing(adj, sources)) + config_.sigma * e.reduced;
    e.has_gradient = true;
  }
  return e;
}

double cost(const Problem& problem, const ControlSignal& control, const CostConfig& config) {
  const Objective obj(problem, config, problem.bounds());
  return obj.evaluate(problem.controls().reduced(control), 0.0, false).cost();
}

Matrix riesz_gradient(const Problem& problem, const ControlSignal& control, const CostConfig& config) {
  const Objective obj(problem, config, problem.bounds());
  return obj.evaluate(problem.controls().reduced(control), 0.0, true).gradient;
}

Matrix random_reduced_control(const ControlSpace& space, std::mt19937_64& rng, double fraction) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index M = space.time().steps;
  const double T = space.time().horizon;
  Matrix r = space.zero();
  for (Index s = 0; s < space.slots(); ++s) {
    if (!space.active()[static_cast<std::size_t>(s)]) continue;
    for (int m = 1; m <= 3; ++m) {
      const double a = normal(rng) / m;
      const double omega = (m - 0.5) * M_PI / T;
      for (Index j = 1; j <= M; ++j) r(j, s) += a * std::sin(omega * space.time().time(j));
    }
  }
  const double h2 = space.norm(r);
  const double sup = space.sup_norm(r);
  if (h2 == 0.0 || sup == 0.0) return r;
  return (fraction * std::min(space.eta() / h2, space.kappa_u() / sup)) * r;
}

const char* to_string(OptimizationStatus status) {
  switch (status) {
    case OptimizationStatus::Converged: return "converged";
    case OptimizationStatus::MaxIterations: return "max_iterations";
    case OptimizationStatus::LineSearchStalled: return "line_search_stalled";
    case OptimizationStatus::HorizonLimited: return "horizon-limited";
  }
  return "unknown";
}

bool target_interior(const Target& target, const ConstraintBounds& bounds, Index steps) {
  const std::size_t n = target.states.size() == 1 ? 1 : static_cast<std::size_t>(steps + 1);
  for (std::size_t j = 0; j < n; ++j) {
    const Vector& v = target.states[j];
    if ((v - bounds.lower).minCoeff() <= 0.0 || (bounds.upper - v).minCoeff() <= 0.0) return false;
  }
  return true;
}

double kkt_residual(const Objective& objective, const Evaluation& at, std::uint64_t seed, int samples,
                    double* rzk_margin) {
  if (!at.has_gradient) throw ValidationError("kkt_residual needs an evaluation with gradient");
  const auto& problem = objective.problem();
  const auto& space = problem.controls();
  const auto& bounds = objective.bounds();
  const Linearization lin(problem, at.trajectory, at.control);
  std::vector<double> values(static_cast<std::size_t>(std::max(samples, 0)));
  std::vector<double> margins(values.size());
  parallel_for(values.size(), [&](std::size_t i) {
    std::seed_seq seq{static_cast<std::uint64_t>(seed), static_cast<std::uint64_t>(i)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Matrix phi = random_reduced_control(space, rng, unit(rng));
    const Matrix d = phi - at.reduced;
    values[i] = space.inner(at.gradient, d);
    const SensitivityTrajectory sens = lin.solve(d);
    double m = std::numeric_limits<double>::infinity();
    for (Index j = 0; j <= at.trajectory.steps; ++j) {
      const Vector v = at.trajectory.states[j] + sens.derivative[j];
      m = std::min({m, (v - bounds.lower).minCoeff(), (bounds.upper - v).minCoeff()});
    }
    margins[i] = m;
  });
  double worst = 0.0;
  for (double v : values) worst = std::min(worst, v);
  if (rzk_margin) {
    double best = -std::numeric_limits<double>::infinity();
    for (double m : margins) best = std::max(best, m);
    *rzk_margin = margins.empty() ? 0.0 : best;
  }
  return worst;
}

namespace {

/// Two-loop recursion: inverse Hessian approximation applied to g.
Matrix lbfgs_apply(const ControlSpace& space, const std::deque<std::pair<Matrix, Matrix>>& pairs, const Matrix& g) {
  Matrix r = g;
  std::vector<double> a(pairs.size());
  for (std::size_t i = pairs.size(); i-- > 0;) {
    const auto& [s, y] = pairs[i];
    a[i] = space.inner(s, r) / space.inner(s, y);
    r -= a[i] * y;
  }
  const auto& [s_new, y_new] = pairs.back();
  r *= space.inner(s_new, y_new) / space.inner(y_new, y_new);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& [s, y] = pairs[i];
    const double b = space.inner(y, r) / space.inner(s, y);
    r += (a[i] - b) * s;
  }
  return r;
}

}  // namespace

OptimizationReport optimize(const Problem& problem, const CostConfig& config, std::uint64_t seed) {
  return optimize(problem, config, problem.bounds(), seed);
}

OptimizationReport optimize(const Problem& problem, const CostConfig& config, const ConstraintBounds& bounds,
                            std::uint64_t seed) {
  const Objective obj(problem, config, bounds);
  const auto& space = problem.controls();
  const auto& opts = config.optimizer;

  OptimizationReport report;
  report.target_interior = target_interior(config.target, bounds, problem.time().steps);

  Matrix x = space.zero();
  double rho = config.penalty.rho0;
  Evaluation cur = obj.evaluate(x, rho, true);
  report.initial_cost = cur.cost();
  int stage = 0;
  report.history.push_back(make_record(0, stage, cur, space, bounds));

  const bool use_cg = opts.direction == SearchDirection::ConjugateGradient;
  const bool use_lbfgs = opts.direction == SearchDirection::LBFGS;
  while (true) {
    bool have_prev = false;
    bool restart = true;
    Matrix prev_x, prev_g, dir;
    std::deque<std::pair<Matrix, Matrix>> pairs;  // (s, y), newest last
    double alpha_prev = 0.0;
    double slope_prev = 0.0;
    for (int it = 0;; ++it) {
      const double pg = space.norm(x - space.project_feasible(x - cur.gradient));
      if (pg <= opts.tol) {
        report.status = OptimizationStatus::Converged;
        break;
      }
      if (it >= opts.max_iters) {
        report.status = OptimizationStatus::MaxIterations;
        break;
      }
      const Matrix& g = cur.gradient;
      const double gg = space.inner(g, g);
      if (restart) pairs.clear();
      if (use_lbfgs && !pairs.empty()) {
        dir = -lbfgs_apply(space, pairs, g);
      } else if (use_cg && !restart) {
        const double beta = std::max(0.0, space.inner(g, g - prev_g) / space.inner(prev_g, prev_g));
        dir = -g + beta * dir;
      } else {
        dir = -g;
      }
      if (!(space.inner(g, dir) < -1e-3 * std::sqrt(gg * space.inner(dir, dir)))) {
        dir = -g;
        pairs.clear();
      }
      const double dir_slope = space.inner(g, dir);
      double alpha;
      if (!have_prev) {
        alpha = 0.1 * std::min(space.eta() / space.norm(dir), space.kappa_u() / space.sup_norm(dir));
      } else if (use_lbfgs && !pairs.empty()) {
        alpha = 1.0;
      } else if (use_cg) {
        alpha = alpha_prev * slope_prev / dir_slope;
      } else {
        const Matrix s = x - prev_x;
        const Matrix y = g - prev_g;
        const double sy = space.inner(s, y);
        alpha = sy > 0.0 ? space.inner(s, s) / sy : 2.0 * alpha_prev;
      }

      bool accepted = false;
      int horizon_failures = 0;
      int tries = 0;
      double slope = 0.0;
      Matrix cand;
      Evaluation next;
      for (; tries < opts.max_backtracks; ++tries, alpha *= 0.5) {
        cand = space.project_feasible(x + alpha * dir);
        slope = space.inner(g, cand - x);
        if (!(slope < 0.0)) continue;
        try {
          next = obj.evaluate(cand, rho, false);
        } catch (const SolverError&) {
          ++horizon_failures;
          continue;
        }
        if (next.penalized() <= cur.penalized() + opts.armijo_c * slope && next.penalized() <= cur.penalized()) {
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        report.status = horizon_failures == tries ? OptimizationStatus::HorizonLimited
                                                  : OptimizationStatus::LineSearchStalled;
        break;
      }

      // Refine with the minimizer of the quadratic through J(0), J'(0) and J(alpha).
      bool clipped = space.norm(cand - (x + alpha * dir)) > 0.0;
      for (int refine = 0; refine < 4 && !clipped; ++refine) {
        const double curvature = next.penalized() - cur.penalized() - alpha * dir_slope;
        if (!(curvature > 0.0)) break;
        const double alpha_q = -dir_slope * alpha * alpha / (2.0 * curvature);
        if (!(alpha_q > 0.1 * alpha && alpha_q < 10.0 * alpha) || std::abs(alpha_q - alpha) <= 0.02 * alpha) break;
        const Matrix cand_q = space.project_feasible(x + alpha_q * dir);
        const double slope_q = space.inner(g, cand_q - x);
        try {
          Evaluation trial = obj.evaluate(cand_q, rho, false);
          if (!(slope_q < 0.0 && trial.penalized() < next.penalized() &&
                trial.penalized() <= cur.penalized() + opts.armijo_c * slope_q))
            break;
          next = std::move(trial);
          cand = cand_q;
          alpha = alpha_q;
          slope = slope_q;
          clipped = space.norm(cand - (x + alpha * dir)) > 0.0;
        } catch (const SolverError&) {
          break;
        }
      }

      next = obj.evaluate(cand, rho, true);
      prev_x = x;
      prev_g = cur.gradient;
      have_prev = true;
      restart = clipped;
      if (use_lbfgs && !clipped) {
        Matrix step = cand - x;
        Matrix change = next.gradient - cur.gradient;
        if (space.inner(step, change) > 1e-12 * space.norm(step) * space.norm(change)) {
          pairs.emplace_back(std::move(step), std::move(change));
          if (static_cast<int>(pairs.size()) > std::max(1, opts.memory)) pairs.pop_front();
        }
      }
      alpha_prev = alpha;
      slope_prev = dir_slope;
      auto record = make_record(++report.iterations, stage, next, space, bounds);
      record.step = alpha;
      record.step_norm = space.norm(cand - x);
      record.backtracks = tries;
      report.history.push_back(record);
      x = cand;
      cur = std::move(next);
    }
    if (cur.penalty == 0.0 || rho >= config.penalty.rho_max || report.status == OptimizationStatus::HorizonLimited)
      break;
    rho = std::min(rho * config.penalty.factor, config.penalty.rho_max);
    ++stage;
    cur = obj.evaluate(x, rho, true);
    report.history.push_back(make_record(report.iterations, stage, cur, space, bounds));
  }

  report.margins = constraint_monitor(problem.grid(), cur.trajectory.states, bounds, config.tol_active);
  auto& kkt = report.kkt;
  kkt.gradient_norm = space.norm(cur.gradient);
  for (const auto& a : report.margins.active) {
    const auto& g = problem.grid().pipes[a.pipe];
    const Index idx = a.component == 0 ? g.p(a.node) : g.q(a.node);
    Multiplier m{a.sample, a.pipe, a.node, a.component, a.face, a.margin,
                 obj.multiplier(a.sample, idx, -a.margin, rho)};
    kkt.complementarity += m.value * std::abs(m.margin);
    kkt.multipliers.push_back(m);
  }
  kkt.vi_residual = kkt_residual(obj, cur, seed, config.kkt_samples, &kkt.rzk_margin);
  report.final = std::move(cur);
  return report;
}

std::vector<HomotopyRun> delta_homotopy(const Problem& problem, const CostConfig& config,
                                        const std::vector<double>& deltas, std::uint64_t seed) {
  return delta_homotopy(problem, config, problem.bounds(), deltas, seed);
}

std::vector<HomotopyRun> delta_homotopy(const Problem& problem, const CostConfig& config,
                                        const ConstraintBounds& box, const std::vector<double>& deltas,
                                        std::uint64_t seed) {
  std::vector<HomotopyRun> runs;
  for (double delta : deltas) {
    HomotopyRun run;
    run.delta = delta;
    try {
      const ConstraintBounds bounds = box.perturbed(problem.equilibrium(), delta);
      run.report = optimize(problem, config, bounds, seed);
      run.report.delta = delta;
      run.ok = true;
    } catch (const Error& e) {
      run.error = e.what();
    }
    runs.push_back(std::move(run));
  }
  return runs;
}

}  // namespace gasnet
