#include "gasnet/forward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace gasnet {

namespace {

constexpr double eps = std::numeric_limits<double>::epsilon();

SparseMatrix identity(Index n) {
  SparseMatrix I(n, n);
  I.setIdentity();
  return I;
}

void check_control(const Problem& problem, const ControlSignal& control) {
  const auto& space = problem.controls();
  space.check_shape(control.values);
  if (control.time.steps != problem.time().steps || control.time.horizon != problem.time().horizon)
    throw ValidationError("control time grid does not match the problem time grid");
  const Vector& phi_e = problem.equilibrium_control();
  if (control.values.row(0).transpose() != phi_e)
    throw ValidationError("control must equal the equilibrium control at t = 0");
  for (Index s = 0; s < space.slots(); ++s)
    if (!space.active()[static_cast<std::size_t>(s)] && control.values.col(s).cwiseAbs().maxCoeff() != 0.0)
      throw ValidationError("control slot " + std::to_string(s + 1) + " is not a boundary slot and must be zero");
  if (problem.spec().enforce_control_bounds && !space.admissible(space.reduced(control))) {
    std::ostringstream msg;
    msg.precision(17);
    const Matrix r = space.reduced(control);
    msg << "control not admissible: H2 norm " << space.norm(r) << " (eta " << space.eta() << "), sup norm "
        << space.sup_norm(r) << " (kappa_u " << space.kappa_u() << ")";
    throw ValidationError(msg.str());
  }
}

double gronwall_next(double b, double tau, double gamma, double forcing_norm) {
  return (b * (1.0 + 0.5 * tau * gamma) + tau * forcing_norm) / (1.0 - 0.5 * tau * gamma);
}

void factor(Eigen::SparseLU<SparseMatrix>& lu, const SparseMatrix& a) {
  lu.analyzePattern(a);
  lu.factorize(a);
  if (lu.info() != Eigen::Success)
    throw SolverError(SolverError::Kind::LinearBreakdown, "midpoint system factorization failed: " + lu.lastErrorMessage());
}

}  // namespace

MidpointPropagator::MidpointPropagator(const SparseMatrix& K, double tau, bool transposed) {
  const SparseMatrix I = identity(K.rows());
  explicit_ = I + 0.5 * tau * K;
  const SparseMatrix implicit = I - 0.5 * tau * K;
  factor(lu_, implicit);
  if (transposed) {
    factor(lu_transposed_, SparseMatrix(implicit.transpose()));
    has_transposed_ = true;
  }
}

Vector MidpointPropagator::step(const Vector& y, const Vector& rhs) const {
  Vector out = lu_.solve(explicit_ * y + rhs);
  if (!out.allFinite()) throw SolverError(SolverError::Kind::LinearBreakdown, "midpoint solve produced non-finite values");
  return out;
}

Vector MidpointPropagator::solve_transposed(const Vector& b) const {
  if (!has_transposed_) throw Error("MidpointPropagator: transposed system was not factored");
  Vector out = lu_transposed_.solve(b);
  if (!out.allFinite())
    throw SolverError(SolverError::Kind::LinearBreakdown, "transposed midpoint solve produced non-finite values");
  return out;
}

LinearSolution linear_solve(const DiscreteModel& model, const Vector& u0, const std::vector<Vector>& forcing,
                            double tau) {
  const MidpointPropagator prop(model.reduced_operator(), tau);
  const double gamma = model.source_bound();
  LinearSolution out;
  Vector y = model.restriction() * u0;
  double bound = model.reduced_norm(y);
  out.states.push_back(model.basis() * y);
  for (std::size_t n = 0; n < forcing.size(); ++n) {
    const Vector f = model.restriction() * forcing[n];
    try {
      y = prop.step(y, tau * f);
    } catch (const SolverError& e) {
      throw SolverError(e.kind(), std::string(e.what()) + " at step " + std::to_string(n));
    }
    bound = gronwall_next(bound, tau, gamma, model.reduced_norm(f));
    const double norm = model.reduced_norm(y);
    if (bound > 0.0) out.continuity_ratio = std::max(out.continuity_ratio, norm / bound);
    out.states.push_back(model.basis() * y);
  }
  return out;
}

double Trajectory::max_kirchhoff() const {
  double m = 0.0;
  for (const auto& s : samples) m = std::max(m, s.kirchhoff_max);
  return m;
}

double Trajectory::max_pressure_gap() const {
  double m = 0.0;
  for (const auto& s : samples) m = std::max(m, s.pressure_gap);
  return m;
}

double Trajectory::max_deviation(const Vector& reference) const {
  double m = 0.0;
  for (const auto& v : states) m = std::max(m, (v - reference).cwiseAbs().maxCoeff());
  return m;
}

double Trajectory::mean_ratio() const {
  if (ratios.empty()) return 0.0;
  double sum = 0.0;
  for (double r : ratios) sum += r;
  return sum / static_cast<double>(ratios.size());
}

Trajectory picard_solve(const Problem& problem, const ControlSignal& control) {
  return picard_solve(problem, control, problem.spec().picard);
}

Trajectory picard_solve(const Problem& problem, const ControlSignal& control, const PicardOptions& options) {
  check_control(problem, control);
  const double threshold = problem.rball_threshold();
  if (!(threshold > 0.0))
    throw SolverError(SolverError::Kind::Precondition, "precondition violated: c1*kappa_u must be below r");
  if (options.max_iters < 1) throw ValidationError("picard.max_iters must be at least 1");

  const auto& model = problem.model();
  const Index M = problem.time().steps;
  const double tau = problem.time().step();
  const Vector& v_e = problem.equilibrium();
  const SparseMatrix& R = model.restriction();
  const SparseMatrix& E = model.basis();
  const SparseMatrix RC = R * (model.boundary_operator() + model.source() * model.lift());
  const SparseMatrix RB1 = R * model.lift();

  std::vector<Vector> lift(M + 1);
  for (Index j = 0; j <= M; ++j) lift[j] = model.lift() * control.sample(j);
  std::vector<Vector> boundary_rhs(M);
  for (Index n = 0; n < M; ++n) {
    const Vector mid = 0.5 * (control.sample(n) + control.sample(n + 1));
    boundary_rhs[n] = tau * (RC * mid) - RB1 * (control.sample(n + 1) - control.sample(n));
  }

  const MidpointPropagator prop(model.reduced_operator(), tau);
  const Vector y0 = R * (v_e - lift[0]);

  Trajectory traj;
  traj.step = tau;
  traj.steps = M;
  traj.requested_horizon = problem.time().horizon;

  std::vector<Vector> prev(M + 1, v_e);
  std::vector<Vector> next(M + 1), reduced(M + 1);
  std::vector<double> local_prev(M + 1, 0.0), local_last(M + 1, 0.0);
  double last_increment = -1.0;
  int non_contracting = 0;
  const double gamma = model.source_bound();

  for (int iter = 1; iter <= options.max_iters; ++iter) {
    Index steps = traj.steps;
    reduced[0] = y0;
    next[0] = E * y0 + lift[0];
    double bound = model.reduced_norm(y0);
    double continuity = 0.0;
    Index cutoff = steps;
    for (Index n = 0; n < steps; ++n) {
      const Vector f = R * model.nonlinearity(0.5 * (prev[n] + prev[n + 1]));
      const Vector rhs = boundary_rhs[n] + tau * f;
      reduced[n + 1] = prop.step(reduced[n], rhs);
      next[n + 1] = E * reduced[n + 1] + lift[n + 1];
      bound = gronwall_next(bound, tau, gamma, model.reduced_norm(rhs / tau));
      if (bound > 0.0) continuity = std::max(continuity, model.reduced_norm(reduced[n + 1]) / bound);
      if ((next[n + 1] - v_e).cwiseAbs().maxCoeff() >= threshold) {
        cutoff = n;
        break;
      }
    }
    bool restarted = false;
    if (cutoff < steps) {
      traj.truncated = true;
      traj.steps = cutoff;
      steps = cutoff;
      restarted = true;
    }

    double increment = 0.0;
    double scale = 0.0;
    for (Index j = 0; j <= steps; ++j) {
      local_prev[j] = local_last[j];
      local_last[j] = model.norm(next[j] - prev[j]);
      increment = std::max(increment, local_last[j]);
      scale = std::max(scale, model.norm(next[j]));
    }
    traj.increments.push_back(increment);
    if (last_increment > 0.0 && !restarted) {
      const double ratio = increment / last_increment;
      traj.ratios.push_back(ratio);
      non_contracting = ratio >= 1.0 ? non_contracting + 1 : 0;
      if (non_contracting >= 3)
        throw SolverError(SolverError::Kind::ContractionFailure, "contraction failure; reduce T or κ_U");
    } else {
      non_contracting = 0;
    }
    last_increment = restarted ? -1.0 : increment;
    for (Index j = 0; j <= steps; ++j) prev[j] = next[j];
    traj.iterations = iter;
    traj.continuity_ratio = continuity;

    if (!restarted && (increment <= options.tol || increment <= 100.0 * eps * scale)) {
      const Index kept = steps + 1;
      traj.states.assign(prev.begin(), prev.begin() + kept);
      traj.reduced.assign(reduced.begin(), reduced.begin() + kept);
      traj.samples.resize(static_cast<std::size_t>(kept));
      for (Index j = 0; j < kept; ++j) {
        auto& s = traj.samples[static_cast<std::size_t>(j)];
        const Vector& v = traj.states[static_cast<std::size_t>(j)];
        const Vector kr = model.kirchhoff_residual(v);
        const Vector pg = model.pressure_continuity_residual(v);
        s.kirchhoff_max = kr.size() ? kr.cwiseAbs().maxCoeff() : 0.0;
        s.pressure_gap = pg.size() ? pg.maxCoeff() : 0.0;
        s.rball_distance = (v - v_e).cwiseAbs().maxCoeff();
        s.box_margin = std::min((v - problem.bounds().lower).minCoeff(), (problem.bounds().upper - v).minCoeff());
        const double floor = 1e3 * eps * model.norm(v);
        s.contraction = local_prev[j] > floor ? local_last[j] / local_prev[j] : 0.0;
      }
      return traj;
    }
  }
  throw SolverError(SolverError::Kind::ContractionFailure,
                    "Picard iteration did not converge within " + std::to_string(options.max_iters) +
                        " iterations; reduce T or κ_U");
}

Vector kirchhoff_residual(const DiscreteModel& model, const Vector& state) { return model.kirchhoff_residual(state); }

Vector pressure_continuity_residual(const DiscreteModel& model, const Vector& state) {
  return model.pressure_continuity_residual(state);
}

MarginReport constraint_monitor(const Grid& grid, const std::vector<Vector>& states, const ConstraintBounds& bounds,
                                double tol_active) {
  MarginReport report;
  report.min_margin = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < states.size(); ++j) {
    const Vector& v = states[j];
    for (std::size_t k = 0; k < grid.pipes.size(); ++k) {
      const auto& g = grid.pipes[k];
      for (Index i = 0; i <= g.intervals; ++i) {
        for (int comp = 0; comp < 2; ++comp) {
          const Index idx = comp == 0 ? g.p(i) : g.q(i);
          const double width = bounds.upper[idx] - bounds.lower[idx];
          const double lo = v[idx] - bounds.lower[idx];
          const double hi = bounds.upper[idx] - v[idx];
          report.min_margin = std::min({report.min_margin, lo, hi});
          for (int face : {-1, 1}) {
            const double margin = face < 0 ? lo : hi;
            if (margin < 0.0) report.worst_violation = std::max(report.worst_violation, -margin);
            if (margin < -tol_active * width) report.feasible = false;
            if (margin <= tol_active * width)
              report.active.push_back({static_cast<Index>(j), k, i, comp, face, margin});
          }
        }
      }
    }
  }
  if (states.empty()) report.min_margin = 0.0;
  return report;
}

}  // namespace gasnet
