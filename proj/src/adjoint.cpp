#include "gasnet/adjoint.hpp"

#include <algorithm>
#include <cmath>

namespace gasnet {

namespace {

/// Largest weighted norm over nodes of the 2x2 blocks [[0,0],[a,b]] built
/// from friction derivatives (a shifted by -gamma when `with_source`).
double node_block_norm(const DiscreteModel& model, const Vector& v, const Vector* other, bool with_source) {
  const auto& topo = model.topology();
  const double c = topo.constants.sound_speed;
  double worst = 0.0;
  for (std::size_t k = 0; k < model.grid().pipes.size(); ++k) {
    const auto& g = model.grid().pipes[k];
    const double beta = topo.pipes[k].params.beta;
    const double gamma = topo.pipes[k].params.gamma;
    for (Index i = 0; i <= g.intervals; ++i) {
      Eigen::Vector2d d = friction_gradient(beta, v[g.p(i)], v[g.q(i)]);
      if (other) d -= friction_gradient(beta, (*other)[g.p(i)], (*other)[g.q(i)]);
      const double a = with_source ? d[0] - gamma : d[0];
      worst = std::max(worst, std::sqrt(c * c * a * a + d[1] * d[1]));
    }
  }
  return worst;
}

void check_direction(const Problem& problem, const Matrix& direction) {
  const auto& space = problem.controls();
  space.check_shape(direction);
  if (direction.row(0).cwiseAbs().maxCoeff() != 0.0)
    throw ValidationError("control direction must vanish at t = 0");
  for (Index s = 0; s < space.slots(); ++s)
    if (!space.active()[static_cast<std::size_t>(s)] && direction.col(s).cwiseAbs().maxCoeff() != 0.0)
      throw ValidationError("control direction is nonzero in inactive slot " + std::to_string(s + 1));
}

}  // namespace

double tracking_cost(const DiscreteModel& model, const Trajectory& trajectory, const Target& target) {
  double sum = 0.0;
  for (Index n = 0; n < trajectory.steps; ++n) {
    const Vector e = 0.5 * (trajectory.states[n] - target.at(n) + trajectory.states[n + 1] - target.at(n + 1));
    sum += trajectory.step * model.inner(e, e);
  }
  return 0.5 * sum;
}

std::vector<Vector> tracking_sources(const DiscreteModel& model, const Trajectory& trajectory,
                                     const Target& target) {
  const Index M = trajectory.steps;
  std::vector<Vector> ebar(M);
  for (Index n = 0; n < M; ++n)
    ebar[n] = 0.5 * (trajectory.states[n] - target.at(n) + trajectory.states[n + 1] - target.at(n + 1));
  std::vector<Vector> g(M + 1, Vector::Zero(model.size()));
  const double half_tau = 0.5 * trajectory.step;
  for (Index j = 0; j <= M; ++j) {
    if (j > 0) g[j] += ebar[j - 1];
    if (j < M) g[j] += ebar[j];
    g[j] = half_tau * model.mass().cwiseProduct(g[j]);
  }
  return g;
}

Linearization::Linearization(const Problem& problem, const Trajectory& base, const ControlSignal& control)
    : problem_(&problem), steps_(base.steps), tau_(base.step) {
  if (base.truncated || base.steps != problem.time().steps)
    throw ValidationError("linearization requires a base trajectory on the full horizon");
  (void)control;
  const auto& model = problem.model();
  const SparseMatrix& R = model.restriction();
  const SparseMatrix& E = model.basis();
  const SparseMatrix rc = R * (model.boundary_operator() + model.source() * model.lift());
  lift_reduced_ = R * model.lift();
  midpoints_.reserve(static_cast<std::size_t>(steps_));
  jacobians_.reserve(static_cast<std::size_t>(steps_));
  propagators_.reserve(static_cast<std::size_t>(steps_));
  coupling_.reserve(static_cast<std::size_t>(steps_));
  for (Index n = 0; n < steps_; ++n) {
    midpoints_.push_back(0.5 * (base.states[n] + base.states[n + 1]));
    jacobians_.push_back(model.nonlinearity_jacobian(midpoints_.back()));
    const SparseMatrix& J = jacobians_.back().forward;
    const SparseMatrix K = model.reduced_operator() + SparseMatrix(R * J * E);
    propagators_.push_back(std::make_unique<MidpointPropagator>(K, tau_, true));
    coupling_.push_back(rc + SparseMatrix(R * J * model.lift()));
  }
}

SensitivityTrajectory Linearization::solve(const Matrix& direction) const {
  check_direction(*problem_, direction);
  const auto& model = problem_->model();
  SensitivityTrajectory out;
  out.direction = direction;
  out.reduced.assign(static_cast<std::size_t>(steps_ + 1), Vector::Zero(model.reduced_size()));
  for (Index n = 0; n < steps_; ++n) {
    const Vector h0 = direction.row(n).transpose();
    const Vector h1 = direction.row(n + 1).transpose();
    const Vector rhs = tau_ * (coupling_[n] * (0.5 * (h0 + h1))) - lift_reduced_ * (h1 - h0);
    out.reduced[n + 1] = propagators_[n]->step(out.reduced[n], rhs);
  }
  out.w.reserve(out.reduced.size());
  out.derivative.reserve(out.reduced.size());
  for (Index j = 0; j <= steps_; ++j) {
    out.w.push_back(model.basis() * out.reduced[j]);
    out.derivative.push_back(out.w.back() + model.lift() * direction.row(j).transpose());
  }
  return out;
}

AdjointTrajectory Linearization::adjoint(const std::vector<Vector>& sources) const {
  const auto& model = problem_->model();
  if (static_cast<Index>(sources.size()) != steps_ + 1)
    throw ValidationError("adjoint: expected one source per time sample");
  const SparseMatrix Et = model.basis().transpose();
  AdjointTrajectory out;
  out.multipliers.assign(static_cast<std::size_t>(steps_ + 1), Vector::Zero(model.reduced_size()));
  for (Index j = steps_; j >= 1; --j) {
    Vector rhs = Et * sources[j];
    if (j < steps_) rhs += propagators_[j]->explicit_part().transpose() * out.multipliers[j];
    out.multipliers[j - 1] = propagators_[j - 1]->solve_transposed(rhs);
  }
  out.states.reserve(out.multipliers.size());
  out.norms.reserve(out.multipliers.size());
  for (const auto& lambda : out.multipliers) {
    const Vector mu = model.gram_solve(lambda);
    out.states.push_back(model.basis() * mu);
    out.norms.push_back(model.reduced_norm(mu));
  }

  // Discrete backward stability bound b_n (b_M = 0).
  double C = 0.0;
  for (const auto& mid : midpoints_) C = std::max(C, node_block_norm(model, mid, nullptr, true));
  const double denom = 1.0 - 0.5 * tau_ * C;
  if (denom > 0.0) {
    double b = 0.0;
    for (Index n = steps_ - 1; n >= 0; --n) {
      const double drift =
          n + 1 < steps_ ? node_block_norm(model, midpoints_[n + 1], &midpoints_[n], false) : 0.0;
      const Vector& g = sources[n + 1];
      const double src = std::sqrt(std::max(0.0, g.dot(g.cwiseQuotient(model.mass()))));
      b = ((1.0 + 0.5 * tau_ * C + 0.5 * tau_ * drift) * b + src) / denom;
      if (b > 0.0) out.stability_ratio = std::max(out.stability_ratio, out.norms[n] / b);
    }
  }
  return out;
}

Matrix Linearization::pairing(const AdjointTrajectory& adjoint, const std::vector<Vector>& sources) const {
  const auto& model = problem_->model();
  const auto& space = problem_->controls();
  Matrix b = space.zero();
  const SparseMatrix B1t = model.lift().transpose();
  const SparseMatrix RB1t = lift_reduced_.transpose();
  for (Index j = 1; j <= steps_; ++j) {
    const Vector& lam_prev = adjoint.multipliers[j - 1];
    const Vector& lam = adjoint.multipliers[j];
    Vector row = B1t * sources[j] + 0.5 * tau_ * (coupling_[j - 1].transpose() * lam_prev) -
                 RB1t * (lam_prev - lam);
    if (j < steps_) row += 0.5 * tau_ * (coupling_[j].transpose() * lam);
    b.row(j) = row.transpose();
  }
  return space.mask(b);
}

AdjointTrajectory adjoint_solve(const Problem& problem, const Trajectory& base, const ControlSignal& control,
                                const Target& target) {
  const Linearization lin(problem, base, control);
  return lin.adjoint(tracking_sources(problem.model(), base, target));
}

SensitivityTrajectory linearized_solve(const Problem& problem, const Trajectory& base,
                                       const ControlSignal& control, const Matrix& direction) {
  const Linearization lin(problem, base, control);
  return lin.solve(direction);
}

GreenResult green_identity(const Linearization& lin, const Trajectory& base, const Target& target,
                           const Matrix& direction, GreenQuadrature quadrature) {
  const auto& problem = lin.problem();
  const auto& model = problem.model();
  const double tau = lin.step();
  const Index M = lin.steps();
  const auto sens = lin.solve(direction);
  const auto adj = lin.adjoint(tracking_sources(model, base, target));

  GreenResult r;
  for (Index n = 0; n < M; ++n) {
    const Vector wbar = 0.5 * (sens.w[n] + sens.w[n + 1]);
    const Vector hbar = 0.5 * (direction.row(n) + direction.row(n + 1)).transpose();
    const Vector dh = (direction.row(n + 1) - direction.row(n)).transpose();
    const auto& J = lin.jacobian(n);
    const Vector& p = adj.states[n];

    r.lhs += tau * model.inner(J.adjoint * p, wbar);
    if (quadrature == GreenQuadrature::Midpoint) {
      const Vector ebar = 0.5 * (base.states[n] - target.at(n) + base.states[n + 1] - target.at(n + 1));
      r.lhs += tau * model.inner(ebar, wbar);
    }

    const Vector forcing = J.forward * wbar + model.boundary_operator() * hbar +
                           model.source() * (model.lift() * hbar) + J.forward * (model.lift() * hbar) -
                           model.lift() * dh / tau;
    r.rhs += tau * model.inner(p, forcing);
  }
  if (quadrature == GreenQuadrature::Trapezoid) {
    for (Index j = 0; j <= M; ++j) {
      const double weight = (j == 0 || j == M) ? 0.5 * tau : tau;
      r.lhs += weight * model.inner(base.states[j] - target.at(j), sens.w[j]);
    }
  }
  r.absolute = std::abs(r.lhs - r.rhs);
  const double scale = std::max(std::abs(r.lhs), std::abs(r.rhs));
  r.relative = scale > 0.0 ? r.absolute / scale : 0.0;
  return r;
}

double green_identity_residual(const Problem& problem, const ControlSignal& control, const Matrix& direction,
                               const Trajectory& base, const Target& target, GreenQuadrature quadrature) {
  const Linearization lin(problem, base, control);
  return green_identity(lin, base, target, direction, quadrature).relative;
}

}  // namespace gasnet
