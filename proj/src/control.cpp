#include "gasnet/control.hpp"

#include <algorithm>
#include <cmath>

namespace gasnet {

namespace {

constexpr double projection_slack = 1e-12;

}  // namespace

Matrix control_rate(const Matrix& values, double tau) {
  const Index steps = values.rows() - 1;
  return (values.bottomRows(steps) - values.topRows(steps)) / tau;
}

ControlSpace::ControlSpace(TimeGrid time, std::vector<bool> active, Vector equilibrium, double eta,
                           double kappa_u)
    : time_(time), active_(std::move(active)), equilibrium_(std::move(equilibrium)), eta_(eta), kappa_u_(kappa_u) {
  if (time_.steps < 2) throw ValidationError("time_steps must be at least 2");
  if (!(time_.horizon > 0.0)) throw ValidationError("horizon must be positive");
  if (equilibrium_.size() != static_cast<Index>(active_.size()))
    throw ValidationError("equilibrium control has the wrong number of slots");
  if (!(eta_ > 0.0)) throw ValidationError("eta must be positive");
  if (!(kappa_u_ > 0.0)) throw ValidationError("kappa_u must be positive");

  const Index M = time_.steps;
  const double tau = time_.step();
  Matrix full = Matrix::Zero(M + 1, M + 1);
  for (Index j = 0; j <= M; ++j) full(j, j) += (j == 0 || j == M) ? 0.5 * tau : tau;
  for (Index j = 0; j < M; ++j) {
    // ((phi_{j+1} - phi_j)/tau)^2 * tau
    const double w = 1.0 / tau;
    full(j, j) += w;
    full(j + 1, j + 1) += w;
    full(j, j + 1) -= w;
    full(j + 1, j) -= w;
  }
  for (Index j = 1; j < M; ++j) {
    // ((phi_{j+1} - 2 phi_j + phi_{j-1})/tau^2)^2 * tau
    const double w = 1.0 / (tau * tau * tau);
    const Index idx[3] = {j - 1, j, j + 1};
    const double coef[3] = {1.0, -2.0, 1.0};
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) full(idx[a], idx[b]) += w * coef[a] * coef[b];
  }
  gram_ = full.bottomRightCorner(M, M);
  gram_factor_.compute(gram_);
  if (gram_factor_.info() != Eigen::Success)
    throw SolverError(SolverError::Kind::LinearBreakdown, "control Gram matrix is not positive definite");
}

void ControlSpace::check_shape(const Matrix& reduced) const {
  if (reduced.rows() != time_.steps + 1 || reduced.cols() != slots())
    throw ValidationError("control has shape " + std::to_string(reduced.rows()) + "x" +
                          std::to_string(reduced.cols()) + ", expected " + std::to_string(time_.steps + 1) +
                          "x" + std::to_string(slots()));
}

Matrix ControlSpace::mask(const Matrix& reduced) const {
  check_shape(reduced);
  Matrix out = reduced;
  out.row(0).setZero();
  for (Index s = 0; s < slots(); ++s)
    if (!active_[static_cast<std::size_t>(s)]) out.col(s).setZero();
  return out;
}

Matrix ControlSpace::reduced(const ControlSignal& signal) const {
  check_shape(signal.values);
  Matrix r = signal.values.rowwise() - equilibrium_.transpose();
  for (Index s = 0; s < slots(); ++s)
    if (!active_[static_cast<std::size_t>(s)]) r.col(s).setZero();
  return r;
}

ControlSignal ControlSpace::full(const Matrix& reduced) const {
  check_shape(reduced);
  ControlSignal out;
  out.time = time_;
  out.values = reduced.rowwise() + equilibrium_.transpose();
  for (Index s = 0; s < slots(); ++s)
    if (!active_[static_cast<std::size_t>(s)]) out.values.col(s).setZero();
  return out;
}

double ControlSpace::inner(const Matrix& a, const Matrix& b) const {
  check_shape(a);
  check_shape(b);
  const Index M = time_.steps;
  double sum = 0.0;
  for (Index s = 0; s < slots(); ++s) {
    if (!active_[static_cast<std::size_t>(s)]) continue;
    sum += a.col(s).tail(M).dot(gram_ * b.col(s).tail(M));
  }
  return sum;
}

double ControlSpace::norm(const Matrix& a) const { return std::sqrt(std::max(0.0, inner(a, a))); }

double ControlSpace::sup_norm(const Matrix& a) const {
  double sup = 0.0;
  for (Index s = 0; s < slots(); ++s)
    if (active_[static_cast<std::size_t>(s)]) sup = std::max(sup, a.col(s).cwiseAbs().maxCoeff());
  return sup;
}

Matrix ControlSpace::riesz(const Matrix& pairing) const {
  check_shape(pairing);
  const Index M = time_.steps;
  Matrix g = zero();
  for (Index s = 0; s < slots(); ++s) {
    if (!active_[static_cast<std::size_t>(s)]) continue;
    g.col(s).tail(M) = gram_factor_.solve(pairing.col(s).tail(M));
  }
  return g;
}

Matrix ControlSpace::project_feasible(const Matrix& reduced) const {
  check_shape(reduced);
  if (reduced.row(0).cwiseAbs().maxCoeff() != 0.0)
    throw ValidationError("project_feasible: reduced control must vanish at t = 0");
  const double h2 = norm(reduced);
  const double sup = sup_norm(reduced);
  double s = 1.0;
  if (h2 > eta_ * (1.0 + projection_slack)) s = std::min(s, eta_ / h2);
  if (sup > kappa_u_ * (1.0 + projection_slack)) s = std::min(s, kappa_u_ / sup);
  if (s == 1.0) return reduced;
  return s * reduced;
}

bool ControlSpace::admissible(const Matrix& reduced, double rel_tol) const {
  check_shape(reduced);
  if (reduced.row(0).cwiseAbs().maxCoeff() != 0.0) return false;
  for (Index s = 0; s < slots(); ++s)
    if (!active_[static_cast<std::size_t>(s)] && reduced.col(s).cwiseAbs().maxCoeff() != 0.0) return false;
  return norm(reduced) <= eta_ * (1.0 + rel_tol) && sup_norm(reduced) <= kappa_u_ * (1.0 + rel_tol);
}

}  // namespace gasnet
