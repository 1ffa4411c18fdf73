#pragma once

#include "gasnet/core.hpp"

#include <vector>

namespace gasnet {

/// Uniform time grid t_j = j T / M, j = 0..M.
struct TimeGrid {
  double horizon = 0.0;
  Index steps = 0;

  double step() const { return horizon / static_cast<double>(steps); }
  double time(Index j) const {
    return j == steps ? horizon : horizon * static_cast<double>(j) / static_cast<double>(steps);
  }
};

/// Boundary data sampled on a time grid: values(j, s) is slot s at t_j.
struct ControlSignal {
  TimeGrid time;
  Matrix values;

  Vector sample(Index j) const { return values.row(j).transpose(); }
};

/// Half-step rates (values(j+1) - values(j)) / tau, one row per step.
Matrix control_rate(const Matrix& values, double tau);

/// Reduced controls (offset from the equilibrium control, zero at t = 0)
/// with the discrete H^2(0,T) inner product
///   G = M0 + M1 + M2  (trapezoid mass, forward-difference and
///                       second-difference Gram matrices),
/// restricted to the samples j >= 1. Each active slot carries its own copy
/// of G; inactive slots are identically zero.
class ControlSpace {
 public:
  ControlSpace(TimeGrid time, std::vector<bool> active, Vector equilibrium, double eta, double kappa_u);

  const TimeGrid& time() const { return time_; }
  Index slots() const { return static_cast<Index>(active_.size()); }
  const std::vector<bool>& active() const { return active_; }
  const Vector& equilibrium() const { return equilibrium_; }
  double eta() const { return eta_; }
  double kappa_u() const { return kappa_u_; }
  const Matrix& gram() const { return gram_; }

  Matrix zero() const { return Matrix::Zero(time_.steps + 1, slots()); }
  /// Zeroes inactive slots and the t = 0 row.
  Matrix mask(const Matrix& reduced) const;
  /// Throws ValidationError on a shape mismatch.
  void check_shape(const Matrix& reduced) const;

  Matrix reduced(const ControlSignal& signal) const;
  ControlSignal full(const Matrix& reduced) const;

  double inner(const Matrix& a, const Matrix& b) const;
  double norm(const Matrix& a) const;
  double sup_norm(const Matrix& a) const;

  /// Solves G g_s = b_s per active slot for the pairing rows j >= 1.
  Matrix riesz(const Matrix& pairing) const;

  /// Radial scaling into the H^2 ball of radius eta and the sup ball of
  /// radius kappa_u. Throws ValidationError if the t = 0 row is nonzero.
  Matrix project_feasible(const Matrix& reduced) const;
  bool admissible(const Matrix& reduced, double rel_tol = 1e-9) const;

 private:
  TimeGrid time_;
  std::vector<bool> active_;
  Vector equilibrium_;
  double eta_;
  double kappa_u_;
  Matrix gram_;
  Eigen::LLT<Matrix> gram_factor_;
};

}  // namespace gasnet
