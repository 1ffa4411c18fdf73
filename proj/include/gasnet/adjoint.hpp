#pragma once

#include "gasnet/forward.hpp"

#include <memory>
#include <vector>

namespace gasnet {

/// Target trajectory: one state per time sample, or a single state used at
/// every sample.
struct Target {
  std::vector<Vector> states;

  static Target constant(Vector state) { return Target{{std::move(state)}}; }
  const Vector& at(Index j) const { return states.size() == 1 ? states.front() : states[static_cast<std::size_t>(j)]; }
};

/// 1/2 sum_n tau ||e_bar_n||_M^2 with e = v - v_d and e_bar_n the average of
/// the misfit at t_n and t_{n+1}.
double tracking_cost(const DiscreteModel& model, const Trajectory& trajectory, const Target& target);

/// Derivatives of tracking_cost with respect to each stored state v^j.
std::vector<Vector> tracking_sources(const DiscreteModel& model, const Trajectory& trajectory,
                                     const Target& target);

struct SensitivityTrajectory {
  Matrix direction;
  std::vector<Vector> reduced;     // z^j
  std::vector<Vector> w;           // E z^j, w^0 = 0
  std::vector<Vector> derivative;  // S'(Phi, h)(t_j) = w^j + B1 h^j
};

struct AdjointTrajectory {
  std::vector<Vector> multipliers;  // lambda_n, n = 0..M, lambda_M = 0
  std::vector<Vector> states;       // p_n = E G^{-1} lambda_n
  std::vector<double> norms;        // ||p_n||_M
  /// max_n ||p_n||_M / b_n with b_n the discrete backward stability bound.
  double stability_ratio = 0.0;
};

/// The linearization of the converged forward scheme around a base
/// trajectory: one midpoint system per step with the friction Jacobian
/// frozen at the step midpoint. The adjoint is its exact transpose.
class Linearization {
 public:
  Linearization(const Problem& problem, const Trajectory& base, const ControlSignal& control);

  const Problem& problem() const { return *problem_; }
  Index steps() const { return steps_; }
  double step() const { return tau_; }
  const StateJacobian& jacobian(Index n) const { return jacobians_[static_cast<std::size_t>(n)]; }

  /// Linearized states for a control direction h with h(0) = 0.
  SensitivityTrajectory solve(const Matrix& direction) const;

  /// Backward solve driven by sources g_j = dPsi/dv^j (g_0 is ignored).
  AdjointTrajectory adjoint(const std::vector<Vector>& sources) const;

  /// Euclidean derivative of Psi with respect to the control samples,
  /// given the adjoint of the same sources. Row 0 and inactive slots are zero.
  Matrix pairing(const AdjointTrajectory& adjoint, const std::vector<Vector>& sources) const;

 private:
  const Problem* problem_;
  Index steps_;
  double tau_;
  std::vector<Vector> midpoints_;
  std::vector<StateJacobian> jacobians_;
  std::vector<std::unique_ptr<MidpointPropagator>> propagators_;
  std::vector<SparseMatrix> coupling_;  // R (B0 + P B1 + J_n B1)
  SparseMatrix lift_reduced_;           // R B1
};

/// Adjoint of the tracking cost (convenience wrapper).
AdjointTrajectory adjoint_solve(const Problem& problem, const Trajectory& base, const ControlSignal& control,
                                const Target& target);

SensitivityTrajectory linearized_solve(const Problem& problem, const Trajectory& base,
                                       const ControlSignal& control, const Matrix& direction);

enum class GreenQuadrature { Midpoint, Trapezoid };

struct GreenResult {
  double lhs = 0.0;
  double rhs = 0.0;
  double absolute = 0.0;
  double relative = 0.0;
};

/// Both sides of the Green-type duality between the adjoint and the
/// linearized system, with the misfit pairing evaluated by `quadrature`.
GreenResult green_identity(const Linearization& lin, const Trajectory& base, const Target& target,
                           const Matrix& direction, GreenQuadrature quadrature = GreenQuadrature::Midpoint);

double green_identity_residual(const Problem& problem, const ControlSignal& control, const Matrix& direction,
                               const Trajectory& base, const Target& target,
                               GreenQuadrature quadrature = GreenQuadrature::Midpoint);

}  // namespace gasnet
