#pragma once

#include "gasnet/problem.hpp"

#include <Eigen/SparseLU>

#include <vector>

namespace gasnet {

/// Implicit midpoint step for y' = K y + f in reduced coordinates:
/// (I - tau/2 K) y_{n+1} = (I + tau/2 K) y_n + rhs.
class MidpointPropagator {
 public:
  /// With `transposed` the transposed system is factored as well.
  MidpointPropagator(const SparseMatrix& K, double tau, bool transposed = false);

  Vector step(const Vector& y, const Vector& rhs) const;
  /// Solves (I - tau/2 K)^T x = b; requires construction with `transposed`.
  Vector solve_transposed(const Vector& b) const;
  const SparseMatrix& explicit_part() const { return explicit_; }

 private:
  SparseMatrix explicit_;
  Eigen::SparseLU<SparseMatrix> lu_;
  Eigen::SparseLU<SparseMatrix> lu_transposed_;
  bool has_transposed_ = false;
};

/// Reduced states and the continuity-estimate diagnostic of one linear solve.
struct LinearSolution {
  std::vector<Vector> states;  // full-space u^j = E y^j
  /// max_n ||u^n||_M / b_n, with b_n the discrete Gronwall bound.
  double continuity_ratio = 0.0;
};

/// Integrates u' = (A_h + P_h) u + f with u(0) = Pi u0; forcing[n] is the
/// forcing at the midpoint of step n.
LinearSolution linear_solve(const DiscreteModel& model, const Vector& u0, const std::vector<Vector>& forcing,
                            double tau);

/// Per-sample monitors of a trajectory.
struct SampleDiagnostics {
  double kirchhoff_max = 0.0;
  double pressure_gap = 0.0;
  double rball_distance = 0.0;  // ||v - v_e||_inf
  double box_margin = 0.0;      // min signed distance to a box face
  double contraction = 0.0;     // local ratio of the last two significant Picard increments
};

struct Trajectory {
  double step = 0.0;
  Index steps = 0;  // achieved number of steps (may be below requested)
  double requested_horizon = 0.0;
  bool truncated = false;

  std::vector<Vector> states;   // v^j
  std::vector<Vector> reduced;  // y^j with v^j = E y^j + B1 Phi^j

  int iterations = 0;
  std::vector<double> increments;  // Delta_k = max_j ||v_{k+1}^j - v_k^j||_M
  std::vector<double> ratios;      // delta_k = Delta_k / Delta_{k-1}
  std::vector<SampleDiagnostics> samples;
  double continuity_ratio = 0.0;

  double horizon() const { return step * static_cast<double>(steps); }
  double time(Index j) const { return step * static_cast<double>(j); }
  double max_kirchhoff() const;
  double max_pressure_gap() const;
  double max_deviation(const Vector& reference) const;
  double mean_ratio() const;
};

/// Picard iteration with the nonlinearity frozen at the previous iterate.
/// Throws SolverError on non-contraction, vacuum, or violated preconditions.
/// A breach of the r-ball truncates the horizon and sets `truncated`.
Trajectory picard_solve(const Problem& problem, const ControlSignal& control);
Trajectory picard_solve(const Problem& problem, const ControlSignal& control, const PicardOptions& options);

Vector kirchhoff_residual(const DiscreteModel& model, const Vector& state);
Vector pressure_continuity_residual(const DiscreteModel& model, const Vector& state);

struct ActivePoint {
  Index sample = 0;
  std::size_t pipe = 0;
  Index node = 0;
  int component = 0;  // 0 pressure, 1 flux
  int face = 0;       // -1 lower, +1 upper
  double margin = 0.0;  // signed distance, negative outside
};

struct MarginReport {
  bool feasible = true;  // no violation beyond tol_active * width
  double min_margin = 0.0;
  double worst_violation = 0.0;
  std::vector<ActivePoint> active;
};

/// Signed distances of every sample to the box faces; points within
/// tol_active (relative to the face width) or outside are active.
MarginReport constraint_monitor(const Grid& grid, const std::vector<Vector>& states,
                                const ConstraintBounds& bounds, double tol_active = 1e-6);

}  // namespace gasnet
