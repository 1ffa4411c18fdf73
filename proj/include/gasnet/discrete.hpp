#pragma once

#include "gasnet/network.hpp"

#include <Eigen/Sparse>

#include <cmath>
#include <vector>

namespace gasnet {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Either a uniform density (rounded to whole intervals per pipe) or explicit
/// interval counts per pipe; explicit counts win when present.
struct GridResolution {
  double nodes_per_meter = 0.0;
  std::vector<Index> per_pipe;
};

/// Uniform grid on one pipe. The flat state stores all pressure samples of
/// the pipe followed by all flux samples.
struct PipeGrid {
  Index intervals = 0;
  double length = 0.0;
  double spacing = 0.0;
  Index offset = 0;
  Vector positions;
  Vector weights;  // trapezoid quadrature

  Index nodes() const { return intervals + 1; }
  Index p(Index i) const { return offset + i; }
  Index q(Index i) const { return offset + intervals + 1 + i; }
};

struct Grid {
  std::vector<PipeGrid> pipes;
  Index size = 0;

  Index p_index(std::size_t pipe, Index node) const { return pipes[pipe].p(node); }
  Index q_index(std::size_t pipe, Index node) const { return pipes[pipe].q(node); }
  std::vector<Vector> positions() const;
};

/// Throws ValidationError when a pipe gets fewer than 4 intervals.
Grid build_grid(const NetworkTopology& topology, const GridResolution& resolution);

/// Pointwise friction term -beta q|q|/p.
template <typename Scalar>
Scalar friction_term(double beta, Scalar p, Scalar q) {
  using std::abs;
  return -Scalar(beta) * q * abs(q) / p;
}

/// d(friction_term)/dp and d(friction_term)/dq.
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 1> friction_gradient(double beta, Scalar p, Scalar q) {
  using std::abs;
  Eigen::Matrix<Scalar, 2, 1> g;
  g << Scalar(beta) * q * abs(q) / (p * p), Scalar(-2) * Scalar(beta) * abs(q) / p;
  return g;
}

/// Lipschitz constant of the friction term over one pipe box, measured in
/// the weighted norm (pressure weight 1, flux weight c^2).
double friction_lipschitz_bound(double beta, double sound_speed, double p_lo, double p_hi,
                                double q_lo, double q_hi);

/// Jacobian of the nonlinearity and its adjoint in the weighted inner product.
struct StateJacobian {
  SparseMatrix forward;
  SparseMatrix adjoint;
};

struct ModelOptions {
  /// Pressures at or below this value trigger the vacuum guard.
  double pressure_floor = 0.0;
  /// Test hook: adds a non-skew defect to the transport operator.
  double transport_defect = 0.0;
};

/// All spatial operators of one network discretization.
///
/// The homogeneous constraint space is spanned by the columns of `basis()`
/// (E); `restriction()` is R = (E^T M E)^{-1} E^T M and `projector()` is the
/// M-orthogonal projector E R. Time stepping works in the reduced
/// coordinates y with u = E y.
class DiscreteModel {
 public:
  DiscreteModel(const NetworkTopology& topology, const Grid& grid, ModelOptions options = {});

  const NetworkTopology& topology() const { return topology_; }
  const VertexClassification& classes() const { return classes_; }
  const Grid& grid() const { return grid_; }
  const ModelOptions& options() const { return options_; }

  Index size() const { return grid_.size; }
  Index reduced_size() const { return basis_.cols(); }
  Index num_slots() const { return static_cast<Index>(2 * topology_.num_pipes()); }
  const std::vector<bool>& active_slots() const { return active_; }

  const Vector& mass() const { return mass_; }
  double inner(const Vector& u, const Vector& v) const;
  double norm(const Vector& u) const { return std::sqrt(inner(u, u)); }
  /// ||E y||_M.
  double reduced_norm(const Vector& y) const;
  /// Solves (E^T M E) x = b.
  Vector gram_solve(const Vector& b) const;

  const SparseMatrix& transport() const { return transport_; }
  const SparseMatrix& source() const { return source_; }
  const SparseMatrix& basis() const { return basis_; }
  const SparseMatrix& gram() const { return gram_; }
  const SparseMatrix& restriction() const { return restriction_; }
  const SparseMatrix& projector() const { return projector_; }
  const SparseMatrix& skew_operator() const { return skew_; }
  const SparseMatrix& lift() const { return lift_; }
  const SparseMatrix& boundary_operator() const { return b0_; }
  /// R (A + P) E.
  const SparseMatrix& reduced_operator() const { return reduced_; }
  /// Operator norm of P in the weighted norm: c max |gamma_k|.
  double source_bound() const { return source_bound_; }

  /// Lifting of one control sample; throws if an inactive slot is nonzero.
  Vector lift_boundary(const Vector& phi) const;
  /// B0 phi + P B1 phi - B1 phi_prime.
  Vector boundary_forcing(const Vector& phi, const Vector& phi_prime) const;

  /// Throws SolverError(VacuumGuard) naming pipe and node.
  void check_vacuum(const Vector& v) const;
  Vector nonlinearity(const Vector& v) const;
  StateJacobian nonlinearity_jacobian(const Vector& v) const;

  /// Sum_k xi_k(v) D_k^2 q^k(v) per inner vertex (order of classes().inner).
  Vector kirchhoff_residual(const Vector& v) const;
  /// Largest pairwise pressure gap per inner vertex.
  Vector pressure_continuity_residual(const Vector& v) const;

  /// Node index (0 or N) of `pipe` at `vertex`.
  Index end_node(std::size_t pipe, std::size_t vertex) const;

 private:
  void assemble_mass();
  void assemble_transport();
  void assemble_constraints();
  void assemble_boundary();

  NetworkTopology topology_;
  VertexClassification classes_;
  Grid grid_;
  ModelOptions options_;
  std::vector<bool> active_;

  Vector mass_;
  SparseMatrix transport_;
  SparseMatrix source_;
  SparseMatrix basis_;
  SparseMatrix gram_;
  SparseMatrix restriction_;
  SparseMatrix projector_;
  SparseMatrix skew_;
  SparseMatrix lift_;
  SparseMatrix b0_;
  SparseMatrix reduced_;
  Eigen::SimplicialLDLT<SparseMatrix> gram_factor_;
  double source_bound_ = 0.0;
};

}  // namespace gasnet
