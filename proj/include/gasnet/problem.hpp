#pragma once

#include "gasnet/control.hpp"
#include "gasnet/discrete.hpp"
#include "gasnet/steady_state.hpp"

#include <optional>

namespace gasnet {

/// Pointwise state bounds on the flat grid vector.
struct ConstraintBounds {
  Vector lower;
  Vector upper;

  /// (1 - delta) anchor + delta face, per face. delta = 1 returns the bounds unchanged.
  ConstraintBounds perturbed(const Vector& anchor, double delta) const;
};

ConstraintBounds make_bounds(const Grid& grid, const StateBox& box);

struct PicardOptions {
  double tol = 1e-10;
  int max_iters = 50;
};

/// Everything needed to assemble a problem instance.
struct ProblemSpec {
  NetworkTopology topology;
  SteadyStateInput steady;
  StateBox box;
  std::optional<StateBox> inner_box;
  GridResolution resolution;
  TimeGrid time;
  PicardOptions picard;
  double eta = 1.0;
  std::optional<double> kappa_u;
  /// When false, forward solves accept controls outside the admissible balls.
  bool enforce_control_bounds = true;
  /// Test hook forwarded to ModelOptions::transport_defect.
  double transport_defect = 0.0;
};

/// A validated instance: network, equilibrium, discretization, control space.
class Problem {
 public:
  explicit Problem(ProblemSpec spec);

  const ProblemSpec& spec() const { return spec_; }
  const NetworkTopology& topology() const { return spec_.topology; }
  const VertexClassification& classes() const { return model_.classes(); }
  const SteadyState& steady() const { return steady_; }
  const StateBox& box() const { return spec_.box; }
  const Grid& grid() const { return model_.grid(); }
  const DiscreteModel& model() const { return model_; }
  const TimeGrid& time() const { return spec_.time; }
  const ControlSpace& controls() const { return controls_; }
  const SuitabilityReport& suitability() const { return suitability_; }
  const ConstraintBounds& bounds() const { return bounds_; }

  /// Equilibrium sampled on the grid.
  const Vector& equilibrium() const { return equilibrium_; }
  /// Equilibrium control: inflow pressure on entry slots, flux on exit slots.
  const Vector& equilibrium_control() const { return equilibrium_control_; }
  ControlSignal equilibrium_signal() const;

  /// Sup-norm margin between the inner box (or the equilibrium hull) and the box.
  double r() const { return r_; }
  /// H^1 norm of the lifting of the all-ones control.
  double c1() const { return c1_; }
  double kappa_u() const { return controls_.kappa_u(); }
  /// Iterates must stay strictly closer than this to the equilibrium (sup norm).
  double rball_threshold() const { return r_ - c1_ * controls_.kappa_u(); }

  /// Same instance on a different time grid.
  Problem with_time(TimeGrid time) const;

 private:
  static DiscreteModel build_model(const ProblemSpec& spec);

  ProblemSpec spec_;
  DiscreteModel model_;
  SteadyState steady_;
  SuitabilityReport suitability_;
  ConstraintBounds bounds_;
  Vector equilibrium_;
  Vector equilibrium_control_;
  double r_ = 0.0;
  double c1_ = 0.0;
  ControlSpace controls_;
};

/// Builds the control space of a problem (used by Problem's constructor).
ControlSpace make_control_space(const TimeGrid& time, const DiscreteModel& model,
                                const Vector& equilibrium_control, double eta, double kappa_u);

/// Discrete H^1 norm (unweighted) of a state on the grid.
double state_h1_norm(const Grid& grid, const Vector& v);

}  // namespace gasnet
