#include "gasnet/problem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace gasnet {

namespace {

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) out += (out.empty() ? "" : "; ") + p;
  return out;
}

Vector sample_equilibrium(const Grid& grid, const SteadyState& steady) {
  Vector v(grid.size);
  for (std::size_t k = 0; k < grid.pipes.size(); ++k) {
    const auto& g = grid.pipes[k];
    const Vector p = steady.sample_pressure(k, g.positions);
    for (Index i = 0; i <= g.intervals; ++i) {
      v[g.p(i)] = p[i];
      v[g.q(i)] = steady.q_e[k];
    }
  }
  return v;
}

Vector equilibrium_control_of(const DiscreteModel& model, const SteadyState& steady) {
  Vector phi = Vector::Zero(model.num_slots());
  for (std::size_t k = 0; k < steady.num_pipes(); ++k) {
    if (model.active_slots()[pressure_slot(k)]) phi[static_cast<Index>(pressure_slot(k))] = steady.p_in[k];
    if (model.active_slots()[flux_slot(k)]) phi[static_cast<Index>(flux_slot(k))] = steady.q_e[k];
  }
  return phi;
}

double margin_radius(const ProblemSpec& spec, const SteadyState& steady, const Grid& grid) {
  const StateBox inner = spec.inner_box ? *spec.inner_box : equilibrium_hull(steady, grid.positions());
  return ball_radius(inner, spec.box);
}

double lift_constant(const DiscreteModel& model) {
  Vector ones = Vector::Zero(model.num_slots());
  for (Index s = 0; s < ones.size(); ++s)
    if (model.active_slots()[static_cast<std::size_t>(s)]) ones[s] = 1.0;
  return state_h1_norm(model.grid(), model.lift() * ones);
}

double resolve_kappa(const ProblemSpec& spec, double r, double c1) {
  if (!spec.kappa_u) return r / (10.0 * c1);
  const double kappa = *spec.kappa_u;
  if (!(kappa > 0.0)) throw ValidationError("kappa_u must be positive");
  if (c1 * kappa >= r) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "precondition violated: c1*kappa_u = " << c1 * kappa << " is not below r = " << r;
    throw SolverError(SolverError::Kind::Precondition, msg.str());
  }
  if (c1 * kappa > r / 10.0) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "kappa_u too large: c1*kappa_u = " << c1 * kappa << " exceeds r/10 = " << r / 10.0;
    throw ValidationError(msg.str());
  }
  return kappa;
}

}  // namespace

ConstraintBounds ConstraintBounds::perturbed(const Vector& anchor, double delta) const {
  if (!(delta > 0.0)) throw ValidationError("homotopy delta must be positive");
  if (delta == 1.0) return *this;
  ConstraintBounds out;
  out.lower = (1.0 - delta) * anchor + delta * lower;
  out.upper = (1.0 - delta) * anchor + delta * upper;
  return out;
}

ConstraintBounds make_bounds(const Grid& grid, const StateBox& box) {
  if (box.pipes.size() != grid.pipes.size()) throw ValidationError("state_box needs one entry per pipe");
  ConstraintBounds b;
  b.lower.resize(grid.size);
  b.upper.resize(grid.size);
  for (std::size_t k = 0; k < grid.pipes.size(); ++k) {
    const auto& g = grid.pipes[k];
    for (Index i = 0; i <= g.intervals; ++i) {
      b.lower[g.p(i)] = box.pipes[k].p_lo;
      b.upper[g.p(i)] = box.pipes[k].p_hi;
      b.lower[g.q(i)] = box.pipes[k].q_lo;
      b.upper[g.q(i)] = box.pipes[k].q_hi;
    }
  }
  return b;
}

double state_h1_norm(const Grid& grid, const Vector& v) {
  double sum = 0.0;
  for (const auto& g : grid.pipes) {
    for (Index comp = 0; comp < 2; ++comp) {
      auto at = [&](Index i) { return v[comp == 0 ? g.p(i) : g.q(i)]; };
      for (Index i = 0; i <= g.intervals; ++i) sum += g.weights[i] * at(i) * at(i);
      for (Index i = 0; i < g.intervals; ++i) {
        const double d = (at(i + 1) - at(i)) / g.spacing;
        sum += g.spacing * d * d;
      }
    }
  }
  return std::sqrt(sum);
}

ControlSpace make_control_space(const TimeGrid& time, const DiscreteModel& model,
                                const Vector& equilibrium_control, double eta, double kappa_u) {
  return ControlSpace(time, model.active_slots(), equilibrium_control, eta, kappa_u);
}

DiscreteModel Problem::build_model(const ProblemSpec& spec) {
  const auto tree = validate_tree(spec.topology);
  if (!tree.valid) throw ValidationError("network is not a tree: " + join(tree.messages));
  if (spec.box.pipes.size() != spec.topology.num_pipes())
    throw ValidationError("state_box needs one entry per pipe");
  double a_min = std::numeric_limits<double>::infinity();
  for (const auto& b : spec.box.pipes) a_min = std::min(a_min, b.p_lo);
  if (!(a_min > 0.0)) throw ValidationError("state_box: pressure lower bound must be positive");
  ModelOptions options;
  options.pressure_floor = 0.5 * a_min;
  options.transport_defect = spec.transport_defect;
  return DiscreteModel(spec.topology, build_grid(spec.topology, spec.resolution), options);
}

Problem::Problem(ProblemSpec spec)
    : spec_(std::move(spec)),
      model_(build_model(spec_)),
      steady_(compute_steady_state(spec_.topology, model_.classes(), spec_.steady)),
      suitability_(validate_suitable_set(spec_.box, steady_, model_.grid().positions())),
      bounds_(make_bounds(model_.grid(), spec_.box)),
      equilibrium_(sample_equilibrium(model_.grid(), steady_)),
      equilibrium_control_(equilibrium_control_of(model_, steady_)),
      r_(margin_radius(spec_, steady_, model_.grid())),
      c1_(lift_constant(model_)),
      controls_(make_control_space(spec_.time, model_, equilibrium_control_, spec_.eta,
                                   suitability_.valid && r_ > 0.0 ? resolve_kappa(spec_, r_, c1_) : 1.0)) {
  if (!suitability_.valid) throw ValidationError("state_box not suitable: " + join(suitability_.violations));
  if (!(r_ > 0.0)) throw ValidationError("state_box leaves no margin around the equilibrium (r = 0)");
}

ControlSignal Problem::equilibrium_signal() const { return controls_.full(controls_.zero()); }

Problem Problem::with_time(TimeGrid time) const {
  ProblemSpec spec = spec_;
  spec.time = time;
  return Problem(std::move(spec));
}

}  // namespace gasnet
