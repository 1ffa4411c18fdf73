#pragma once

#include "gasnet/network.hpp"

#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace gasnet {

/// Below this |gamma| (1/m) the zero-inclination limit formula is used.
inline constexpr double gamma_switch = 1e-8;

/// Position where the steady-state radicand vanishes, +inf if it never does
/// (for x >= 0).
double steady_breach_position(const PipeParameters& pipe, double p_in, double q);

/// Radicand p(x)^2 of the steady-state pressure profile.
template <typename Scalar>
Scalar steady_pressure_squared(const PipeParameters& pipe, Scalar p_in, Scalar q, Scalar x) {
  using std::exp;
  using std::expm1;
  const Scalar beta = Scalar(pipe.beta);
  const Scalar gamma = Scalar(pipe.gamma);
  if (std::abs(pipe.gamma) < gamma_switch) return p_in * p_in - Scalar(2) * beta * q * q * x;
  // expm1(2 gamma x) / gamma keeps accuracy for small gamma x.
  return exp(Scalar(-2) * gamma * x) *
         (p_in * p_in - beta * q * q * expm1(Scalar(2) * gamma * x) / gamma);
}

/// Steady-state pressure at position x of a pipe with inflow pressure p_in
/// and constant flux q. Throws SolverError(SteadyStateBreach) when the
/// radicand is not positive.
template <typename Scalar>
Scalar steady_pressure_profile(const PipeParameters& pipe, Scalar p_in, Scalar q, Scalar x) {
  using std::sqrt;
  const Scalar radicand = steady_pressure_squared(pipe, p_in, q, x);
  if (!(radicand > Scalar(0))) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "steady state vacuum/sonic breach at x = " << double(x) << " (critical x = "
        << steady_breach_position(pipe, double(p_in), double(q)) << ")";
    throw SolverError(SolverError::Kind::SteadyStateBreach, msg.str());
  }
  return sqrt(radicand);
}

/// Inflow pressure that produces outflow pressure p_out after a pipe with flux q.
double steady_inflow_pressure(const PipeParameters& pipe, double p_out, double q);

/// Boundary data of the equilibrium. Keys are vertex ids (pressures,
/// entry fluxes) and pipe ids (pins).
struct SteadyStateInput {
  std::map<std::string, double> entry_pressure;
  std::map<std::string, double> entry_flux;
  std::map<std::string, double> flux_pins;
};

/// Equilibrium: per pipe inflow pressure, constant flux, outflow pressure.
struct SteadyState {
  std::vector<PipeParameters> pipes;
  std::vector<double> p_in;
  std::vector<double> q_e;
  std::vector<double> p_out;

  std::size_t num_pipes() const { return pipes.size(); }
  double pressure(std::size_t pipe, double x) const {
    return steady_pressure_profile(pipes[pipe], p_in[pipe], q_e[pipe], x);
  }
  /// Samples the pressure profile of a pipe at the given positions.
  Vector sample_pressure(std::size_t pipe, const Vector& positions) const;
};

/// Propagates entry data through the tree. At inner nodes outgoing fluxes
/// share the inflow in proportion to D^2 (equal flux) unless pinned.
SteadyState compute_steady_state(const NetworkTopology& topology,
                                 const VertexClassification& classes,
                                 const SteadyStateInput& input);

struct PipeBox {
  double p_lo = 0.0;
  double p_hi = 0.0;
  double q_lo = 0.0;
  double q_hi = 0.0;
};

/// Per-pipe pressure and flux intervals.
struct StateBox {
  std::vector<PipeBox> pipes;
};

struct SuitabilityReport {
  bool valid = false;
  double margin = 0.0;  // min distance of the sampled equilibrium to a box face
  std::vector<std::string> violations;
};

/// Checks the box inequalities and that the equilibrium sampled at
/// `positions[k]` lies in the interior of the box.
SuitabilityReport validate_suitable_set(const StateBox& box, const SteadyState& steady,
                                        const std::vector<Vector>& positions);

/// Smallest face gap between an inner box and an enclosing box.
double ball_radius(const StateBox& inner_box, const StateBox& box);

/// Bounding box of the sampled equilibrium, used as the inner box when none is given.
StateBox equilibrium_hull(const SteadyState& steady, const std::vector<Vector>& positions);

}  // namespace gasnet
