#include "gasnet/steady_state.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>

namespace gasnet {

double steady_breach_position(const PipeParameters& pipe, double p_in, double q) {
  const double bq2 = pipe.beta * q * q;
  if (std::abs(pipe.gamma) < gamma_switch) {
    if (bq2 <= 0.0) return std::numeric_limits<double>::infinity();
    return p_in * p_in / (2.0 * bq2);
  }
  // Radicand zero: e^{2 gamma x} = (gamma p_in^2 + beta q^2) / beta q^2.
  if (bq2 <= 0.0) return std::numeric_limits<double>::infinity();
  const double ratio = (pipe.gamma * p_in * p_in + bq2) / bq2;
  if (ratio <= 0.0) return std::numeric_limits<double>::infinity();
  const double x = std::log(ratio) / (2.0 * pipe.gamma);
  return x >= 0.0 ? x : std::numeric_limits<double>::infinity();
}

double steady_inflow_pressure(const PipeParameters& pipe, double p_out, double q) {
  const double bq2 = pipe.beta * q * q;
  const double L = pipe.length;
  if (std::abs(pipe.gamma) < gamma_switch) return std::sqrt(p_out * p_out + 2.0 * bq2 * L);
  const double g = pipe.gamma;
  return std::sqrt(std::exp(2.0 * g * L) * p_out * p_out + bq2 * std::expm1(2.0 * g * L) / g);
}

Vector SteadyState::sample_pressure(std::size_t pipe, const Vector& positions) const {
  Vector out(positions.size());
  for (Index i = 0; i < positions.size(); ++i) out[i] = pressure(pipe, positions[i]);
  return out;
}

namespace {

std::string vertex_name(const NetworkTopology& t, std::size_t v) { return "'" + t.vertices[v] + "'"; }

void check_monotone(const SteadyState& s, std::size_t k, const NetworkTopology& t) {
  // d(p^2)/dx = -2 (gamma p^2 + beta q^2); p^2 is monotone in x, so the sign
  // of the bracket only needs checking at both ends.
  const auto& pipe = s.pipes[k];
  const double q2 = s.q_e[k] * s.q_e[k];
  for (double p : {s.p_in[k], s.p_out[k]}) {
    if (pipe.gamma * p * p + pipe.beta * q2 < 0.0)
      throw ValidationError("steady state not monotonically decreasing on pipe '" + t.pipes[k].id + "'");
  }
}

}  // namespace

SteadyState compute_steady_state(const NetworkTopology& topology,
                                 const VertexClassification& classes,
                                 const SteadyStateInput& input) {
  const std::size_t m = topology.num_pipes();
  const std::size_t n = topology.num_vertices();
  SteadyState s;
  s.pipes.reserve(m);
  for (const auto& p : topology.pipes) s.pipes.push_back(p.params);
  s.p_in.assign(m, 0.0);
  s.q_e.assign(m, 0.0);
  s.p_out.assign(m, 0.0);

  for (const auto& [vertex, value] : input.entry_pressure) {
    const auto v = topology.vertex_index(vertex);
    if (!classes.is_entry[v])
      throw ValidationError("entry_pressure: vertex '" + vertex + "' is not an entry vertex");
    if (!(value > 0.0)) throw ValidationError("entry_pressure: value at '" + vertex + "' must be positive");
  }
  for (const auto& [vertex, value] : input.entry_flux) {
    const auto v = topology.vertex_index(vertex);
    if (!classes.is_entry[v])
      throw ValidationError("entry_flux: vertex '" + vertex + "' is not an entry vertex");
    if (!(value > 0.0)) throw ValidationError("entry_flux: value at '" + vertex + "' must be positive");
  }

  // Fluxes: process vertices in topological order of the directed tree.
  std::vector<std::optional<double>> flux(m);
  std::vector<std::optional<double>> pinned(m);
  for (const auto& [pipe, value] : input.flux_pins) {
    const auto k = topology.pipe_index(pipe);
    if (!(value > 0.0)) throw ValidationError("flux_pins: value for '" + pipe + "' must be positive");
    pinned[k] = value;
  }
  for (auto v : classes.entry) {
    const auto it = input.entry_flux.find(topology.vertices[v]);
    if (it == input.entry_flux.end())
      throw ValidationError("entry_flux: missing value for entry vertex '" + topology.vertices[v] + "'");
    const auto k = classes.incident_pipes[v].front();
    if (pinned[k] && std::abs(*pinned[k] - it->second) > 1e-12 * it->second)
      throw ValidationError("Kirchhoff infeasible at node " + vertex_name(topology, v) +
                            ": pin on pipe '" + topology.pipes[k].id + "' contradicts entry flux");
    flux[k] = it->second;
  }

  std::vector<std::size_t> indegree(n, 0);
  for (std::size_t k = 0; k < m; ++k) ++indegree[topology.vertex_index(topology.pipes[k].to)];
  std::deque<std::size_t> ready;
  for (std::size_t v = 0; v < n; ++v)
    if (indegree[v] == 0) ready.push_back(v);
  while (!ready.empty()) {
    const auto v = ready.front();
    ready.pop_front();
    if (classes.is_inner[v]) {
      double inflow = 0.0;
      std::vector<std::size_t> out, free_out;
      for (auto k : classes.incident_pipes[v]) {
        if (classes.xi(k, v) == 1) {
          inflow += s.pipes[k].diameter * s.pipes[k].diameter * *flux[k];
        } else {
          out.push_back(k);
        }
      }
      double remaining = inflow;
      double free_weight = 0.0;
      for (auto k : out) {
        const double d2 = s.pipes[k].diameter * s.pipes[k].diameter;
        if (pinned[k]) {
          remaining -= d2 * *pinned[k];
          flux[k] = *pinned[k];
        } else {
          free_out.push_back(k);
          free_weight += d2;
        }
      }
      if (out.empty() || inflow <= 0.0)
        throw ValidationError("Kirchhoff infeasible at node " + vertex_name(topology, v) +
                              ": no positive inflow");
      if (free_out.empty()) {
        if (std::abs(remaining) > 1e-12 * inflow)
          throw ValidationError("Kirchhoff infeasible at node " + vertex_name(topology, v) +
                                ": pinned fluxes do not balance the inflow");
      } else {
        const double q = remaining / free_weight;
        if (!(q > 0.0))
          throw ValidationError("Kirchhoff infeasible at node " + vertex_name(topology, v) +
                                ": pinned fluxes exceed the inflow");
        for (auto k : free_out) flux[k] = q;
      }
    }
    for (auto k : classes.incident_pipes[v]) {
      if (classes.xi(k, v) != -1) continue;
      const auto w = topology.vertex_index(topology.pipes[k].to);
      if (--indegree[w] == 0) ready.push_back(w);
    }
  }
  for (std::size_t k = 0; k < m; ++k) {
    if (!flux[k])
      throw ValidationError("Kirchhoff infeasible: no flux reaches pipe '" + topology.pipes[k].id + "'");
    s.q_e[k] = *flux[k];
  }

  // Pressures: anchor at the first entry vertex with given pressure and
  // propagate across the undirected tree.
  std::optional<std::size_t> anchor;
  for (auto v : classes.entry)
    if (input.entry_pressure.count(topology.vertices[v])) {
      anchor = v;
      break;
    }
  if (!anchor) throw ValidationError("entry_pressure: at least one entry vertex needs a pressure");

  std::vector<std::optional<double>> pressure(n);
  pressure[*anchor] = input.entry_pressure.at(topology.vertices[*anchor]);
  std::deque<std::size_t> queue{*anchor};
  std::vector<bool> done(m, false);
  while (!queue.empty()) {
    const auto v = queue.front();
    queue.pop_front();
    for (auto k : classes.incident_pipes[v]) {
      if (done[k]) continue;
      done[k] = true;
      const auto start = topology.vertex_index(topology.pipes[k].from);
      const auto end = topology.vertex_index(topology.pipes[k].to);
      if (v == start) {
        s.p_in[k] = *pressure[v];
        s.p_out[k] = steady_pressure_profile(s.pipes[k], s.p_in[k], s.q_e[k], s.pipes[k].length);
        pressure[end] = s.p_out[k];
        queue.push_back(end);
      } else {
        s.p_out[k] = *pressure[v];
        s.p_in[k] = steady_inflow_pressure(s.pipes[k], s.p_out[k], s.q_e[k]);
        pressure[start] = s.p_in[k];
        queue.push_back(start);
      }
    }
  }

  for (const auto& [vertex, value] : input.entry_pressure) {
    const auto v = topology.vertex_index(vertex);
    if (std::abs(*pressure[v] - value) > 1e-9 * value) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "entry_pressure: value " << value << " at '" << vertex
          << "' is inconsistent with the propagated equilibrium pressure " << *pressure[v];
      throw ValidationError(msg.str());
    }
  }

  for (std::size_t k = 0; k < m; ++k) {
    if (!(s.q_e[k] > 0.0))
      throw ValidationError("steady flux on pipe '" + topology.pipes[k].id + "' must be positive");
    // Re-evaluate forward to surface breaches on pipes reached backwards.
    steady_pressure_profile(s.pipes[k], s.p_in[k], s.q_e[k], s.pipes[k].length);
    check_monotone(s, k, topology);
  }
  return s;
}

SuitabilityReport validate_suitable_set(const StateBox& box, const SteadyState& steady,
                                        const std::vector<Vector>& positions) {
  SuitabilityReport report;
  report.margin = std::numeric_limits<double>::infinity();
  if (box.pipes.size() != steady.num_pipes() || positions.size() != steady.num_pipes()) {
    report.violations.push_back("box and equilibrium have different pipe counts");
    report.margin = 0.0;
    return report;
  }
  for (std::size_t k = 0; k < box.pipes.size(); ++k) {
    const auto& b = box.pipes[k];
    const std::string tag = "pipe " + std::to_string(k + 1) + ": ";
    if (!(b.p_lo > 0.0)) report.violations.push_back(tag + "pressure lower bound must be positive");
    if (!(b.p_lo < b.p_hi)) report.violations.push_back(tag + "pressure interval is empty");
    if (!(b.q_lo < b.q_hi)) report.violations.push_back(tag + "flux interval is empty");
    if (!(b.p_lo + steady.p_in[k] <= b.p_hi))
      report.violations.push_back(tag + "pressure upper bound below lower bound + inflow pressure");
    bool interior = true;
    for (Index i = 0; i < positions[k].size(); ++i) {
      const double p = steady.pressure(k, positions[k][i]);
      const double q = steady.q_e[k];
      const double gap = std::min({p - b.p_lo, b.p_hi - p, q - b.q_lo, b.q_hi - q});
      report.margin = std::min(report.margin, gap);
      if (!(gap > 0.0)) interior = false;
    }
    if (!interior) report.violations.push_back(tag + "equilibrium not interior");
  }
  if (report.margin == std::numeric_limits<double>::infinity()) report.margin = 0.0;
  report.valid = report.violations.empty();
  return report;
}

double ball_radius(const StateBox& inner_box, const StateBox& box) {
  if (inner_box.pipes.size() != box.pipes.size())
    throw ValidationError("inner box and box have different pipe counts");
  double r = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < box.pipes.size(); ++k) {
    const auto& in = inner_box.pipes[k];
    const auto& out = box.pipes[k];
    const double gaps[] = {in.p_lo - out.p_lo, out.p_hi - in.p_hi, in.q_lo - out.q_lo,
                           out.q_hi - in.q_hi};
    for (double g : gaps) {
      if (g < 0.0)
        throw ValidationError("inner box not contained in box on pipe " + std::to_string(k + 1));
      r = std::min(r, g);
    }
  }
  return box.pipes.empty() ? 0.0 : r;
}

StateBox equilibrium_hull(const SteadyState& steady, const std::vector<Vector>& positions) {
  StateBox hull;
  for (std::size_t k = 0; k < steady.num_pipes(); ++k) {
    const Vector p = steady.sample_pressure(k, positions[k]);
    hull.pipes.push_back({p.minCoeff(), p.maxCoeff(), steady.q_e[k], steady.q_e[k]});
  }
  return hull;
}

}  // namespace gasnet
