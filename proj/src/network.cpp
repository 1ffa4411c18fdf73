#include "gasnet/network.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace gasnet {

namespace {

std::string pipe_label(std::string_view id) { return "pipe '" + std::string(id) + "'"; }

double require_number(const nlohmann::json& object, const char* key, const std::string& where) {
  auto it = object.find(key);
  if (it == object.end()) throw ParseError(where + ": missing field '" + key + "'");
  if (!it->is_number()) throw ParseError(where + ": field '" + key + "' must be a number");
  return it->get<double>();
}

std::string require_string(const nlohmann::json& object, const char* key, const std::string& where) {
  auto it = object.find(key);
  if (it == object.end()) throw ParseError(where + ": missing field '" + key + "'");
  if (!it->is_string()) throw ParseError(where + ": field '" + key + "' must be a string");
  return it->get<std::string>();
}

struct DisjointSets {
  std::vector<std::size_t> parent;

  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }

  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[b] = a;
    return true;
  }
};

}  // namespace

PipeParameters make_pipe_parameters(double length, double diameter, double friction,
                                    double inclination, const PhysicalConstants& constants,
                                    std::string_view pipe_id) {
  const auto where = pipe_label(pipe_id);
  if (!std::isfinite(length) || length <= 0.0) throw ValidationError(where + ": nonpositive length");
  if (!std::isfinite(diameter) || diameter <= 0.0)
    throw ValidationError(where + ": nonpositive diameter");
  if (!std::isfinite(friction) || friction < 0.0)
    throw ValidationError(where + ": negative friction");
  if (!std::isfinite(inclination) || std::abs(inclination) >= std::numbers::pi / 2)
    throw ValidationError(where + ": inclination must lie in (-pi/2, pi/2)");
  if (constants.sound_speed <= 0.0) throw ValidationError("sound speed must be positive");

  PipeParameters p;
  p.length = length;
  p.diameter = diameter;
  p.friction = friction;
  p.inclination = inclination;
  p.beta = friction / (2.0 * diameter);
  p.gamma = constants.gravity * std::sin(inclination) /
            (constants.sound_speed * constants.sound_speed);
  return p;
}

std::size_t NetworkTopology::vertex_index(std::string_view id) const {
  auto it = std::find(vertices.begin(), vertices.end(), id);
  if (it == vertices.end()) throw ValidationError("unknown vertex '" + std::string(id) + "'");
  return static_cast<std::size_t>(it - vertices.begin());
}

std::size_t NetworkTopology::pipe_index(std::string_view id) const {
  auto it = std::find_if(pipes.begin(), pipes.end(), [&](const Pipe& p) { return p.id == id; });
  if (it == pipes.end()) throw ValidationError("unknown pipe '" + std::string(id) + "'");
  return static_cast<std::size_t>(it - pipes.begin());
}

NetworkTopology parse_network(const nlohmann::json& document) {
  if (!document.is_object()) throw ParseError("network: document must be an object");
  NetworkTopology net;

  if (auto it = document.find("constants"); it != document.end()) {
    if (!it->is_object()) throw ParseError("network: 'constants' must be an object");
    if (it->contains("c")) net.constants.sound_speed = require_number(*it, "c", "constants");
    if (it->contains("g")) net.constants.gravity = require_number(*it, "g", "constants");
    if (!(net.constants.sound_speed > 0.0)) throw ParseError("constants: 'c' must be positive");
  }

  auto vit = document.find("vertices");
  if (vit == document.end() || !vit->is_array())
    throw ParseError("network: missing array 'vertices'");
  for (const auto& v : *vit) {
    if (!v.is_string()) throw ParseError("network: vertex ids must be strings");
    auto id = v.get<std::string>();
    if (std::find(net.vertices.begin(), net.vertices.end(), id) != net.vertices.end())
      throw ParseError("network: duplicate vertex '" + id + "'");
    net.vertices.push_back(std::move(id));
  }

  auto pit = document.find("pipes");
  if (pit == document.end() || !pit->is_array()) throw ParseError("network: missing array 'pipes'");
  for (std::size_t k = 0; k < pit->size(); ++k) {
    const auto& entry = (*pit)[k];
    if (!entry.is_object()) throw ParseError("network: pipe #" + std::to_string(k + 1) + " must be an object");
    Pipe pipe;
    pipe.id = require_string(entry, "id", "pipe #" + std::to_string(k + 1));
    const auto where = pipe_label(pipe.id);
    pipe.from = require_string(entry, "from", where);
    pipe.to = require_string(entry, "to", where);
    const double length = require_number(entry, "length", where);
    const double diameter = require_number(entry, "diameter", where);
    const double friction = require_number(entry, "friction", where);
    const double inclination = require_number(entry, "inclination", where);
    try {
      pipe.params = make_pipe_parameters(length, diameter, friction, inclination, net.constants, pipe.id);
    } catch (const ValidationError& e) {
      throw ParseError(e.what());
    }
    for (const auto& other : net.pipes)
      if (other.id == pipe.id) throw ParseError("network: duplicate " + where);
    if (std::find(net.vertices.begin(), net.vertices.end(), pipe.from) == net.vertices.end())
      throw ParseError(where + ": unknown vertex '" + pipe.from + "'");
    if (std::find(net.vertices.begin(), net.vertices.end(), pipe.to) == net.vertices.end())
      throw ParseError(where + ": unknown vertex '" + pipe.to + "'");
    if (pipe.from == pipe.to) throw ParseError(where + ": start and end vertex coincide");
    net.pipes.push_back(std::move(pipe));
  }
  return net;
}

NetworkTopology parse_network_text(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("network: ") + e.what());
  }
  return parse_network(doc);
}

nlohmann::json network_to_json(const NetworkTopology& topology) {
  nlohmann::json doc;
  doc["constants"] = {{"c", topology.constants.sound_speed}, {"g", topology.constants.gravity}};
  doc["vertices"] = topology.vertices;
  doc["pipes"] = nlohmann::json::array();
  for (const auto& p : topology.pipes) {
    doc["pipes"].push_back({{"id", p.id},
                            {"from", p.from},
                            {"to", p.to},
                            {"length", p.params.length},
                            {"diameter", p.params.diameter},
                            {"friction", p.params.friction},
                            {"inclination", p.params.inclination}});
  }
  return doc;
}

TreeReport validate_tree(const NetworkTopology& topology) {
  TreeReport report;
  const std::size_t n = topology.num_vertices();
  const std::size_t m = topology.num_pipes();

  std::vector<std::size_t> from(m), to(m);
  for (std::size_t k = 0; k < m; ++k) {
    const auto& pipe = topology.pipes[k];
    auto f = std::find(topology.vertices.begin(), topology.vertices.end(), pipe.from);
    auto t = std::find(topology.vertices.begin(), topology.vertices.end(), pipe.to);
    if (f == topology.vertices.end() || t == topology.vertices.end() || f == t) {
      report.messages.push_back("pipe '" + pipe.id + "' has invalid endpoints");
      report.witness_pipes.push_back(k);
      return report;
    }
    from[k] = static_cast<std::size_t>(f - topology.vertices.begin());
    to[k] = static_cast<std::size_t>(t - topology.vertices.begin());
  }

  DisjointSets sets(n);
  report.acyclic = true;
  for (std::size_t k = 0; k < m; ++k) {
    if (!sets.unite(from[k], to[k])) {
      report.acyclic = false;
      report.witness_pipes.push_back(k);
    }
  }
  if (!report.acyclic) {
    std::ostringstream msg;
    msg << "cycle detected (closing pipes:";
    for (auto k : report.witness_pipes) msg << ' ' << topology.pipes[k].id;
    msg << ')';
    report.messages.push_back(msg.str());
  }

  report.connected = n > 0;
  if (n > 0) {
    const auto root = sets.find(0);
    std::vector<std::size_t> stray;
    for (std::size_t k = 0; k < m; ++k)
      if (sets.find(from[k]) != root) stray.push_back(k);
    bool isolated_vertex = false;
    for (std::size_t v = 0; v < n; ++v)
      if (sets.find(v) != root) isolated_vertex = true;
    if (isolated_vertex) {
      report.connected = false;
      std::ostringstream msg;
      msg << "disconnected";
      if (!stray.empty()) {
        msg << " (pipes outside the component of '" << topology.vertices[0] << "':";
        for (auto k : stray) msg << ' ' << topology.pipes[k].id;
        msg << ')';
      }
      report.messages.push_back(msg.str());
      report.witness_pipes.insert(report.witness_pipes.end(), stray.begin(), stray.end());
    }
  } else {
    report.messages.push_back("network has no vertices");
  }

  report.count_matches = n == m + 1;
  if (!report.count_matches)
    report.messages.push_back("vertex count " + std::to_string(n) + " != pipe count + 1 (" +
                              std::to_string(m + 1) + ")");

  report.valid = report.connected && report.acyclic && report.count_matches && m > 0;
  if (m == 0) report.messages.push_back("network has no pipes");
  return report;
}

VertexClassification classify_vertices(const NetworkTopology& topology) {
  const std::size_t n = topology.num_vertices();
  const std::size_t m = topology.num_pipes();
  VertexClassification c;
  c.incidence.setZero(static_cast<Index>(m), static_cast<Index>(n));
  c.incident_pipes.assign(n, {});
  for (std::size_t k = 0; k < m; ++k) {
    const auto s = topology.vertex_index(topology.pipes[k].from);
    const auto e = topology.vertex_index(topology.pipes[k].to);
    c.incidence(static_cast<Index>(k), static_cast<Index>(s)) = -1;
    c.incidence(static_cast<Index>(k), static_cast<Index>(e)) = 1;
    c.incident_pipes[s].push_back(k);
    c.incident_pipes[e].push_back(k);
  }
  c.is_inner.assign(n, false);
  c.is_entry.assign(n, false);
  c.is_exit.assign(n, false);
  for (std::size_t v = 0; v < n; ++v) {
    const auto& kappa = c.incident_pipes[v];
    if (kappa.size() > 1) {
      c.is_inner[v] = true;
      c.inner.push_back(v);
      continue;
    }
    for (auto k : kappa) {
      if (c.xi(k, v) == -1) c.is_entry[v] = true;
      if (c.xi(k, v) == 1) c.is_exit[v] = true;
    }
    if (c.is_entry[v]) c.entry.push_back(v);
    if (c.is_exit[v]) c.exit.push_back(v);
  }
  return c;
}

std::vector<bool> active_control_slots(const NetworkTopology& topology,
                                       const VertexClassification& classes) {
  std::vector<bool> active(2 * topology.num_pipes(), false);
  for (std::size_t k = 0; k < topology.num_pipes(); ++k) {
    active[pressure_slot(k)] = classes.is_entry[topology.vertex_index(topology.pipes[k].from)];
    active[flux_slot(k)] = classes.is_exit[topology.vertex_index(topology.pipes[k].to)];
  }
  return active;
}

}  // namespace gasnet
