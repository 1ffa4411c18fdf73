#pragma once

#include "gasnet/core.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace gasnet {

struct PhysicalConstants {
  double sound_speed = 340.0;
  double gravity = 9.81;
};

/// Geometry and friction of one pipe. beta and gamma are derived and
/// always consistent with the primitives (see make_pipe_parameters).
struct PipeParameters {
  double length = 0.0;
  double diameter = 0.0;
  double friction = 0.0;
  double inclination = 0.0;
  double beta = 0.0;   // friction / (2 diameter)
  double gamma = 0.0;  // g sin(inclination) / c^2
};

/// Validates the primitives and fills the derived coefficients.
/// Throws ValidationError naming `pipe_id` on a violated bound.
PipeParameters make_pipe_parameters(double length, double diameter, double friction,
                                    double inclination, const PhysicalConstants& constants,
                                    std::string_view pipe_id = "pipe");

struct Pipe {
  std::string id;
  std::string from;
  std::string to;
  PipeParameters params;
};

/// Directed pipe network. Pipe order fixes the index k used everywhere else.
struct NetworkTopology {
  PhysicalConstants constants;
  std::vector<std::string> vertices;
  std::vector<Pipe> pipes;

  std::size_t num_pipes() const { return pipes.size(); }
  std::size_t num_vertices() const { return vertices.size(); }

  /// Throws ValidationError for an unknown id.
  std::size_t vertex_index(std::string_view id) const;
  std::size_t pipe_index(std::string_view id) const;
};

NetworkTopology parse_network(const nlohmann::json& document);
NetworkTopology parse_network_text(std::string_view text);
nlohmann::json network_to_json(const NetworkTopology& topology);

struct TreeReport {
  bool valid = false;
  bool connected = false;
  bool acyclic = false;
  bool count_matches = false;  // n == m + 1
  std::vector<std::string> messages;
  std::vector<std::size_t> witness_pipes;  // 0-based pipe indices
};

TreeReport validate_tree(const NetworkTopology& topology);

/// Incidence data of a tree network.
struct VertexClassification {
  // incidence(k, v) = -1 if v is the start of pipe k, +1 if its end, else 0.
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> incidence;
  std::vector<std::vector<std::size_t>> incident_pipes;  // kappa(v)
  std::vector<std::size_t> inner;
  std::vector<std::size_t> entry;
  std::vector<std::size_t> exit;
  std::vector<bool> is_inner;
  std::vector<bool> is_entry;
  std::vector<bool> is_exit;

  int xi(std::size_t pipe, std::size_t vertex) const {
    return incidence(static_cast<Index>(pipe), static_cast<Index>(vertex));
  }
};

VertexClassification classify_vertices(const NetworkTopology& topology);

/// Control slot layout: slot 2k is the pressure at the start of pipe k,
/// slot 2k+1 the flux at its end (k 0-based). A slot is active iff the
/// corresponding vertex is an entry (pressure) or exit (flux) vertex.
std::vector<bool> active_control_slots(const NetworkTopology& topology,
                                       const VertexClassification& classes);

inline std::size_t pressure_slot(std::size_t pipe) { return 2 * pipe; }
inline std::size_t flux_slot(std::size_t pipe) { return 2 * pipe + 1; }

}  // namespace gasnet
