#include "gasnet/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace gasnet {

namespace {

void append(std::string& out, double value) { out += format_number(value); }

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_double(const std::string& text, const std::string& where) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\r')) --last;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value))
    throw ParseError(where + ": '" + text + "' is not a finite number");
  return value;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  return s;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path, const std::string& header) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || trim(line) != header)
    throw ParseError(path.string() + ": expected header '" + header + "'");
  const std::size_t columns = split(header).size();
  std::vector<std::vector<std::string>> rows;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    auto fields = split(trim(line));
    if (fields.size() != columns)
      throw ParseError(path.string() + ":" + std::to_string(number) + ": expected " + std::to_string(columns) +
                       " fields");
    rows.push_back(std::move(fields));
  }
  return rows;
}

Index time_index(double t, const TimeGrid& time, const std::string& where) {
  const double tau = time.step();
  const auto j = static_cast<Index>(std::llround(t / tau));
  if (j < 0 || j > time.steps || std::abs(t - time.time(j)) > 1e-9 * std::max(1.0, time.horizon))
    throw ValidationError(where + ": time " + format_number(t) + " is not on the time grid");
  return j;
}

std::string field_csv(const NetworkTopology& topology, const Grid& grid, const std::vector<Vector>& states,
                      double step) {
  std::string out = "t,pipe,x,p,q\n";
  for (std::size_t j = 0; j < states.size(); ++j) {
    const double t = step * static_cast<double>(j);
    for (std::size_t k = 0; k < grid.pipes.size(); ++k) {
      const auto& g = grid.pipes[k];
      for (Index i = 0; i <= g.intervals; ++i) {
        append(out, t);
        out += ',';
        out += topology.pipes[k].id;
        out += ',';
        append(out, g.positions[i]);
        out += ',';
        append(out, states[j][g.p(i)]);
        out += ',';
        append(out, states[j][g.q(i)]);
        out += '\n';
      }
    }
  }
  return out;
}

}  // namespace

std::string format_number(double value) {
  if (!std::isfinite(value)) throw Error("refusing to serialize a non-finite number");
  if (value == 0.0) return "0";
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc()) throw Error("number formatting failed");
  return std::string(buffer, ptr);
}

nlohmann::json sanitize(nlohmann::json document) {
  if (document.is_number_float() && !std::isfinite(document.get<double>())) return nullptr;
  if (document.is_structured())
    for (auto& item : document) item = sanitize(item);
  return document;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

void write_json(const std::filesystem::path& path, const nlohmann::json& document) {
  write_text(path, sanitize(document).dump(2) + "\n");
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::string trajectory_csv(const NetworkTopology& topology, const Grid& grid, const std::vector<Vector>& states,
                           double step) {
  return field_csv(topology, grid, states, step);
}

std::string adjoint_csv(const NetworkTopology& topology, const Grid& grid, const AdjointTrajectory& adjoint,
                        double step) {
  return field_csv(topology, grid, adjoint.states, step);
}

std::string diagnostics_csv(const Trajectory& trajectory) {
  std::string out = "t,picard_iters,delta,kirchhoff_max,rball_dist,box_margin\n";
  for (std::size_t j = 0; j < trajectory.samples.size(); ++j) {
    const auto& s = trajectory.samples[j];
    append(out, trajectory.time(static_cast<Index>(j)));
    out += ',' + std::to_string(trajectory.iterations) + ',';
    append(out, s.contraction);
    out += ',';
    append(out, s.kirchhoff_max);
    out += ',';
    append(out, s.rball_distance);
    out += ',';
    append(out, s.box_margin);
    out += '\n';
  }
  return out;
}

std::string control_csv(const ControlSignal& control, const std::vector<bool>& active) {
  std::string out = "t,slot,value\n";
  for (Index j = 0; j <= control.time.steps; ++j)
    for (std::size_t s = 0; s < active.size(); ++s) {
      if (!active[s]) continue;
      append(out, control.time.time(j));
      out += ',' + std::to_string(s + 1) + ',';
      append(out, control.values(j, static_cast<Index>(s)));
      out += '\n';
    }
  return out;
}

std::string iterations_csv(const std::vector<IterationRecord>& history) {
  std::string out =
      "iteration,stage,rho,J,J_penalized,penalty,grad_norm,step,step_norm,backtracks,min_margin,picard_iters,"
      "max_delta\n";
  for (const auto& r : history) {
    out += std::to_string(r.iteration) + ',' + std::to_string(r.stage) + ',';
    for (double v : {r.rho, r.cost, r.penalized, r.penalty, r.gradient_norm, r.step, r.step_norm}) {
      append(out, v);
      out += ',';
    }
    out += std::to_string(r.backtracks) + ',';
    append(out, r.min_margin);
    out += ',' + std::to_string(r.picard_iters) + ',';
    append(out, r.max_contraction);
    out += '\n';
  }
  return out;
}

Matrix read_control_csv(const std::filesystem::path& path, const TimeGrid& time, const std::vector<bool>& active) {
  const auto rows = read_csv(path, "t,slot,value");
  const auto slots = static_cast<Index>(active.size());
  Matrix values = Matrix::Zero(time.steps + 1, slots);
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> seen = decltype(seen)::Zero(time.steps + 1, slots);
  const std::string where = path.string();
  for (const auto& row : rows) {
    const Index j = time_index(parse_double(row[0], where), time, where);
    const double slot_value = parse_double(row[1], where);
    const auto slot = static_cast<Index>(slot_value);
    if (slot_value != static_cast<double>(slot) || slot < 1 || slot > slots)
      throw ValidationError(where + ": slot '" + row[1] + "' out of range 1.." + std::to_string(slots));
    const double value = parse_double(row[2], where);
    if (!active[static_cast<std::size_t>(slot - 1)] && value != 0.0)
      throw ValidationError(where + ": slot " + std::to_string(slot) + " is not a boundary slot");
    if (seen(j, slot - 1)) throw ValidationError(where + ": duplicate entry for slot " + std::to_string(slot));
    seen(j, slot - 1) = 1;
    values(j, slot - 1) = value;
  }
  for (Index s = 0; s < slots; ++s) {
    if (!active[static_cast<std::size_t>(s)]) continue;
    for (Index j = 0; j <= time.steps; ++j)
      if (!seen(j, s))
        throw ValidationError(where + ": slot " + std::to_string(s + 1) + " has no value at t = " +
                              format_number(time.time(j)));
  }
  return values;
}

std::vector<Vector> read_trajectory_csv(const std::filesystem::path& path, const NetworkTopology& topology,
                                        const Grid& grid, const TimeGrid& time) {
  const auto rows = read_csv(path, "t,pipe,x,p,q");
  const std::string where = path.string();
  std::vector<Vector> states(static_cast<std::size_t>(time.steps + 1), Vector::Zero(grid.size));
  std::vector<std::vector<bool>> seen(states.size(), std::vector<bool>(static_cast<std::size_t>(grid.size), false));
  for (const auto& row : rows) {
    const Index j = time_index(parse_double(row[0], where), time, where);
    std::size_t k = 0;
    try {
      k = topology.pipe_index(row[1]);
    } catch (const ValidationError&) {
      throw ValidationError(where + ": unknown pipe '" + row[1] + "'");
    }
    const auto& g = grid.pipes[k];
    const double x = parse_double(row[2], where);
    const auto i = static_cast<Index>(std::llround(x / g.spacing));
    if (i < 0 || i > g.intervals || std::abs(g.positions[i] - x) > 1e-9 * std::max(1.0, g.length))
      throw ValidationError(where + ": position " + row[2] + " is not a grid node of pipe '" + row[1] + "'");
    auto& state = states[static_cast<std::size_t>(j)];
    state[g.p(i)] = parse_double(row[3], where);
    state[g.q(i)] = parse_double(row[4], where);
    seen[static_cast<std::size_t>(j)][static_cast<std::size_t>(g.p(i))] = true;
  }
  for (std::size_t j = 0; j < states.size(); ++j)
    for (std::size_t k = 0; k < grid.pipes.size(); ++k)
      for (Index i = 0; i <= grid.pipes[k].intervals; ++i)
        if (!seen[j][static_cast<std::size_t>(grid.pipes[k].p(i))])
          throw ValidationError(where + ": missing sample for pipe '" + topology.pipes[k].id + "'");
  return states;
}

}  // namespace gasnet
