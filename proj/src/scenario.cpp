#include "gasnet/scenario.hpp"

#include "gasnet/io.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace gasnet {

namespace {

using nlohmann::json;

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void check_keys(const json& object, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!object.is_object()) throw ParseError("'" + (path.empty() ? std::string("scenario") : path) + "' must be an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& item : object.items())
    if (!keys.count(item.key())) throw ParseError("unknown key '" + join(path, item.key()) + "'");
}

double number(const json& value, const std::string& path) {
  if (!value.is_number()) throw ParseError("'" + path + "' must be a number");
  const double v = value.get<double>();
  if (!std::isfinite(v)) throw ParseError("'" + path + "' must be finite");
  return v;
}

double require_number(const json& object, const char* key, const std::string& path) {
  const auto it = object.find(key);
  if (it == object.end()) throw ParseError("missing key '" + join(path, key) + "'");
  return number(*it, join(path, key));
}

long long integer(const json& value, const std::string& path) {
  if (!value.is_number_integer()) throw ParseError("'" + path + "' must be an integer");
  return value.get<long long>();
}

std::string string(const json& value, const std::string& path) {
  if (!value.is_string()) throw ParseError("'" + path + "' must be a string");
  return value.get<std::string>();
}

std::map<std::string, double> number_map(const json& value, const std::string& path) {
  if (!value.is_object()) throw ParseError("'" + path + "' must be an object");
  std::map<std::string, double> out;
  for (const auto& item : value.items()) out[item.key()] = number(item.value(), join(path, item.key()));
  return out;
}

std::pair<double, double> interval(const json& value, const std::string& path) {
  if (!value.is_array() || value.size() != 2) throw ParseError("'" + path + "' must be a [lower, upper] pair");
  return {number(value[0], path + "[0]"), number(value[1], path + "[1]")};
}

StateBox parse_box(const json& value, const std::string& path, const NetworkTopology& topology) {
  if (!value.is_object()) throw ParseError("'" + path + "' must be an object");
  std::vector<std::optional<PipeBox>> boxes(topology.num_pipes());
  std::optional<PipeBox> fallback;
  for (const auto& item : value.items()) {
    const std::string where = join(path, item.key());
    check_keys(item.value(), where, {"p", "q"});
    if (!item.value().contains("p") || !item.value().contains("q"))
      throw ParseError("'" + where + "' needs both 'p' and 'q'");
    const auto [p_lo, p_hi] = interval(item.value()["p"], join(where, "p"));
    const auto [q_lo, q_hi] = interval(item.value()["q"], join(where, "q"));
    const PipeBox box{p_lo, p_hi, q_lo, q_hi};
    if (item.key() == "*") {
      fallback = box;
      continue;
    }
    std::size_t k = 0;
    try {
      k = topology.pipe_index(item.key());
    } catch (const ValidationError&) {
      throw ParseError("'" + where + "': unknown pipe");
    }
    boxes[k] = box;
  }
  StateBox out;
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    if (boxes[k]) out.pipes.push_back(*boxes[k]);
    else if (fallback) out.pipes.push_back(*fallback);
    else throw ParseError("'" + path + "' has no entry for pipe '" + topology.pipes[k].id + "' (use '*' for a default)");
  }
  return out;
}

std::vector<Perturbation> parse_perturbations(const json& value, const std::string& path,
                                              const NetworkTopology& topology) {
  if (!value.is_array()) throw ParseError("'" + path + "' must be an array");
  std::vector<Perturbation> out;
  for (std::size_t i = 0; i < value.size(); ++i) {
    const std::string where = path + "[" + std::to_string(i) + "]";
    const json& item = value[i];
    check_keys(item, where, {"pipe", "slot", "amplitude", "fraction", "shape", "cycles"});
    Perturbation p;
    if (!item.contains("pipe")) throw ParseError("missing key '" + join(where, "pipe") + "'");
    const std::string pipe = string(item["pipe"], join(where, "pipe"));
    try {
      p.pipe = topology.pipe_index(pipe);
    } catch (const ValidationError&) {
      throw ParseError("'" + join(where, "pipe") + "': unknown pipe '" + pipe + "'");
    }
    if (!item.contains("slot")) throw ParseError("missing key '" + join(where, "slot") + "'");
    const std::string slot = string(item["slot"], join(where, "slot"));
    if (slot != "pressure" && slot != "flux")
      throw ParseError("'" + join(where, "slot") + "' must be \"pressure\" or \"flux\"");
    p.pressure = slot == "pressure";
    const bool has_amplitude = item.contains("amplitude");
    const bool has_fraction = item.contains("fraction");
    if (has_amplitude == has_fraction)
      throw ParseError("'" + where + "' needs exactly one of 'amplitude' or 'fraction'");
    if (has_amplitude) p.amplitude = number(item["amplitude"], join(where, "amplitude"));
    if (has_fraction) p.fraction = number(item["fraction"], join(where, "fraction"));
    if (item.contains("shape")) {
      const std::string shape = string(item["shape"], join(where, "shape"));
      if (shape == "sine") p.shape = Shape::Sine;
      else if (shape == "smoothstep") p.shape = Shape::Smoothstep;
      else if (shape == "bump") p.shape = Shape::Bump;
      else throw ParseError("'" + join(where, "shape") + "' must be \"sine\", \"smoothstep\" or \"bump\"");
    }
    if (item.contains("cycles")) p.cycles = number(item["cycles"], join(where, "cycles"));
    if (!(p.cycles > 0.0)) throw ParseError("'" + join(where, "cycles") + "' must be positive");
    out.push_back(p);
  }
  return out;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& file) {
  const std::filesystem::path p(file);
  return p.is_absolute() ? p : base / p;
}

}  // namespace

Scenario parse_scenario(const json& doc, const std::filesystem::path& base_dir) {
  check_keys(doc, "", {"description", "network", "network_file", "entry_pressure", "entry_flux", "flux_pins",
                       "state_box", "inner_box", "constraint_box", "grid", "horizon", "time_steps", "picard", "control", "target",
                       "sigma", "eta", "kappa_u", "optimizer", "penalty", "homotopy", "seed"});
  Scenario sc;
  ProblemSpec& spec = sc.problem;

  if (doc.contains("network") == doc.contains("network_file"))
    throw ParseError("scenario needs exactly one of 'network' or 'network_file'");
  try {
    if (doc.contains("network")) {
      spec.topology = parse_network(doc["network"]);
    } else {
      spec.topology = parse_network(read_json(resolve(base_dir, string(doc["network_file"], "network_file"))));
    }
  } catch (const ParseError& e) {
    throw ParseError(std::string("network: ") + e.what());
  }

  if (doc.contains("entry_pressure")) spec.steady.entry_pressure = number_map(doc["entry_pressure"], "entry_pressure");
  if (doc.contains("entry_flux")) spec.steady.entry_flux = number_map(doc["entry_flux"], "entry_flux");
  if (doc.contains("flux_pins")) spec.steady.flux_pins = number_map(doc["flux_pins"], "flux_pins");

  if (!doc.contains("state_box")) throw ParseError("missing key 'state_box'");
  spec.box = parse_box(doc["state_box"], "state_box", spec.topology);
  if (doc.contains("inner_box")) spec.inner_box = parse_box(doc["inner_box"], "inner_box", spec.topology);
  if (doc.contains("constraint_box"))
    sc.constraint_box = parse_box(doc["constraint_box"], "constraint_box", spec.topology);

  if (!doc.contains("grid")) throw ParseError("missing key 'grid'");
  const json& grid = doc["grid"];
  check_keys(grid, "grid", {"nodes_per_meter", "per_pipe"});
  if (grid.contains("nodes_per_meter")) spec.resolution.nodes_per_meter = number(grid["nodes_per_meter"], "grid.nodes_per_meter");
  if (grid.contains("per_pipe")) {
    const json& per = grid["per_pipe"];
    spec.resolution.per_pipe.assign(spec.topology.num_pipes(), 0);
    if (per.is_array()) {
      if (per.size() != spec.topology.num_pipes()) throw ParseError("'grid.per_pipe' needs one entry per pipe");
      for (std::size_t k = 0; k < per.size(); ++k)
        spec.resolution.per_pipe[k] = integer(per[k], "grid.per_pipe[" + std::to_string(k) + "]");
    } else if (per.is_object()) {
      for (const auto& item : per.items()) {
        std::size_t k = 0;
        try {
          k = spec.topology.pipe_index(item.key());
        } catch (const ValidationError&) {
          throw ParseError("'grid.per_pipe." + item.key() + "': unknown pipe");
        }
        spec.resolution.per_pipe[k] = integer(item.value(), "grid.per_pipe." + item.key());
      }
      for (std::size_t k = 0; k < spec.resolution.per_pipe.size(); ++k)
        if (spec.resolution.per_pipe[k] == 0)
          throw ParseError("'grid.per_pipe' has no entry for pipe '" + spec.topology.pipes[k].id + "'");
    } else {
      throw ParseError("'grid.per_pipe' must be an array or an object");
    }
  }
  if (spec.resolution.per_pipe.empty() && !(spec.resolution.nodes_per_meter > 0.0))
    throw ParseError("'grid' needs a positive 'nodes_per_meter' or 'per_pipe'");

  spec.time.horizon = require_number(doc, "horizon", "");
  if (!doc.contains("time_steps")) throw ParseError("missing key 'time_steps'");
  spec.time.steps = integer(doc["time_steps"], "time_steps");

  if (doc.contains("picard")) {
    check_keys(doc["picard"], "picard", {"tol", "max_iters"});
    if (doc["picard"].contains("tol")) spec.picard.tol = number(doc["picard"]["tol"], "picard.tol");
    if (doc["picard"].contains("max_iters"))
      spec.picard.max_iters = static_cast<int>(integer(doc["picard"]["max_iters"], "picard.max_iters"));
  }
  if (doc.contains("eta")) spec.eta = number(doc["eta"], "eta");
  if (doc.contains("kappa_u")) spec.kappa_u = number(doc["kappa_u"], "kappa_u");

  if (doc.contains("control")) {
    const json& c = doc["control"];
    check_keys(c, "control", {"perturbations", "file", "enforce_bounds"});
    if (c.contains("perturbations") && c.contains("file"))
      throw ParseError("'control' takes either 'perturbations' or 'file'");
    if (c.contains("perturbations"))
      sc.control.perturbations = parse_perturbations(c["perturbations"], "control.perturbations", spec.topology);
    if (c.contains("file")) sc.control.file = resolve(base_dir, string(c["file"], "control.file"));
    if (c.contains("enforce_bounds")) {
      if (!c["enforce_bounds"].is_boolean()) throw ParseError("'control.enforce_bounds' must be a boolean");
      spec.enforce_control_bounds = c["enforce_bounds"].get<bool>();
    }
  }

  if (doc.contains("target")) {
    const json& t = doc["target"];
    check_keys(t, "target", {"constant", "trajectory_file", "manufactured"});
    if (t.size() != 1) throw ParseError("'target' takes exactly one of 'constant', 'trajectory_file', 'manufactured'");
    TargetSpec target;
    if (t.contains("constant")) {
      const json& c = t["constant"];
      if (c.is_string()) {
        if (c.get<std::string>() != "equilibrium")
          throw ParseError("'target.constant' must be \"equilibrium\" or an offset object");
        target.kind = TargetSpec::Kind::Equilibrium;
      } else {
        check_keys(c, "target.constant", {"p_offset", "q_offset"});
        target.kind = TargetSpec::Kind::Offset;
        if (c.contains("p_offset")) target.p_offset = number(c["p_offset"], "target.constant.p_offset");
        if (c.contains("q_offset")) target.q_offset = number(c["q_offset"], "target.constant.q_offset");
      }
    } else if (t.contains("trajectory_file")) {
      target.kind = TargetSpec::Kind::TrajectoryFile;
      target.file = resolve(base_dir, string(t["trajectory_file"], "target.trajectory_file"));
    } else {
      const json& m = t["manufactured"];
      check_keys(m, "target.manufactured", {"perturbations"});
      if (!m.contains("perturbations")) throw ParseError("missing key 'target.manufactured.perturbations'");
      target.kind = TargetSpec::Kind::Manufactured;
      target.perturbations = parse_perturbations(m["perturbations"], "target.manufactured.perturbations", spec.topology);
    }
    sc.target = target;
  }

  if (doc.contains("sigma")) sc.cost.sigma = number(doc["sigma"], "sigma");
  if (doc.contains("optimizer")) {
    const json& o = doc["optimizer"];
    check_keys(o, "optimizer", {"max_iters", "tol", "armijo_c", "max_backtracks", "kkt_samples", "tol_active",
                                       "direction", "memory"});
    auto& s = sc.cost.optimizer;
    if (o.contains("direction")) {
      const json& d = o["direction"];
      if (d == "gradient") s.direction = SearchDirection::Gradient;
      else if (d == "cg") s.direction = SearchDirection::ConjugateGradient;
      else if (d == "lbfgs") s.direction = SearchDirection::LBFGS;
      else throw ParseError("optimizer.direction must be \"gradient\", \"cg\" or \"lbfgs\"");
    }
    if (o.contains("memory")) s.memory = static_cast<int>(integer(o["memory"], "optimizer.memory"));
    if (o.contains("max_iters")) s.max_iters = static_cast<int>(integer(o["max_iters"], "optimizer.max_iters"));
    if (o.contains("tol")) s.tol = number(o["tol"], "optimizer.tol");
    if (o.contains("armijo_c")) s.armijo_c = number(o["armijo_c"], "optimizer.armijo_c");
    if (o.contains("max_backtracks"))
      s.max_backtracks = static_cast<int>(integer(o["max_backtracks"], "optimizer.max_backtracks"));
    if (o.contains("kkt_samples"))
      sc.cost.kkt_samples = static_cast<int>(integer(o["kkt_samples"], "optimizer.kkt_samples"));
    if (o.contains("tol_active")) sc.cost.tol_active = number(o["tol_active"], "optimizer.tol_active");
  }
  if (doc.contains("penalty")) {
    const json& p = doc["penalty"];
    check_keys(p, "penalty", {"rho0", "factor", "rho_max"});
    if (p.contains("rho0")) sc.cost.penalty.rho0 = number(p["rho0"], "penalty.rho0");
    if (p.contains("factor")) sc.cost.penalty.factor = number(p["factor"], "penalty.factor");
    if (p.contains("rho_max")) sc.cost.penalty.rho_max = number(p["rho_max"], "penalty.rho_max");
  }
  if (doc.contains("homotopy")) {
    const json& h = doc["homotopy"];
    check_keys(h, "homotopy", {"deltas"});
    if (!h.contains("deltas") || !h["deltas"].is_array()) throw ParseError("'homotopy.deltas' must be an array");
    for (std::size_t i = 0; i < h["deltas"].size(); ++i) {
      const double d = number(h["deltas"][i], "homotopy.deltas[" + std::to_string(i) + "]");
      if (!(d > 0.0)) throw ParseError("'homotopy.deltas[" + std::to_string(i) + "]' must be positive");
      sc.homotopy.push_back(d);
    }
  }
  if (doc.contains("seed")) {
    const long long seed = integer(doc["seed"], "seed");
    if (seed < 0) throw ParseError("'seed' must be nonnegative");
    sc.seed = static_cast<std::uint64_t>(seed);
  }
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  return parse_scenario(read_json(path), path.parent_path());
}

double shape_value(Shape shape, double cycles, double s) {
  switch (shape) {
    case Shape::Sine: return std::sin(2.0 * M_PI * cycles * s);
    case Shape::Smoothstep: {
      const double x = std::clamp(cycles * s, 0.0, 1.0);
      return x * x * (3.0 - 2.0 * x);
    }
    case Shape::Bump: {
      const double b = std::sin(M_PI * cycles * s);
      return b * b;
    }
  }
  return 0.0;
}

Matrix perturbation_control(const Problem& problem, const std::vector<Perturbation>& perturbations) {
  const auto& space = problem.controls();
  const auto& time = problem.time();
  Matrix r = space.zero();
  for (const auto& p : perturbations) {
    const std::size_t slot = p.pressure ? pressure_slot(p.pipe) : flux_slot(p.pipe);
    if (!space.active()[slot])
      throw ValidationError("pipe '" + problem.topology().pipes[p.pipe].id + "' has no " +
                            (p.pressure ? "pressure control (its start is not an entry vertex)"
                                        : "flux control (its end is not an exit vertex)"));
    const double amplitude = p.fraction ? *p.fraction * problem.kappa_u() : p.amplitude;
    for (Index j = 1; j <= time.steps; ++j)
      r(j, static_cast<Index>(slot)) += amplitude * shape_value(p.shape, p.cycles, time.time(j) / time.horizon);
  }
  return r;
}

ControlSignal build_control(const Scenario& scenario, const Problem& problem) {
  const auto& space = problem.controls();
  if (scenario.control.file) {
    ControlSignal c;
    c.time = problem.time();
    c.values = read_control_csv(*scenario.control.file, problem.time(), space.active());
    return c;
  }
  return space.full(perturbation_control(problem, scenario.control.perturbations));
}

Target build_target(const TargetSpec& spec, const Problem& problem) {
  const Vector& v_e = problem.equilibrium();
  switch (spec.kind) {
    case TargetSpec::Kind::Equilibrium: return Target::constant(v_e);
    case TargetSpec::Kind::Offset: {
      Vector v = v_e;
      for (const auto& g : problem.grid().pipes)
        for (Index i = 0; i <= g.intervals; ++i) {
          v[g.p(i)] += spec.p_offset;
          v[g.q(i)] += spec.q_offset;
        }
      return Target::constant(v);
    }
    case TargetSpec::Kind::TrajectoryFile:
      return Target{read_trajectory_csv(spec.file, problem.topology(), problem.grid(), problem.time())};
    case TargetSpec::Kind::Manufactured: {
      const ControlSignal c = problem.controls().full(perturbation_control(problem, spec.perturbations));
      const Trajectory traj = picard_solve(problem, c);
      if (traj.truncated) throw ValidationError("manufactured target: forward solve left the r-ball");
      return Target{traj.states};
    }
  }
  return Target::constant(v_e);
}

}  // namespace gasnet
