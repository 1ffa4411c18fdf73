#pragma once

#include "gasnet/optimize.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>

namespace gasnet {

enum class Shape { Sine, Smoothstep, Bump };

/// One boundary perturbation added to the equilibrium control:
/// amplitude * shape(t / T) on the pressure or flux slot of a pipe.
struct Perturbation {
  std::size_t pipe = 0;
  bool pressure = true;
  double amplitude = 0.0;
  /// When set, amplitude is this fraction of kappa_u.
  std::optional<double> fraction;
  Shape shape = Shape::Sine;
  double cycles = 1.0;
};

struct ControlSpec {
  std::vector<Perturbation> perturbations;
  std::optional<std::filesystem::path> file;
};

struct TargetSpec {
  enum class Kind { Equilibrium, Offset, TrajectoryFile, Manufactured };
  Kind kind = Kind::Equilibrium;
  double p_offset = 0.0;
  double q_offset = 0.0;
  std::filesystem::path file;
  std::vector<Perturbation> perturbations;
};

struct Scenario {
  ProblemSpec problem;
  ControlSpec control;
  std::optional<TargetSpec> target;
  /// State constraints seen by optimize; the suitability box when absent.
  std::optional<StateBox> constraint_box;
  CostConfig cost;  // target filled by build_target
  std::vector<double> homotopy;
  std::uint64_t seed = 0;
};

/// Throws ParseError naming the offending key path for unknown or mistyped
/// keys; relative file references resolve against `base_dir`.
Scenario parse_scenario(const nlohmann::json& document, const std::filesystem::path& base_dir);
Scenario load_scenario(const std::filesystem::path& path);

double shape_value(Shape shape, double cycles, double s);

/// Reduced control (offset from the equilibrium control) of a perturbation list.
Matrix perturbation_control(const Problem& problem, const std::vector<Perturbation>& perturbations);

ControlSignal build_control(const Scenario& scenario, const Problem& problem);

/// Resolves the target; a manufactured target costs one forward solve.
Target build_target(const TargetSpec& spec, const Problem& problem);

}  // namespace gasnet
