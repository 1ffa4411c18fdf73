#pragma once

#include "gasnet/optimize.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>

namespace gasnet {

/// Shortest round-trip decimal form; throws Error on NaN or Inf.
std::string format_number(double value);

/// Replaces every non-finite number by null so the document stays valid JSON.
nlohmann::json sanitize(nlohmann::json document);

void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const nlohmann::json& document);
nlohmann::json read_json(const std::filesystem::path& path);

/// Columns t,pipe,x,p,q; one row per sample, pipe and node.
std::string trajectory_csv(const NetworkTopology& topology, const Grid& grid, const std::vector<Vector>& states,
                           double step);
/// Columns t,picard_iters,delta,kirchhoff_max,rball_dist,box_margin.
std::string diagnostics_csv(const Trajectory& trajectory);
/// Columns t,slot,value with 1-based slot indices; active slots only.
std::string control_csv(const ControlSignal& control, const std::vector<bool>& active);
/// Columns t,pipe,x,p,q of the physical adjoint states.
std::string adjoint_csv(const NetworkTopology& topology, const Grid& grid, const AdjointTrajectory& adjoint,
                        double step);
std::string iterations_csv(const std::vector<IterationRecord>& history);

/// Reads a control file in control_csv format. Every active slot needs a
/// value at every time sample; unlisted inactive slots are zero.
Matrix read_control_csv(const std::filesystem::path& path, const TimeGrid& time, const std::vector<bool>& active);

/// Reads a trajectory file in trajectory_csv format onto `grid`.
std::vector<Vector> read_trajectory_csv(const std::filesystem::path& path, const NetworkTopology& topology,
                                        const Grid& grid, const TimeGrid& time);

}  // namespace gasnet
