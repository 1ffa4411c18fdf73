#pragma once

#include "gasnet/optimize.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gasnet {

struct VerifyOptions {
  std::uint64_t seed = 0;
  int samples = 20;        // random states for the operator checks
  int green_instances = 3;
  int fd_controls = 2;
  int fd_directions = 2;
  int lipschitz_pairs = 1000;
  double fd_epsilon = 1e-4;
};

struct CheckResult {
  std::string name;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

/// Skew-adjointness, projector idempotence, Green identity, gradient vs
/// finite differences, friction Lipschitz ratio, steady-state ODE residual.
std::vector<CheckResult> run_verify(const Problem& problem, const CostConfig& config,
                                    const VerifyOptions& options);

/// max |(A_h z, z)_M| / ||z||_M^2 over random z in range(Pi).
double skew_defect(const DiscreteModel& model, std::uint64_t seed, int samples);

/// max ||Pi Pi x - Pi x||_M / ||x||_M over random x.
double projector_defect(const DiscreteModel& model, std::uint64_t seed, int samples);

/// Largest sampled ||F(w1) - F(w2)||_M / ||w1 - w2||_M over box-valued pairs,
/// and the analytic bound it is compared with.
struct LipschitzSample {
  double max_ratio = 0.0;
  double bound = 0.0;
};
LipschitzSample lipschitz_sample(const Problem& problem, std::uint64_t seed, int pairs);

/// Largest relative residual of p' = -gamma p - beta q|q|/p along each pipe of
/// the closed-form equilibrium, by fourth-order central differences.
double steady_ode_residual(const SteadyState& steady, int points_per_pipe = 64);

/// Relative error |fd - <g, h>| / max(|fd|, |<g, h>|) of one central
/// finite-difference gradient check.
double gradient_fd_error(const Objective& objective, const Matrix& reduced, const Matrix& direction,
                         double epsilon);

}  // namespace gasnet
