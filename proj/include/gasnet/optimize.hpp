#pragma once

#include "gasnet/adjoint.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace gasnet {

enum class SearchDirection { Gradient, ConjugateGradient, LBFGS };

struct OptimizerSettings {
  /// Gradient: Barzilai-Borwein trial steps along -g. ConjugateGradient:
  /// Polak-Ribiere+ directions in the H2 metric, restarted whenever the
  /// projection clips a step or the direction stops descending. LBFGS:
  /// limited-memory BFGS in the H2 metric with the same restart rule.
  SearchDirection direction = SearchDirection::LBFGS;
  int memory = 10;
  int max_iters = 200;
  /// Stop when the projected gradient ||Phi - P(Phi - g)||_{H2} is at most tol.
  double tol = 1e-6;
  double armijo_c = 1e-4;
  int max_backtracks = 40;
};

/// Quadratic penalty weights rho0, rho0*factor, ... up to rho_max.
struct PenaltySchedule {
  double rho0 = 1.0;
  double factor = 10.0;
  double rho_max = 1e6;
};

struct CostConfig {
  Target target;
  double sigma = 1e-3;
  OptimizerSettings optimizer;
  PenaltySchedule penalty;
  /// Active-set tolerance relative to the face width.
  double tol_active = 1e-6;
  /// Number of sampled directions for the variational-inequality residual.
  int kkt_samples = 100;
};

/// One forward (and optionally adjoint) evaluation of the penalized cost.
struct Evaluation {
  Matrix reduced;
  ControlSignal control;
  Trajectory trajectory;
  double rho = 0.0;
  double tracking = 0.0;
  double regularization = 0.0;
  double penalty = 0.0;
  /// Riesz representer in the H2 control space of the penalized cost.
  Matrix gradient;
  bool has_gradient = false;

  double cost() const { return tracking + regularization; }
  double penalized() const { return tracking + regularization + penalty; }
};

/// Tracking cost + Tikhonov term + box penalty for one problem instance.
class Objective {
 public:
  Objective(const Problem& problem, const CostConfig& config, ConstraintBounds bounds);

  const Problem& problem() const { return *problem_; }
  const CostConfig& config() const { return config_; }
  const ConstraintBounds& bounds() const { return bounds_; }

  /// Throws on forward failures (including horizon truncation when gradients are requested).
  Evaluation evaluate(const Matrix& reduced, double rho, bool with_gradient) const;

  /// rho sum_{j>=1} tau_j sum_i w_i viol_i^2 with trapezoid weights in time and space.
  double penalty(const Trajectory& trajectory, double rho) const;
  /// Derivatives of penalty() with respect to each state sample.
  std::vector<Vector> penalty_sources(const Trajectory& trajectory, double rho) const;
  /// Pointwise multiplier 2 rho tau_j w_i viol_i (zero where feasible).
  double multiplier(Index sample, Index index, double violation, double rho) const;

 private:
  const Problem* problem_;
  CostConfig config_;
  ConstraintBounds bounds_;
  Vector space_weights_;
};

/// J(Phi) = 1/2 int ||S(Phi) - v_d||_M^2 + sigma/2 ||Phi - Phi^e||_{H2}^2.
double cost(const Problem& problem, const ControlSignal& control, const CostConfig& config);

/// H2 Riesz representer of J'(Phi) (no penalty term).
Matrix riesz_gradient(const Problem& problem, const ControlSignal& control, const CostConfig& config);

/// Smooth random reduced control: a few random sine modes per active slot,
/// vanishing at t = 0, radially scaled to `fraction` of the admissible set.
Matrix random_reduced_control(const ControlSpace& space, std::mt19937_64& rng, double fraction);

struct IterationRecord {
  int iteration = 0;
  int stage = 0;
  double rho = 0.0;
  double cost = 0.0;
  double penalized = 0.0;
  double penalty = 0.0;
  double gradient_norm = 0.0;
  double step = 0.0;
  double step_norm = 0.0;
  int backtracks = 0;
  double min_margin = 0.0;
  int picard_iters = 0;
  double max_contraction = 0.0;
};

struct Multiplier {
  Index sample = 0;
  std::size_t pipe = 0;
  Index node = 0;
  int component = 0;
  int face = 0;
  double margin = 0.0;
  double value = 0.0;
};

struct KKTReport {
  double gradient_norm = 0.0;
  std::vector<Multiplier> multipliers;
  double complementarity = 0.0;
  double zeta = 1.0;
  double vi_residual = 0.0;
  /// Best minimum box margin of S(Phi*) + S'(Phi*, h) over the sampled h.
  double rzk_margin = 0.0;
};

enum class OptimizationStatus { Converged, MaxIterations, LineSearchStalled, HorizonLimited };

const char* to_string(OptimizationStatus status);

struct OptimizationReport {
  OptimizationStatus status = OptimizationStatus::MaxIterations;
  int iterations = 0;  // accepted steps over all stages
  std::vector<IterationRecord> history;
  double initial_cost = 0.0;
  Evaluation final;
  KKTReport kkt;
  MarginReport margins;
  double delta = 1.0;
  bool target_interior = true;
};

/// Projected descent with Armijo backtracking (halving) on the penalized
/// cost, a quadratic-interpolation refinement of accepted steps, and an
/// escalating penalty weight.
OptimizationReport optimize(const Problem& problem, const CostConfig& config, std::uint64_t seed = 0);
OptimizationReport optimize(const Problem& problem, const CostConfig& config, const ConstraintBounds& bounds,
                            std::uint64_t seed);

struct HomotopyRun {
  double delta = 1.0;
  bool ok = false;
  std::string error;
  OptimizationReport report;
};

/// Runs optimize on the boxes (1 - delta) v_e + delta box, one per delta.
std::vector<HomotopyRun> delta_homotopy(const Problem& problem, const CostConfig& config,
                                        const std::vector<double>& deltas, std::uint64_t seed = 0);
std::vector<HomotopyRun> delta_homotopy(const Problem& problem, const CostConfig& config,
                                        const ConstraintBounds& bounds, const std::vector<double>& deltas,
                                        std::uint64_t seed = 0);

/// min over sampled feasible directions d = Phi - Phi* of <g_pen(Phi*), d>_{H2}
/// (zeta = 1, penalty multipliers included); 0 means stationary.
double kkt_residual(const Objective& objective, const Evaluation& at, std::uint64_t seed, int samples,
                    double* rzk_margin = nullptr);

/// Whether every sample of the target lies strictly inside the bounds.
bool target_interior(const Target& target, const ConstraintBounds& bounds, Index steps);

}  // namespace gasnet
