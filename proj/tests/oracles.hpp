#pragma once

// Independent reference computations and hand-rolled generators for tests.
// Nothing here calls the library routine it is used to check.

#include "gasnet/problem.hpp"
#include "gasnet/scenario.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace oracle {

using gasnet::Index;
using gasnet::Matrix;
using gasnet::Vector;

inline std::string source_path(const std::string& relative) { return std::string(GASNET_SOURCE_DIR) + "/" + relative; }

struct Rng {
  std::mt19937_64 engine;

  explicit Rng(std::uint64_t seed) : engine(seed) {}
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(engine); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine); }
  int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(engine); }
  bool coin(double p = 0.5) { return uniform(0.0, 1.0) < p; }
};

struct TreeOptions {
  int min_vertices = 2;
  int max_vertices = 7;
  bool frictionless = false;
  bool horizontal = false;
  /// Probability that a leaf pipe is reversed into an extra entry.
  double extra_entry = 0.3;
};

/// Random tree rooted at v0 with pipes oriented away from the root; v0 has
/// degree one so it is an entry. Nondimensional units c = g = 1.
inline gasnet::NetworkTopology random_tree(Rng& rng, const TreeOptions& opt = {}) {
  gasnet::NetworkTopology t;
  t.constants.sound_speed = 1.0;
  t.constants.gravity = 1.0;
  const int n = rng.integer(opt.min_vertices, opt.max_vertices);
  for (int v = 0; v < n; ++v) t.vertices.push_back("v" + std::to_string(v));
  std::vector<int> parent(static_cast<std::size_t>(n), -1);
  std::vector<int> children(static_cast<std::size_t>(n), 0);
  for (int v = 1; v < n; ++v) {
    parent[static_cast<std::size_t>(v)] = v == 1 ? 0 : rng.integer(1, v - 1);
    ++children[static_cast<std::size_t>(parent[static_cast<std::size_t>(v)])];
  }
  for (int v = 1; v < n; ++v) {
    const int u = parent[static_cast<std::size_t>(v)];
    const bool leaf = children[static_cast<std::size_t>(v)] == 0;
    // Reversing a leaf pipe makes the leaf an entry feeding an inner node.
    const bool reverse = leaf && u != 0 && rng.coin(opt.extra_entry);
    gasnet::Pipe p;
    p.id = "e" + std::to_string(v);
    p.from = reverse ? t.vertices[static_cast<std::size_t>(v)] : t.vertices[static_cast<std::size_t>(u)];
    p.to = reverse ? t.vertices[static_cast<std::size_t>(u)] : t.vertices[static_cast<std::size_t>(v)];
    const double length = rng.uniform(0.5, 1.5);
    const double diameter = rng.uniform(0.6, 1.2);
    const double friction = opt.frictionless ? 0.0 : rng.uniform(0.02, 0.15);
    const double incl = opt.horizontal ? 0.0 : rng.uniform(-0.08, 0.08);
    p.params = gasnet::make_pipe_parameters(length, diameter, friction, incl, t.constants, p.id);
    t.pipes.push_back(p);
  }
  return t;
}

struct ProblemOptions {
  TreeOptions tree;
  int min_intervals = 4;
  int max_intervals = 10;
  double horizon = 0.5;
  Index steps = 20;
};

/// Random problem on a random tree. Entry fluxes are random, the root gets
/// the only entry pressure, and per-pipe boxes are built around the
/// resulting equilibrium so that the instance is suitable. Redraws on
/// steady-state failures.
inline gasnet::ProblemSpec random_problem_spec(Rng& rng, const ProblemOptions& opt = {}) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    gasnet::ProblemSpec spec;
    spec.topology = random_tree(rng, opt.tree);
    const auto classes = gasnet::classify_vertices(spec.topology);
    for (auto v : classes.entry) spec.steady.entry_flux[spec.topology.vertices[v]] = rng.uniform(0.2, 0.5);
    spec.steady.entry_pressure["v0"] = rng.uniform(2.0, 3.0);
    gasnet::SteadyState steady;
    try {
      steady = gasnet::compute_steady_state(spec.topology, classes, spec.steady);
    } catch (const gasnet::Error&) {
      continue;
    }
    double p_in_max = 0.0;
    for (double p : steady.p_in) p_in_max = std::max(p_in_max, p);
    for (std::size_t k = 0; k < spec.topology.num_pipes(); ++k) {
      const double p_min = std::min(steady.p_in[k], steady.p_out[k]);
      gasnet::PipeBox b;
      b.p_lo = 0.5 * p_min;
      b.p_hi = b.p_lo + p_in_max + 0.5;
      b.q_lo = 0.5 * steady.q_e[k];
      b.q_hi = 1.5 * steady.q_e[k] + 0.1;
      spec.box.pipes.push_back(b);
      spec.resolution.per_pipe.push_back(rng.integer(opt.min_intervals, opt.max_intervals));
    }
    spec.time = {opt.horizon, opt.steps};
    spec.picard.tol = 1e-13;
    return spec;
  }
  throw std::runtime_error("random_problem_spec: no valid draw");
}

/// Steady pressure by classical RK4 on p' = -gamma p - beta q|q|/p.
inline double steady_pressure_rk4(double beta, double gamma, double p_in, double q, double x, int steps = 4000) {
  const auto f = [&](double p) { return -gamma * p - beta * q * std::abs(q) / p; };
  const double h = x / steps;
  double p = p_in;
  for (int i = 0; i < steps; ++i) {
    const double k1 = f(p);
    const double k2 = f(p + 0.5 * h * k1);
    const double k3 = f(p + 0.5 * h * k2);
    const double k4 = f(p + h * k3);
    p += h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0;
  }
  return p;
}

/// Dense second-order summation-by-parts first derivative on N intervals.
inline Matrix sbp_derivative(Index N, double h) {
  Matrix D = Matrix::Zero(N + 1, N + 1);
  D(0, 0) = -1.0 / h;
  D(0, 1) = 1.0 / h;
  D(N, N - 1) = -1.0 / h;
  D(N, N) = 1.0 / h;
  for (Index i = 1; i < N; ++i) {
    D(i, i - 1) = -0.5 / h;
    D(i, i + 1) = 0.5 / h;
  }
  return D;
}

/// Trapezoid norm matrix on N intervals.
inline Matrix sbp_norm(Index N, double h) {
  Matrix H = Matrix::Identity(N + 1, N + 1) * h;
  H(0, 0) = H(N, N) = 0.5 * h;
  return H;
}

/// Discrete H2(0,T) inner product by direct summation over one column:
/// trapezoid L2 + forward-difference L2 + second-difference L2, phi(0) = 0.
inline double h2_inner_column(const Vector& a, const Vector& b, double tau) {
  const Index M = a.size() - 1;
  double s = 0.0;
  for (Index j = 1; j <= M; ++j) s += (j == M ? 0.5 : 1.0) * tau * a[j] * b[j];
  for (Index j = 0; j < M; ++j) s += tau * ((a[j + 1] - a[j]) / tau) * ((b[j + 1] - b[j]) / tau);
  for (Index j = 1; j < M; ++j) {
    const double da = (a[j + 1] - 2 * a[j] + a[j - 1]) / (tau * tau);
    const double db = (b[j + 1] - 2 * b[j] + b[j - 1]) / (tau * tau);
    s += tau * da * db;
  }
  return s;
}

inline double h2_inner(const Matrix& a, const Matrix& b, double tau, const std::vector<bool>& active) {
  double s = 0.0;
  for (Index c = 0; c < a.cols(); ++c)
    if (active[static_cast<std::size_t>(c)]) {
      Vector ca = a.col(c), cb = b.col(c);
      ca[0] = cb[0] = 0.0;
      s += h2_inner_column(ca, cb, tau);
    }
  return s;
}

/// Central difference of a scalar function of one variable.
inline double central_difference(const std::function<double(double)>& f, double eps) {
  return (f(eps) - f(-eps)) / (2.0 * eps);
}

/// Weighted inner product with explicit weights.
inline double weighted_dot(const Vector& u, const Vector& v, const Vector& w) {
  return (u.array() * v.array() * w.array()).sum();
}

/// Dense implicit midpoint step (I - tau/2 K) y1 = (I + tau/2 K) y0 + rhs.
inline Vector dense_midpoint_step(const Matrix& K, double tau, const Vector& y0, const Vector& rhs) {
  const Matrix I = Matrix::Identity(K.rows(), K.cols());
  return (I - 0.5 * tau * K).partialPivLu().solve((I + 0.5 * tau * K) * y0 + rhs);
}

/// Tracking cost by its definition: 1/2 sum_n tau ||(e_n + e_{n+1})/2||_M^2.
inline double tracking_cost(const Vector& mass, const std::vector<Vector>& states, const Vector& target,
                            double tau) {
  double s = 0.0;
  for (std::size_t n = 0; n + 1 < states.size(); ++n) {
    const Vector e = 0.5 * (states[n] + states[n + 1]) - target;
    s += tau * weighted_dot(e, e, mass);
  }
  return 0.5 * s;
}

/// Box-penalty multiplier of one violated point: 2 rho tau_j w_i viol.
inline double penalty_multiplier(double rho, double tau_j, double w_i, double violation) {
  return violation > 0.0 ? 2.0 * rho * tau_j * w_i * violation : 0.0;
}

/// A smooth reduced control built without library helpers: sin^2 bumps per
/// active slot with amplitude `amp`.
inline Matrix bump_control(const gasnet::TimeGrid& time, const std::vector<bool>& active, double amp, double phase) {
  Matrix r = Matrix::Zero(time.steps + 1, static_cast<Index>(active.size()));
  for (Index s = 0; s < r.cols(); ++s) {
    if (!active[static_cast<std::size_t>(s)]) continue;
    for (Index j = 1; j <= time.steps; ++j) {
      const double t = time.time(j) / time.horizon;
      const double w = std::sin(std::numbers::pi * t * (1.0 + 0.3 * static_cast<double>(s)) + phase * t);
      r(j, s) = amp * w * w * ((s % 2) ? -1.0 : 1.0);
    }
  }
  return r;
}

}  // namespace oracle
