#include "gasnet/discrete.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace gasnet {

namespace {

using Triplet = Eigen::Triplet<double>;

SparseMatrix from_triplets(Index rows, Index cols, const std::vector<Triplet>& triplets) {
  SparseMatrix m(rows, cols);
  m.setFromTriplets(triplets.begin(), triplets.end());
  m.makeCompressed();
  return m;
}

}  // namespace

std::vector<Vector> Grid::positions() const {
  std::vector<Vector> out;
  out.reserve(pipes.size());
  for (const auto& p : pipes) out.push_back(p.positions);
  return out;
}

Grid build_grid(const NetworkTopology& topology, const GridResolution& resolution) {
  const std::size_t m = topology.num_pipes();
  if (!resolution.per_pipe.empty() && resolution.per_pipe.size() != m)
    throw ValidationError("grid: per_pipe needs one entry per pipe");
  if (resolution.per_pipe.empty() && !(resolution.nodes_per_meter > 0.0))
    throw ValidationError("grid: nodes_per_meter must be positive");

  Grid grid;
  Index offset = 0;
  for (std::size_t k = 0; k < m; ++k) {
    const double L = topology.pipes[k].params.length;
    const Index N = resolution.per_pipe.empty()
                        ? static_cast<Index>(std::llround(L * resolution.nodes_per_meter))
                        : resolution.per_pipe[k];
    if (N < 4)
      throw ValidationError("grid: pipe '" + topology.pipes[k].id + "' needs at least 4 intervals, got " +
                            std::to_string(N));
    PipeGrid pg;
    pg.intervals = N;
    pg.length = L;
    pg.spacing = L / static_cast<double>(N);
    pg.offset = offset;
    pg.positions.resize(N + 1);
    for (Index i = 0; i <= N; ++i) pg.positions[i] = L * static_cast<double>(i) / static_cast<double>(N);
    pg.positions[N] = L;
    pg.weights = Vector::Constant(N + 1, pg.spacing);
    pg.weights[0] = pg.weights[N] = 0.5 * pg.spacing;
    offset += 2 * (N + 1);
    grid.pipes.push_back(std::move(pg));
  }
  grid.size = offset;
  return grid;
}

double friction_lipschitz_bound(double beta, double sound_speed, double p_lo, double p_hi,
                                double q_lo, double q_hi) {
  (void)p_hi;
  // Mean-value bound: |df| <= (beta Q^2/a^2)|dp| + (2 beta Q/a)|dq| with
  // Q = max|q|; Cauchy-Schwarz against the weights (1, c^2).
  const double Q = std::max(std::abs(q_lo), std::abs(q_hi));
  const double a = p_lo;
  const double dp = beta * Q * Q / (a * a);
  const double dq = 2.0 * beta * Q / a;
  return std::sqrt(sound_speed * sound_speed * dp * dp + dq * dq);
}

DiscreteModel::DiscreteModel(const NetworkTopology& topology, const Grid& grid, ModelOptions options)
    : topology_(topology), classes_(classify_vertices(topology)), grid_(grid), options_(options) {
  if (grid_.pipes.size() != topology_.num_pipes())
    throw ValidationError("grid and network have different pipe counts");
  active_ = active_control_slots(topology_, classes_);
  assemble_mass();
  assemble_transport();
  assemble_constraints();
  assemble_boundary();
}

Index DiscreteModel::end_node(std::size_t pipe, std::size_t vertex) const {
  return classes_.xi(pipe, vertex) == -1 ? 0 : grid_.pipes[pipe].intervals;
}

void DiscreteModel::assemble_mass() {
  const double c2 = topology_.constants.sound_speed * topology_.constants.sound_speed;
  mass_.resize(grid_.size);
  for (std::size_t k = 0; k < grid_.pipes.size(); ++k) {
    const auto& g = grid_.pipes[k];
    const double d2 = topology_.pipes[k].params.diameter * topology_.pipes[k].params.diameter;
    for (Index i = 0; i < g.nodes(); ++i) {
      mass_[g.p(i)] = g.weights[i] * d2;
      mass_[g.q(i)] = g.weights[i] * d2 * c2;
    }
  }
}

void DiscreteModel::assemble_transport() {
  const double c2 = topology_.constants.sound_speed * topology_.constants.sound_speed;
  std::vector<Triplet> a, p;
  source_bound_ = 0.0;
  for (std::size_t k = 0; k < grid_.pipes.size(); ++k) {
    const auto& g = grid_.pipes[k];
    const Index N = g.intervals;
    const double inv_h = 1.0 / g.spacing;
    // Summation-by-parts first derivative: centered interior, one-sided ends.
    for (Index i = 0; i <= N; ++i) {
      std::vector<std::pair<Index, double>> stencil;
      if (i == 0) {
        stencil = {{0, -inv_h}, {1, inv_h}};
      } else if (i == N) {
        stencil = {{N - 1, -inv_h}, {N, inv_h}};
      } else {
        stencil = {{i - 1, -0.5 * inv_h}, {i + 1, 0.5 * inv_h}};
      }
      for (const auto& [j, w] : stencil) {
        a.emplace_back(g.p(i), g.q(j), -c2 * w);
        a.emplace_back(g.q(i), g.p(j), -w);
      }
      p.emplace_back(g.q(i), g.p(i), -topology_.pipes[k].params.gamma);
    }
    source_bound_ = std::max(source_bound_, topology_.constants.sound_speed *
                                                std::abs(topology_.pipes[k].params.gamma));
  }
  if (options_.transport_defect != 0.0 && !grid_.pipes.empty()) {
    const auto& g = grid_.pipes.front();
    a.emplace_back(g.p(1), g.p(1), options_.transport_defect / g.spacing);
  }
  transport_ = from_triplets(grid_.size, grid_.size, a);
  source_ = from_triplets(grid_.size, grid_.size, p);
}

void DiscreteModel::assemble_constraints() {
  const std::size_t n = topology_.num_vertices();
  std::vector<Triplet> e;
  Index col = 0;

  // Shared pressure unknown per inner vertex.
  std::vector<Index> shared_pressure(n, -1);
  for (auto v : classes_.inner) shared_pressure[v] = col++;
  for (auto v : classes_.inner)
    for (auto k : classes_.incident_pipes[v])
      e.emplace_back(grid_.p_index(k, end_node(k, v)), shared_pressure[v], 1.0);

  // Kirchhoff: the last incident end of each inner vertex is dependent.
  std::vector<bool> kirchhoff_end(static_cast<std::size_t>(grid_.size), false);
  for (auto v : classes_.inner) {
    const auto& kappa = classes_.incident_pipes[v];
    const auto last = kappa.back();
    const double a_last = classes_.xi(last, v) * topology_.pipes[last].params.diameter *
                          topology_.pipes[last].params.diameter;
    const Index q_last = grid_.q_index(last, end_node(last, v));
    kirchhoff_end[static_cast<std::size_t>(q_last)] = true;
    for (std::size_t j = 0; j + 1 < kappa.size(); ++j) {
      const auto k = kappa[j];
      const double a_k = classes_.xi(k, v) * topology_.pipes[k].params.diameter *
                         topology_.pipes[k].params.diameter;
      const Index q_k = grid_.q_index(k, end_node(k, v));
      kirchhoff_end[static_cast<std::size_t>(q_k)] = true;
      e.emplace_back(q_k, col, 1.0);
      e.emplace_back(q_last, col, -a_k / a_last);
      ++col;
    }
  }

  // Remaining samples are free unless pinned to zero by a controlled boundary.
  for (std::size_t k = 0; k < grid_.pipes.size(); ++k) {
    const auto& g = grid_.pipes[k];
    const auto start = topology_.vertex_index(topology_.pipes[k].from);
    const auto end = topology_.vertex_index(topology_.pipes[k].to);
    for (Index i = 0; i <= g.intervals; ++i) {
      const bool at_start = i == 0;
      const bool at_end = i == g.intervals;
      const bool p_shared = (at_start && classes_.is_inner[start]) || (at_end && classes_.is_inner[end]);
      const bool p_zero = at_start && classes_.is_entry[start];
      if (!p_shared && !p_zero) e.emplace_back(g.p(i), col++, 1.0);
      const bool q_zero = at_end && classes_.is_exit[end];
      if (!kirchhoff_end[static_cast<std::size_t>(g.q(i))] && !q_zero) e.emplace_back(g.q(i), col++, 1.0);
    }
  }
  basis_ = from_triplets(grid_.size, col, e);

  const SparseMatrix et_m = SparseMatrix(basis_.transpose()) * mass_.asDiagonal();
  gram_ = et_m * basis_;
  gram_factor_.compute(gram_);
  if (gram_factor_.info() != Eigen::Success)
    throw ValidationError("singular constraint assembly (Gram matrix of the constraint basis)");
  restriction_ = gram_factor_.solve(et_m);
  restriction_.prune(0.0);
  projector_ = basis_ * restriction_;
  skew_ = projector_ * transport_ * projector_;
  reduced_ = restriction_ * (transport_ + source_) * basis_;
  reduced_.prune(0.0);
}

void DiscreteModel::assemble_boundary() {
  const double c2 = topology_.constants.sound_speed * topology_.constants.sound_speed;
  std::vector<Triplet> b1, b0;
  for (std::size_t k = 0; k < grid_.pipes.size(); ++k) {
    const auto& g = grid_.pipes[k];
    const Index sp = static_cast<Index>(pressure_slot(k));
    const Index sq = static_cast<Index>(flux_slot(k));
    for (Index i = 0; i <= g.intervals; ++i) {
      const double x = g.positions[i];
      b1.emplace_back(g.p(i), sp, (g.length - x) / g.length);
      b1.emplace_back(g.q(i), sq, x / g.length);
      b0.emplace_back(g.p(i), sq, -c2 / g.length);
      b0.emplace_back(g.q(i), sp, 1.0 / g.length);
    }
  }
  lift_ = from_triplets(grid_.size, num_slots(), b1);
  lift_.prune(0.0);
  b0_ = from_triplets(grid_.size, num_slots(), b0);
}

double DiscreteModel::inner(const Vector& u, const Vector& v) const {
  if (u.size() != grid_.size || v.size() != grid_.size)
    throw ValidationError("inner product: state size mismatch");
  return (u.array() * mass_.array() * v.array()).sum();
}

double DiscreteModel::reduced_norm(const Vector& y) const {
  return std::sqrt(std::max(0.0, y.dot(gram_ * y)));
}

Vector DiscreteModel::gram_solve(const Vector& b) const { return gram_factor_.solve(b); }

Vector DiscreteModel::lift_boundary(const Vector& phi) const {
  if (phi.size() != num_slots()) throw ValidationError("lift_boundary: expected one value per slot");
  for (Index s = 0; s < phi.size(); ++s)
    if (!active_[static_cast<std::size_t>(s)] && phi[s] != 0.0)
      throw ValidationError("lift_boundary: nonzero value in inactive control slot " + std::to_string(s + 1));
  return lift_ * phi;
}

Vector DiscreteModel::boundary_forcing(const Vector& phi, const Vector& phi_prime) const {
  const Vector lifted = lift_boundary(phi);
  const Vector lifted_rate = lift_boundary(phi_prime);
  return b0_ * phi + source_ * lifted - lifted_rate;
}

void DiscreteModel::check_vacuum(const Vector& v) const {
  for (std::size_t k = 0; k < grid_.pipes.size(); ++k) {
    const auto& g = grid_.pipes[k];
    for (Index i = 0; i <= g.intervals; ++i) {
      const double p = v[g.p(i)];
      if (!(p > options_.pressure_floor)) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "vacuum guard: pressure " << p << " at pipe '" << topology_.pipes[k].id << "' node " << i
            << " is not above the floor " << options_.pressure_floor;
        throw SolverError(SolverError::Kind::VacuumGuard, msg.str());
      }
    }
  }
}

Vector DiscreteModel::nonlinearity(const Vector& v) const {
  check_vacuum(v);
  Vector f = Vector::Zero(grid_.size);
  for (std::size_t k = 0; k < grid_.pipes.size(); ++k) {
    const auto& g = grid_.pipes[k];
    const double beta = topology_.pipes[k].params.beta;
    for (Index i = 0; i <= g.intervals; ++i) f[g.q(i)] = friction_term(beta, v[g.p(i)], v[g.q(i)]);
  }
  return f;
}

StateJacobian DiscreteModel::nonlinearity_jacobian(const Vector& v) const {
  check_vacuum(v);
  const double c2 = topology_.constants.sound_speed * topology_.constants.sound_speed;
  std::vector<Triplet> fw, adj;
  for (std::size_t k = 0; k < grid_.pipes.size(); ++k) {
    const auto& g = grid_.pipes[k];
    const double beta = topology_.pipes[k].params.beta;
    if (beta == 0.0) continue;
    for (Index i = 0; i <= g.intervals; ++i) {
      const auto d = friction_gradient(beta, v[g.p(i)], v[g.q(i)]);
      fw.emplace_back(g.q(i), g.p(i), d[0]);
      fw.emplace_back(g.q(i), g.q(i), d[1]);
      // M^{-1} J^T M: the (p,q) entry picks up the weight ratio c^2.
      adj.emplace_back(g.p(i), g.q(i), c2 * d[0]);
      adj.emplace_back(g.q(i), g.q(i), d[1]);
    }
  }
  return {from_triplets(grid_.size, grid_.size, fw), from_triplets(grid_.size, grid_.size, adj)};
}

Vector DiscreteModel::kirchhoff_residual(const Vector& v) const {
  Vector r = Vector::Zero(static_cast<Index>(classes_.inner.size()));
  for (std::size_t j = 0; j < classes_.inner.size(); ++j) {
    const auto vertex = classes_.inner[j];
    for (auto k : classes_.incident_pipes[vertex]) {
      const double d = topology_.pipes[k].params.diameter;
      r[static_cast<Index>(j)] += classes_.xi(k, vertex) * d * d * v[grid_.q_index(k, end_node(k, vertex))];
    }
  }
  return r;
}

Vector DiscreteModel::pressure_continuity_residual(const Vector& v) const {
  Vector r = Vector::Zero(static_cast<Index>(classes_.inner.size()));
  for (std::size_t j = 0; j < classes_.inner.size(); ++j) {
    const auto vertex = classes_.inner[j];
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (auto k : classes_.incident_pipes[vertex]) {
      const double p = v[grid_.p_index(k, end_node(k, vertex))];
      lo = std::min(lo, p);
      hi = std::max(hi, p);
    }
    r[static_cast<Index>(j)] = hi - lo;
  }
  return r;
}

}  // namespace gasnet
