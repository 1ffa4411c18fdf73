#include "oracles.hpp"

#include "gasnet/discrete.hpp"
#include "gasnet/verify.hpp"

#include <doctest.h>

#include <cmath>

using namespace gasnet;

namespace {

Vector random_vector(oracle::Rng& rng, Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

double max_abs(const Vector& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

DiscreteModel random_model(oracle::Rng& rng, ModelOptions options = {}) {
  const auto spec = oracle::random_problem_spec(rng, {{2, 8}});
  return DiscreteModel(spec.topology, build_grid(spec.topology, spec.resolution), options);
}

}  // namespace

TEST_CASE("build_grid places nodes and trapezoid weights") {
  const auto t = parse_network_text(R"({"vertices": ["a", "b"],
    "pipes": [{"id": "e", "from": "a", "to": "b", "length": 2, "diameter": 1, "friction": 0.1, "inclination": 0}]})");
  GridResolution res;
  res.nodes_per_meter = 4.0;
  const auto g = build_grid(t, res);
  REQUIRE(g.pipes[0].intervals == 8);
  CHECK(g.pipes[0].weights.sum() == doctest::Approx(2.0));
  CHECK(g.pipes[0].positions[8] == 2.0);
  CHECK(g.size == 18);
  res.nodes_per_meter = 1.0;
  CHECK_THROWS_AS(build_grid(t, res), ValidationError);
}

TEST_CASE("single-pipe transport equals the dense SBP oracle and satisfies SBP") {
  const auto t = parse_network_text(R"({"constants": {"c": 3, "g": 1}, "vertices": ["a", "b"],
    "pipes": [{"id": "e", "from": "a", "to": "b", "length": 1.5, "diameter": 1, "friction": 0.1, "inclination": 0}]})");
  GridResolution res;
  res.per_pipe = {7};
  const DiscreteModel model(t, build_grid(t, res));
  const Index N = 7;
  const double h = 1.5 / 7.0;
  const Matrix D = oracle::sbp_derivative(N, h);
  const Matrix A = Matrix(model.transport());
  CHECK((A.block(0, N + 1, N + 1, N + 1) + 9.0 * D).norm() < 1e-12);
  CHECK((A.block(N + 1, 0, N + 1, N + 1) + D).norm() < 1e-12);
  // H D + (H D)^T = diag(-1, 0, ..., 0, 1).
  const Matrix H = oracle::sbp_norm(N, h);
  Matrix B = Matrix::Zero(N + 1, N + 1);
  B(0, 0) = -1.0;
  B(N, N) = 1.0;
  CHECK((H * D + (H * D).transpose() - B).norm() < 1e-12);
}

TEST_CASE("property: skew-adjointness and projector identities on random trees") {
  oracle::Rng rng(23);
  for (int trial = 0; trial < 40; ++trial) {
    const auto model = random_model(rng);
    const Matrix Pi = Matrix(model.projector());
    for (int s = 0; s < 5; ++s) {
      const Vector x = random_vector(rng, model.size());
      const Vector y = random_vector(rng, model.size());
      const Vector z = Pi * x;
      CHECK(std::abs(model.inner(model.skew_operator() * z, z)) <= 1e-12 * model.inner(z, z));
      CHECK((Pi * z - z).cwiseAbs().maxCoeff() <= 1e-12 * z.cwiseAbs().maxCoeff());
      // M-self-adjoint projector.
      CHECK(std::abs(model.inner(Pi * x, y) - model.inner(x, Pi * y)) <=
            1e-12 * model.norm(x) * model.norm(y));
    }
  }
}

TEST_CASE("property: basis vectors satisfy the homogeneous junction and boundary conditions") {
  oracle::Rng rng(29);
  for (int trial = 0; trial < 40; ++trial) {
    const auto model = random_model(rng);
    const Vector y = random_vector(rng, model.reduced_size());
    const Vector u = model.basis() * y;
    CHECK(max_abs(model.kirchhoff_residual(u)) < 1e-13 * (1.0 + max_abs(u)));
    CHECK(max_abs(model.pressure_continuity_residual(u)) == 0.0);
    const auto& t = model.topology();
    for (std::size_t k = 0; k < t.num_pipes(); ++k) {
      const auto& g = model.grid().pipes[k];
      if (model.active_slots()[pressure_slot(k)]) CHECK(u[g.p(0)] == 0.0);
      if (model.active_slots()[flux_slot(k)]) CHECK(u[g.q(g.intervals)] == 0.0);
    }
    // Lifted boundary data hits the slots exactly.
    Vector phi = Vector::Zero(model.num_slots());
    for (Index s = 0; s < phi.size(); ++s)
      if (model.active_slots()[static_cast<std::size_t>(s)]) phi[s] = rng.normal();
    const Vector lifted = model.lift_boundary(phi);
    for (std::size_t k = 0; k < t.num_pipes(); ++k) {
      const auto& g = model.grid().pipes[k];
      CHECK(lifted[g.p(0)] == doctest::Approx(phi[static_cast<Index>(pressure_slot(k))]));
      CHECK(lifted[g.q(g.intervals)] == doctest::Approx(phi[static_cast<Index>(flux_slot(k))]));
    }
  }
}

TEST_CASE("friction gradient matches central differences") {
  oracle::Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const double beta = rng.uniform(0.0, 0.5);
    const double p = rng.uniform(0.5, 2.0);
    const double q = rng.uniform(-1.0, 1.0);
    if (std::abs(q) < 1e-3) continue;
    const auto g = friction_gradient(beta, p, q);
    const double dp = oracle::central_difference([&](double e) { return friction_term(beta, p + e, q); }, 1e-6);
    const double dq = oracle::central_difference([&](double e) { return friction_term(beta, p, q + e); }, 1e-6);
    CHECK(g[0] == doctest::Approx(dp).epsilon(1e-7));
    CHECK(g[1] == doctest::Approx(dq).epsilon(1e-7));
  }
}

TEST_CASE("Jacobian adjoint is the M-transpose and the forward Jacobian linearizes F") {
  oracle::Rng rng(37);
  for (int trial = 0; trial < 20; ++trial) {
    const auto spec = oracle::random_problem_spec(rng);
    const Problem problem(spec);
    const auto& model = problem.model();
    Vector v = problem.equilibrium();
    for (Index i = 0; i < v.size(); ++i) v[i] += 0.01 * rng.normal();
    const auto jac = model.nonlinearity_jacobian(v);
    const Vector a = random_vector(rng, model.size());
    const Vector b = random_vector(rng, model.size());
    CHECK(model.inner(jac.forward * a, b) == doctest::Approx(model.inner(a, jac.adjoint * b)).epsilon(1e-12));
    const double eps = 1e-6;
    const Vector fd = (model.nonlinearity(v + eps * a) - model.nonlinearity(v - eps * a)) / (2 * eps);
    CHECK((fd - jac.forward * a).norm() <= 1e-7 * (1.0 + fd.norm()));
  }
}

TEST_CASE("property: sampled friction ratios stay below the corner bound") {
  oracle::Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const Problem problem(oracle::random_problem_spec(rng));
    const auto lip = lipschitz_sample(problem, static_cast<std::uint64_t>(trial), 200);
    CHECK(lip.max_ratio > 0.0);
    CHECK(lip.max_ratio <= lip.bound);
  }
}

TEST_CASE("vacuum guard names pipe and node") {
  oracle::Rng rng(43);
  ModelOptions opt;
  opt.pressure_floor = 0.1;
  const auto model = random_model(rng, opt);
  Vector v = Vector::Ones(model.size());
  v[model.grid().pipes[0].p(2)] = 0.05;
  try {
    model.nonlinearity(v);
    FAIL("no vacuum error");
  } catch (const SolverError& e) {
    CHECK(e.kind() == SolverError::Kind::VacuumGuard);
    CHECK(std::string(e.what()).find("node 2") != std::string::npos);
  }
}

TEST_CASE("transport defect breaks skew-adjointness") {
  oracle::Rng rng(47);
  ModelOptions opt;
  opt.transport_defect = 0.1;
  const auto model = random_model(rng, opt);
  CHECK(skew_defect(model, 1, 20) > 1e-6);
}

TEST_CASE("inactive slots reject nonzero lifting data") {
  oracle::Rng rng(53);
  const auto model = random_model(rng);
  Vector phi = Vector::Zero(model.num_slots());
  for (Index s = 0; s < phi.size(); ++s)
    if (!model.active_slots()[static_cast<std::size_t>(s)]) {
      phi[s] = 1.0;
      CHECK_THROWS_AS(model.lift_boundary(phi), ValidationError);
      break;
    }
}
