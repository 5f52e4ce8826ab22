#include "doctest.h"

#include "nlgrad/state_solver.hpp"

#include <Eigen/Cholesky>

#include <random>
#include <set>

using namespace nlgrad;

namespace {

struct Setup {
  std::shared_ptr<const Grid> grid;
  NonlocalGradientOp nl;
};

Setup setup1d(double h = 1.0 / 32, double delta = 0.25, double s = 0.5) {
  Setup st;
  st.grid = std::make_shared<const Grid>(build_grid(0.0, 1.0, h, delta));
  KernelSpec k;
  k.n = 1;
  k.s = s;
  k.delta = delta;
  st.nl = assemble_nl_gradient(st.grid, k);
  return st;
}

Field constant_load(const Grid& g, double c) {
  Field f = Field::Constant(g.dim(), g.num_nodes(), c);
  for (Index i = 0; i < g.num_nodes(); ++i) {
    if (!g.in_omega(i)) f.col(i).setZero();
  }
  return f;
}

Field random_free(const Grid& g, std::mt19937_64& rng) {
  std::normal_distribution<double> N;
  Field f(g.dim(), g.num_nodes());
  for (Index i = 0; i < f.size(); ++i) f.data()[i] = N(rng);
  return apply_collar_zero(g, f);
}

double l2(const Grid& g, const Field& f) { return std::sqrt(l2_dot(g, f, f)); }

// Dense assembly of (1/h^n) G^T W G restricted to the degrees of freedom.
Field dense_solve(const GradientOperator& op, const Field& g) {
  const Grid& grid = op.grid();
  const Eigen::MatrixXd G = Eigen::MatrixXd(op.to_sparse());
  Eigen::VectorXd w(G.rows());
  const int nn = op.dim() * op.dim();
  for (Index m = 0; m < op.num_eval(); ++m) w.segment(m * nn, nn).setConstant(op.quad_weights()[m]);
  std::vector<Index> dofs;
  for (Index i = 0; i < grid.num_nodes(); ++i) {
    if (!op.is_dof(i)) continue;
    for (int a = 0; a < op.dim(); ++a) dofs.push_back(i * op.dim() + a);
  }
  Eigen::MatrixXd Gd(G.rows(), static_cast<Index>(dofs.size()));
  Eigen::VectorXd b(static_cast<Index>(dofs.size()));
  for (std::size_t k = 0; k < dofs.size(); ++k) {
    Gd.col(static_cast<Index>(k)) = G.col(dofs[k]);
    b[static_cast<Index>(k)] = g.data()[dofs[k]];
  }
  const Eigen::MatrixXd K = Gd.transpose() * w.asDiagonal() * Gd / grid.cell_volume();
  const Eigen::VectorXd x = K.ldlt().solve(b);
  Field u = zero_field(grid);
  for (std::size_t k = 0; k < dofs.size(); ++k) u.data()[dofs[k]] = x[static_cast<Index>(k)];
  return u;
}

}  // namespace

TEST_CASE("zero load gives the zero state") {
  const auto st = setup1d();
  EnergyParams params;
  const Field z = zero_field(*st.grid);
  const auto cg = solve_state_p2(z, st.nl.op, params);
  CHECK(cg.u.cwiseAbs().maxCoeff() == 0.0);
  params.p = 3.0;
  const auto lb = solve_state(z, st.nl.op, params, z);
  CHECK(lb.report.iterations == 0);
  CHECK(lb.u.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("p = 2 CG matches a dense direct solve") {
  const auto st = setup1d();
  EnergyParams params;
  const Field g = constant_load(*st.grid, 1.0);
  const auto sol = solve_state_p2(g, st.nl.op, params);
  const Field ref = dense_solve(st.nl.op, g);
  CHECK(l2(*st.grid, sol.u - ref) <= 1e-10 * l2(*st.grid, ref));
  CHECK(sol.report.variation_norm <= 1e-9);
  for (Index i = 0; i < st.grid->num_nodes(); ++i) {
    if (!st.grid->is_free(i)) CHECK(sol.u(0, i) == 0.0);
  }
}

TEST_CASE("p = 2 superposition") {
  std::mt19937_64 rng(1);
  const auto st = setup1d();
  EnergyParams params;
  const Field g1 = random_free(*st.grid, rng);
  const Field g2 = random_free(*st.grid, rng);
  const Field u12 = solve_state_p2(g1 + g2, st.nl.op, params).u;
  const Field sum = solve_state_p2(g1, st.nl.op, params).u + solve_state_p2(g2, st.nl.op, params).u;
  CHECK(l2(*st.grid, u12 - sum) <= 1e-8 * l2(*st.grid, sum));
}

TEST_CASE("quasi-Newton path agrees with CG at p = 2") {
  const auto st = setup1d();
  EnergyParams params;
  const Field g = constant_load(*st.grid, 1.0);
  const auto cg = solve_state_p2(g, st.nl.op, params);
  const auto lb = solve_state(g, st.nl.op, params, zero_field(*st.grid));
  REQUIRE(lb.report.converged);
  CHECK(l2(*st.grid, cg.u - lb.u) <= 1e-6);
  for (std::size_t k = 1; k < lb.report.history.size(); ++k) {
    CHECK(lb.report.history[k].energy <= lb.report.history[k - 1].energy + 1e-13 * std::abs(lb.report.history[k - 1].energy));
  }
}

TEST_CASE("p in {3, 4}: weak-form residual and minimality") {
  std::mt19937_64 rng(2);
  const auto st = setup1d();
  const Grid& grid = *st.grid;
  for (double p : {3.0, 4.0}) {
    EnergyParams params;
    params.p = p;
    const Field g = constant_load(grid, 1.0);
    const auto sol = solve_state(g, st.nl.op, params, zero_field(grid));
    REQUIRE(sol.report.converged);
    CHECK(sol.report.variation_norm <= 1e-8 * std::max(1.0, l2(grid, apply_collar_zero(grid, g))));
    const double e0 = eval_energy(sol.u, g, st.nl.op, params).total;
    for (int t = 0; t < 20; ++t) {
      const Field v = random_free(grid, rng);
      const double res = eval_Y(sol.u, v, st.nl.op, params) - l2_dot(grid, g, v);
      CHECK(std::abs(res) <= 1e-6 * l2(grid, v));
      for (double step : {1e-3, -1e-3, 1e-2, -1e-2}) {
        CHECK(e0 <= eval_energy(sol.u + step * v, g, st.nl.op, params).total + 1e-12);
      }
    }
    for (std::size_t k = 1; k < sol.report.history.size(); ++k) {
      CHECK(sol.report.history[k].energy <= sol.report.history[k - 1].energy + 1e-13 * std::abs(sol.report.history[k - 1].energy));
    }
    for (Index i = 0; i < grid.num_nodes(); ++i) {
      if (!grid.is_free(i)) CHECK(sol.u(0, i) == 0.0);
    }
  }
}

TEST_CASE("2D vector state at p = 3") {
  auto grid = std::make_shared<const Grid>(build_grid(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1), 1.0 / 16, 0.125));
  KernelSpec k;
  k.n = 2;
  k.s = 0.5;
  k.delta = 0.125;
  const auto nl = assemble_nl_gradient(grid, k);
  EnergyParams params;
  params.p = 3.0;
  Field g = constant_load(*grid, 1.0);
  g.row(1) *= -0.5;
  const auto sol = solve_state(g, nl.op, params, zero_field(*grid));
  CHECK(sol.report.converged);
}

TEST_CASE("local solver converges at second order to the closed-form solution") {
  // -u'' = 1 on (a, b) with zero boundary values: u = (x - a)(b - x) / 2
  for (LocalDomain domain : {LocalDomain::Omega, LocalDomain::Free}) {
    std::vector<double> errs;
    for (double h : {1.0 / 16, 1.0 / 32, 1.0 / 64}) {
      auto grid = std::make_shared<const Grid>(build_grid(0.0, 1.0, h, 0.125));
      const GradientOperator op = make_local_operator(grid, domain);
      EnergyParams params;
      const auto sol = solve_state_local(constant_load(*grid, 1.0), op, params);
      const double a = domain == LocalDomain::Omega ? 0.0 : 0.125;
      const double b = 1.0 - a;
      double err = 0.0;
      for (Index i = 0; i < grid->num_nodes(); ++i) {
        const double x = grid->coordinate(i)[0];
        const double exact = (x > a && x < b) ? 0.5 * (x - a) * (b - x) : 0.0;
        err = std::max(err, std::abs(sol.u(0, i) - exact));
      }
      errs.push_back(err);
    }
    CHECK(std::log2(errs[0] / errs[1]) == doctest::Approx(2.0).epsilon(0.15));
    CHECK(std::log2(errs[1] / errs[2]) == doctest::Approx(2.0).epsilon(0.15));
  }
}

TEST_CASE("local domain modes agree as the collar shrinks to one layer") {
  double prev = std::numeric_limits<double>::infinity();
  for (double h : {1.0 / 16, 1.0 / 32, 1.0 / 64}) {
    auto grid = std::make_shared<const Grid>(build_grid(0.0, 1.0, h, h));
    EnergyParams params;
    const Field g = constant_load(*grid, 1.0);
    const Field a = solve_state_local(g, make_local_operator(grid, LocalDomain::Omega), params).u;
    const Field b = solve_state_local(g, make_local_operator(grid, LocalDomain::Free), params).u;
    const double diff = l2(*grid, a - b) / l2(*grid, a);
    CHECK(diff < prev);
    CHECK(diff < 8 * h);
    prev = diff;
  }
}

TEST_CASE("local p = 3 solve") {
  auto grid = std::make_shared<const Grid>(build_grid(0.0, 1.0, 1.0 / 32, 0.125));
  EnergyParams params;
  params.p = 3.0;
  const auto sol = solve_state_local(constant_load(*grid, 1.0), make_local_operator(grid, LocalDomain::Free), params);
  CHECK(sol.report.converged);
  CHECK_THROWS_AS(solve_state_p2(constant_load(*grid, 1.0), make_local_operator(grid, LocalDomain::Free), params),
                  std::invalid_argument);
}

TEST_CASE("multistart") {
  const auto st = setup1d();
  const Grid& grid = *st.grid;
  const Field g = constant_load(grid, 1.0);

  SUBCASE("convex density: all starts reach the same energy") {
    EnergyParams params;
    params.p = 3.0;
    const auto ms = multistart_state(g, st.nl.op, params, 4, 42);
    REQUIRE(ms.reports.size() == 4);
    const double best = ms.reports[ms.best_index].energy;
    CHECK(ms.energy_spread <= 1e-6 * std::abs(best));
  }
  SUBCASE("one start is a plain solve from zero") {
    EnergyParams params;
    params.p = 3.0;
    const auto ms = multistart_state(g, st.nl.op, params, 1, 42);
    const auto single = solve_state(g, st.nl.op, params, zero_field(grid));
    CHECK(ms.best == single.u);
    CHECK(ms.energy_spread == 0.0);
  }
  SUBCASE("double well: several limit points, best is the minimum") {
    EnergyParams params;
    params.p = 4.0;
    params.density = DensityKind::Custom;
    params.custom = std::make_shared<CustomDensity>(double_well_density(4.0, 1.0));
    const Field zero = zero_field(grid);
    const auto ms = multistart_state(zero, st.nl.op, params, 8, 7);
    std::set<long> limits;
    for (std::size_t k = 0; k < ms.states.size(); ++k) {
      CHECK(ms.reports[ms.best_index].energy <= ms.reports[k].energy);
      limits.insert(std::lround(100.0 * ms.states[k].sum() * grid.h()));
    }
    CHECK(limits.size() >= 2);
    // the same seed reproduces the run
    const auto again = multistart_state(zero, st.nl.op, params, 8, 7);
    CHECK(again.best == ms.best);
  }
}
