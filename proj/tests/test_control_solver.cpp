#include "doctest.h"

#include "nlgrad/control_solver.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <random>

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

Field on_omega(const Grid& grid, const std::function<double(double)>& f) {
  Field out = zero_field(grid);
  for (Index i = 0; i < grid.num_nodes(); ++i) {
    if (grid.in_omega(i)) out(0, i) = f(grid.coordinate(i)[0]);
  }
  return out;
}

Field random_omega(const Grid& grid, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> N(0.0, scale);
  Field f = zero_field(grid);
  for (Index i = 0; i < grid.num_nodes(); ++i) {
    if (grid.in_omega(i)) f(0, i) = N(rng);
  }
  return f;
}

double l2(const Grid& g, const Field& f) { return std::sqrt(l2_dot(g, f, f)); }

ControlProblem tracking_problem(const Grid& grid, double lambda = 1e-3, double bound = 50.0) {
  ControlProblem pr;
  pr.u_des = on_omega(grid, [](double x) { return 0.05 * std::sin(M_PI * x); });
  pr.weight = Eigen::VectorXd::Constant(grid.num_nodes(), lambda);
  pr.weight_floor = lambda;
  pr.bounds = make_box(grid, Eigen::VectorXd::Constant(1, -bound), Eigen::VectorXd::Constant(1, bound));
  return pr;
}

// Dense p = 2 state solve on the degrees of freedom.
Field dense_state(const GradientOperator& op, const Field& g) {
  const Grid& grid = op.grid();
  const Eigen::MatrixXd G = Eigen::MatrixXd(op.to_sparse());
  Eigen::VectorXd w(G.rows());
  for (Index m = 0; m < op.num_eval(); ++m) w[m] = op.quad_weights()[m];
  std::vector<Index> dofs;
  for (Index i = 0; i < grid.num_nodes(); ++i) {
    if (op.is_dof(i)) dofs.push_back(i);
  }
  Eigen::MatrixXd Gd(G.rows(), static_cast<Index>(dofs.size()));
  Eigen::VectorXd b(static_cast<Index>(dofs.size()));
  for (std::size_t k = 0; k < dofs.size(); ++k) {
    Gd.col(static_cast<Index>(k)) = G.col(dofs[k]);
    b[static_cast<Index>(k)] = g(0, dofs[k]);
  }
  const Eigen::MatrixXd K = Gd.transpose() * w.asDiagonal() * Gd / grid.cell_volume();
  const Eigen::VectorXd x = K.ldlt().solve(b);
  Field u = zero_field(grid);
  for (std::size_t k = 0; k < dofs.size(); ++k) u(0, dofs[k]) = x[static_cast<Index>(k)];
  return u;
}

}  // namespace

TEST_CASE("box projection") {
  const auto st = setup1d();
  const Grid& grid = *st.grid;
  const BoxBounds box = make_box(grid, Eigen::VectorXd::Constant(1, -0.5), Eigen::VectorXd::Constant(1, 1.0));
  std::mt19937_64 rng(3);

  const Field inside = on_omega(grid, [](double x) { return x - 0.25; });
  CHECK(project_box(inside, box) == inside);
  const Field huge = on_omega(grid, [](double) { return 1e300; });
  CHECK(project_box(huge, box) == box.upper);

  for (int t = 0; t < 100; ++t) {
    const Field a = random_omega(grid, rng, 2.0);
    const Field b = random_omega(grid, rng, 2.0);
    const Field pa = project_box(a, box);
    CHECK(project_box(pa, box) == pa);
    CHECK(l2(grid, pa - project_box(b, box)) <= l2(grid, a - b));
  }
}

TEST_CASE("control validation names the offending node") {
  const auto st = setup1d();
  const Grid& grid = *st.grid;
  ControlProblem pr = tracking_problem(grid);
  CHECK_NOTHROW(validate_control(pr, grid));
  Index bad = 0;
  while (!grid.in_omega(bad)) ++bad;
  bad += 3;
  pr.bounds.lower(0, bad) = 2.0;
  pr.bounds.upper(0, bad) = 1.0;
  try {
    validate_control(pr, grid);
    FAIL("expected a validation error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("node " + std::to_string(bad)) != std::string::npos);
  }
  ControlProblem pw = tracking_problem(grid);
  pw.weight[bad] = 0.5 * pw.weight_floor;
  CHECK_THROWS_AS(validate_control(pw, grid), std::invalid_argument);
}

TEST_CASE("trivial reduced costs") {
  const auto st = setup1d();
  const Grid& grid = *st.grid;
  for (double p : {2.0, 3.0}) {
    EnergyParams params;
    params.p = p;
    ControlProblem pr = tracking_problem(grid);
    pr.u_des = zero_field(grid);
    const Field z = zero_field(grid);
    CHECK(reduced_cost(z, pr, st.nl.op, params) == 0.0);
    CHECK(l2(grid, reduced_gradient(z, pr, st.nl.op, params)) == 0.0);

    pr = tracking_problem(grid);
    const double expect = std::pow(lp_norm(grid, pr.u_des, p, Region::Omega), p) / p;
    CHECK(reduced_cost(z, pr, st.nl.op, params) == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("reduced cost matches a dense recomputation") {
  const auto st = setup1d();
  const Grid& grid = *st.grid;
  EnergyParams params;
  const ControlProblem pr = tracking_problem(grid, 0.01);
  const Field g = on_omega(grid, [](double x) { return 1.0 + x * x; });
  const Field u = dense_state(st.nl.op, g);
  double tracking = 0.0;
  double penalty = 0.0;
  for (Index i = 0; i < grid.num_nodes(); ++i) {
    if (!grid.in_omega(i)) continue;
    tracking += 0.5 * std::pow(u(0, i) - pr.u_des(0, i), 2) * grid.h();
    penalty += 0.01 * g(0, i) * g(0, i) * grid.h();
  }
  CHECK(reduced_cost(g, pr, st.nl.op, params) == doctest::Approx(tracking + penalty).epsilon(1e-10));
}

TEST_CASE("adjoint gradient matches central finite differences") {
  const auto st = setup1d();
  const Grid& grid = *st.grid;
  std::mt19937_64 rng(11);
  for (double p : {2.0, 3.0}) {
    CAPTURE(p);
    EnergyParams params;
    params.p = p;
    const ControlProblem pr = tracking_problem(grid, 1e-2);
    ReducedProblem rp(st.nl.op, params, pr);
    const Field g = random_omega(grid, rng);
    const Field grad = rp.evaluate(g).gradient;
    for (int t = 0; t < 10; ++t) {
      const Field v = random_omega(grid, rng);
      const double step = 1e-3 * l2(grid, g) / l2(grid, v);
      const double fd = (rp.cost(g + step * v) - rp.cost(g - step * v)) / (2.0 * step);
      const double an = l2_dot(grid, grad, v);
      CHECK(std::abs(fd - an) <= 1e-4 * std::abs(an));
    }
  }
}

TEST_CASE("zero target inside the box gives the zero pair") {
  const auto st = setup1d();
  const Grid& grid = *st.grid;
  EnergyParams params;
  ControlProblem pr = tracking_problem(grid, 0.1);
  pr.u_des = zero_field(grid);
  const Field start = on_omega(grid, [](double x) { return std::cos(3 * x); });
  const auto sol = solve_control(pr, st.nl.op, params, {}, &start);
  CHECK(sol.report.converged);
  CHECK(l2(grid, sol.g) <= 1e-5);
  CHECK(l2(grid, sol.u) <= 1e-5);
  CHECK(sol.report.cost <= 1e-10);
}

TEST_CASE("singleton box") {
  const auto st = setup1d();
  const Grid& grid = *st.grid;
  EnergyParams params;
  ControlProblem pr = tracking_problem(grid);
  pr.bounds = make_box(grid, Eigen::VectorXd::Constant(1, 0.7), Eigen::VectorXd::Constant(1, 0.7));
  const Field start = on_omega(grid, [](double x) { return -5.0 * x; });
  const auto sol = solve_control(pr, st.nl.op, params, {}, &start);
  CHECK(sol.report.converged);
  CHECK(sol.report.iterations <= 1);
  CHECK(sol.g == pr.bounds.lower);
}

TEST_CASE("tracking instance: descent, stationarity, uniqueness") {
  const auto st = setup1d();
  const Grid& grid = *st.grid;
  for (double p : {2.0, 3.0}) {
    CAPTURE(p);
    EnergyParams params;
    params.p = p;
    // penalty modulus 2 Lambda turns the stationarity tolerance into a 5e-5 bound on g
    ControlProblem pr = tracking_problem(grid, 1e-2, 2.0);
    const auto a = solve_control(pr, st.nl.op, params);
    REQUIRE(a.report.converged);
    CHECK(a.report.stationarity <= 1e-6 * a.report.scale);
    for (std::size_t k = 1; k < a.report.history.size(); ++k) {
      CHECK(a.report.history[k].cost <= a.report.history[k - 1].cost * (1.0 + 1e-12));
    }
    // feasibility
    CHECK((a.g - project_box(a.g, pr.bounds)).cwiseAbs().maxCoeff() == 0.0);
    // state consistency
    const Field u = solve_state_auto(a.g, st.nl.op, params, control_state_options()).u;
    CHECK(l2(grid, u - a.u) <= 1e-8 * std::max(1.0, l2(grid, u)));

    const Field start = pr.bounds.upper;
    const auto b = solve_control(pr, st.nl.op, params, {}, &start);
    REQUIRE(b.report.converged);
    CHECK(l2(grid, a.g - b.g) <= 1e-4);
  }
}

TEST_CASE("p = 2 state map is affine along controls") {
  const auto st = setup1d();
  const Grid& grid = *st.grid;
  EnergyParams params;
  ControlProblem pr1 = tracking_problem(grid, 1e-3, 2.0);
  ControlProblem pr2 = pr1;
  pr2.u_des *= -2.0;
  const auto s1 = solve_control(pr1, st.nl.op, params);
  const auto s2 = solve_control(pr2, st.nl.op, params);
  const Field mid = solve_state_p2(0.5 * (s1.g + s2.g), st.nl.op, params, control_state_options()).u;
  CHECK(l2(grid, mid - 0.5 * (s1.u + s2.u)) <= 1e-8 * std::max(1.0, l2(grid, mid)));
}

TEST_CASE("constructed target: the solver beats the generating control") {
  const auto st = setup1d();
  const Grid& grid = *st.grid;
  EnergyParams params;
  ControlProblem pr = tracking_problem(grid, 1e-4, 3.0);
  const Field gstar = on_omega(grid, [](double x) { return 1.0 + std::sin(2 * M_PI * x); });
  pr.u_des = solve_state_p2(gstar, st.nl.op, params, control_state_options()).u;
  const double jstar = reduced_cost(gstar, pr, st.nl.op, params);
  const auto sol = solve_control(pr, st.nl.op, params);
  REQUIRE(sol.report.converged);
  CHECK(sol.report.cost <= jstar);
}

TEST_CASE("solution is no worse than an exhaustive search over three blocks") {
  const auto st = setup1d();
  const Grid& grid = *st.grid;
  EnergyParams params;
  const ControlProblem pr = tracking_problem(grid, 1e-3, 2.0);
  const auto sol = solve_control(pr, st.nl.op, params);
  REQUIRE(sol.report.converged);

  ReducedProblem rp(st.nl.op, params, pr);
  double best = std::numeric_limits<double>::infinity();
  const int levels = 9;
  for (int a = 0; a < levels; ++a) {
    for (int b = 0; b < levels; ++b) {
      for (int c = 0; c < levels; ++c) {
        const double v[3] = {-2.0 + 0.5 * a, -2.0 + 0.5 * b, -2.0 + 0.5 * c};
        const Field g = on_omega(grid, [&](double x) { return v[std::min(2, static_cast<int>(3.0 * x))]; });
        best = std::min(best, rp.cost(g));
      }
    }
  }
  CHECK(sol.report.cost <= best);
}

TEST_CASE("local control solver") {
  auto grid = std::make_shared<const Grid>(build_grid(0.0, 1.0, 1.0 / 32, 0.125));
  const GradientOperator op = make_local_operator(grid, LocalDomain::Free);
  EnergyParams params;
  ControlProblem pr = tracking_problem(*grid, 1e-3, 2.0);
  const auto sol = solve_control_local(pr, op, params);
  CHECK(sol.report.converged);
  pr.u_des = zero_field(*grid);
  const auto zero = solve_control_local(pr, op, params);
  CHECK(zero.report.cost == 0.0);
  CHECK(zero.report.iterations == 0);
}
