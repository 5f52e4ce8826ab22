#include "nlgrad/checks.hpp"

#include "nlgrad/control_solver.hpp"

#include "format.hpp"

#include <Eigen/Cholesky>

#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>

namespace nlgrad {

namespace {

using Clock = std::chrono::steady_clock;

struct Problem {
  std::shared_ptr<const Grid> grid;
  NonlocalGradientOp nl;
};

Problem make_problem(int n, double h, double delta, double s, std::optional<double> mass = std::nullopt) {
  Problem pr;
  const Eigen::VectorXd lo = Eigen::VectorXd::Zero(n), hi = Eigen::VectorXd::Ones(n);
  pr.grid = std::make_shared<const Grid>(build_grid(lo, hi, h, delta));
  KernelSpec k;
  k.n = n;
  k.s = s;
  k.delta = delta;
  if (mass) k = normalize_mass(k, *mass);
  pr.nl = assemble_nl_gradient(pr.grid, k);
  return pr;
}

Field gaussian(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> N;
  Field f(rows, cols);
  for (Index i = 0; i < f.size(); ++i) f.data()[i] = N(rng);
  return f;
}

Field random_on_omega(const Grid& grid, std::mt19937_64& rng) {
  Field f = gaussian(grid.dim(), grid.num_nodes(), rng);
  for (Index i = 0; i < grid.num_nodes(); ++i) {
    if (!grid.in_omega(i)) f.col(i).setZero();
  }
  return f;
}

double l2(const Grid& g, const Field& f) { return std::sqrt(l2_dot(g, f, f)); }

CheckResult finish(std::string name, int criterion, double value, double threshold, std::string detail,
                   Clock::time_point t0) {
  CheckResult r;
  r.name = std::move(name);
  r.criterion = criterion;
  r.value = value;
  r.threshold = threshold;
  r.pass = std::isfinite(value) && value <= threshold;
  r.detail = std::move(detail);
  r.wall_time = std::chrono::duration<double>(Clock::now() - t0).count();
  return r;
}

template <typename F>
CheckResult guarded(const std::string& name, int criterion, double threshold, F body) {
  const auto t0 = Clock::now();
  try {
    return body(t0);
  } catch (const std::exception& e) {
    return finish(name, criterion, std::numeric_limits<double>::infinity(), threshold, e.what(), t0);
  }
}

ControlProblem tracking(const Grid& grid, double lambda, double bound) {
  ControlProblem pr;
  pr.u_des = zero_field(grid);
  for (Index i = 0; i < grid.num_nodes(); ++i) {
    if (grid.in_omega(i)) pr.u_des(0, i) = 0.05 * std::sin(std::numbers::pi * grid.coordinate(i)[0]);
  }
  pr.weight = Eigen::VectorXd::Constant(grid.num_nodes(), lambda);
  pr.weight_floor = lambda;
  pr.bounds = make_box(grid, Eigen::VectorXd::Constant(1, -bound), Eigen::VectorXd::Constant(1, bound));
  return pr;
}

}  // namespace

CheckResult check_integration_by_parts(const CheckOptions& options) {
  return guarded("integration_by_parts", 1, 1e-12, [&](Clock::time_point t0) {
    std::mt19937_64 rng(options.seed);
    double worst = 0.0;
    for (int n : {1, 2}) {
      const Problem pr = n == 1 ? make_problem(1, 1.0 / 128, 0.125, 0.3) : make_problem(2, 1.0 / 64, 1.0 / 16, 0.3);
      const GradientOperator& op = pr.nl.op;
      for (int t = 0; t < 50; ++t) {
        const Field u = apply_collar_zero(*pr.grid, gaussian(n, pr.grid->num_nodes(), rng));
        const MatrixField phi = gaussian(n * n, op.num_eval(), rng);
        const MatrixField Du = op.apply(u);
        const double lhs = op.pairing(Du, phi);
        const double rhs = l2_dot(*pr.grid, u, op.divergence(phi));
        const double scale = std::sqrt(op.pairing(Du, Du) * op.pairing(phi, phi));
        worst = std::max(worst, std::abs(lhs + rhs) / scale);
      }
    }
    return finish("integration_by_parts", 1, worst, 1e-12, "50 pairs each in 1D (N = 128) and 2D (64^2)", t0);
  });
}

CheckResult check_linear_reproduction(const CheckOptions&) {
  return guarded("linear_reproduction", 2, 1e-6, [&](Clock::time_point t0) {
    double worst = 0.0;
    Index checked = 0;
    for (int n : {1, 2}) {
      const Problem pr = n == 1 ? make_problem(1, 1.0 / 64, 0.125, 0.5, 1.0) : make_problem(2, 1.0 / 32, 0.125, 0.5, 2.0);
      const Grid& g = *pr.grid;
      Eigen::MatrixXd A(n, n);
      if (n == 1) {
        A << 2.5;
      } else {
        A << 1.0, -2.0, 0.5, 3.0;
      }
      Field u(n, g.num_nodes());
      for (Index i = 0; i < g.num_nodes(); ++i) u.col(i) = A * g.coordinate(i) + Eigen::VectorXd::Constant(n, 0.3);
      const MatrixField D = pr.nl.op.apply(u);
      for (Index m = 0; m < pr.nl.op.num_eval(); ++m) {
        const Index i = pr.nl.op.eval_nodes()[static_cast<std::size_t>(m)];
        if (g.boundary_distance_steps(i) <= g.layers()) continue;
        const Eigen::Map<const Eigen::MatrixXd> Dm(D.col(m).data(), n, n);
        worst = std::max(worst, (Dm - A).norm() / A.norm());
        ++checked;
      }
    }
    return finish("linear_reproduction", 2, worst, 1e-6, std::to_string(checked) + " fully interior nodes", t0);
  });
}

CheckResult check_state_oracle(const CheckOptions& options) {
  return guarded("state_oracle", 3, 1e-10, [&](Clock::time_point t0) {
    const Problem pr = make_problem(1, 1.0 / 32, 0.25, 0.5);
    const GradientOperator& op = pr.nl.op;
    const Grid& grid = *pr.grid;
    std::mt19937_64 rng(options.seed);
    const Field g = random_on_omega(grid, rng);
    EnergyParams params;
    const Field u = solve_state_p2(g, op, params).u;

    const Eigen::MatrixXd G = Eigen::MatrixXd(op.to_sparse());
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
    const Eigen::MatrixXd K = Gd.transpose() * op.quad_weights().asDiagonal() * Gd / grid.cell_volume();
    const Eigen::VectorXd x = K.ldlt().solve(b);
    Field ref = zero_field(grid);
    for (std::size_t k = 0; k < dofs.size(); ++k) ref(0, dofs[k]) = x[static_cast<Index>(k)];
    return finish("state_oracle", 3, l2(grid, u - ref) / l2(grid, ref), 1e-10,
                  "p = 2, (0,1), delta = 0.25, s = 0.5, h = 1/32", t0);
  });
}

CheckResult check_weak_residual(const CheckOptions& options) {
  return guarded("weak_residual", 4, 1e-6, [&](Clock::time_point t0) {
    const Problem pr = make_problem(1, 1.0 / 64, 0.25, 0.5);
    const Grid& grid = *pr.grid;
    std::mt19937_64 rng(options.seed);
    Field g = Field::Ones(1, grid.num_nodes());
    for (Index i = 0; i < grid.num_nodes(); ++i) {
      if (!grid.in_omega(i)) g(0, i) = 0.0;
    }
    double worst = 0.0;
    for (double p : {2.0, 3.0, 4.0}) {
      EnergyParams params;
      params.p = p;
      const Field u = solve_state_auto(g, pr.nl.op, params).u;
      for (int t = 0; t < 20; ++t) {
        const Field v = apply_collar_zero(grid, gaussian(1, grid.num_nodes(), rng));
        const double res = eval_Y(u, v, pr.nl.op, params) - l2_dot(grid, g, v);
        worst = std::max(worst, std::abs(res) / l2(grid, v));
      }
    }
    return finish("weak_residual", 4, worst, 1e-6, "p in {2, 3, 4}, 20 directions each", t0);
  });
}

std::vector<CheckResult> check_gradient_consistency(const CheckOptions& options) {
  std::vector<CheckResult> out;
  out.push_back(guarded("energy_gradient_fd", 5, 1e-4, [&](Clock::time_point t0) {
    const Problem pr = make_problem(1, 1.0 / 32, 0.25, 0.5);
    const Grid& grid = *pr.grid;
    std::mt19937_64 rng(options.seed);
    double worst = 0.0;
    for (double p : {2.0, 3.0}) {
      EnergyParams params;
      params.p = p;
      const Field f = apply_collar_zero(grid, gaussian(1, grid.num_nodes(), rng));
      const Field u = apply_collar_zero(grid, gaussian(1, grid.num_nodes(), rng));
      const Field grad = eval_first_variation(u, f, pr.nl.op, params);
      for (int t = 0; t < 10; ++t) {
        const Field v = apply_collar_zero(grid, gaussian(1, grid.num_nodes(), rng));
        const double step = 1e-5;
        const double fd = (eval_energy(u + step * v, f, pr.nl.op, params).total -
                           eval_energy(u - step * v, f, pr.nl.op, params).total) / (2 * step);
        const double an = l2_dot(grid, grad, v);
        worst = std::max(worst, std::abs(fd - an) / std::abs(an));
      }
    }
    return finish("energy_gradient_fd", 5, worst, 1e-4, "p in {2, 3}, 10 directions each", t0);
  }));
  out.push_back(guarded("reduced_gradient_fd", 5, 1e-4, [&](Clock::time_point t0) {
    const Problem pr = make_problem(1, 1.0 / 32, 0.25, 0.5);
    const Grid& grid = *pr.grid;
    std::mt19937_64 rng(options.seed + 1);
    double worst = 0.0;
    for (double p : {2.0, 3.0}) {
      EnergyParams params;
      params.p = p;
      ReducedProblem rp(pr.nl.op, params, tracking(grid, 1e-2, 50.0));
      const Field g = random_on_omega(grid, rng);
      const Field grad = rp.evaluate(g).gradient;
      for (int t = 0; t < 10; ++t) {
        const Field v = random_on_omega(grid, rng);
        const double step = 1e-4 * l2(grid, g) / l2(grid, v);
        const double fd = (rp.cost(g + step * v) - rp.cost(g - step * v)) / (2.0 * step);
        const double an = l2_dot(grid, grad, v);
        worst = std::max(worst, std::abs(fd - an) / std::abs(an));
      }
    }
    return finish("reduced_gradient_fd", 5, worst, 1e-4, "p in {2, 3}, 10 directions each", t0);
  }));
  return out;
}

std::vector<CheckResult> check_control_probes(const CheckOptions&) {
  std::vector<CheckResult> out;
  const Problem pr = make_problem(1, 1.0 / 32, 0.25, 0.5);
  const Grid& grid = *pr.grid;
  double ascent = 0.0, stationarity = 0.0, disagreement = 0.0;
  std::string failure;
  const auto t0 = Clock::now();
  try {
    for (double p : {2.0, 3.0}) {
      EnergyParams params;
      params.p = p;
      const ControlProblem cp = tracking(grid, 1e-2, 2.0);
      const auto a = solve_control(cp, pr.nl.op, params);
      const Field start = cp.bounds.upper;
      const auto b = solve_control(cp, pr.nl.op, params, {}, &start);
      for (const auto* sol : {&a, &b}) {
        const auto& h = sol->report.history;
        for (std::size_t k = 1; k < h.size(); ++k) {
          ascent = std::max(ascent, (h[k].cost - h[k - 1].cost) / std::abs(h[k - 1].cost));
        }
        stationarity = std::max(stationarity, sol->report.stationarity / (1e-6 * sol->report.scale));
      }
      disagreement = std::max(disagreement, l2(grid, a.g - b.g));
    }
  } catch (const std::exception& e) {
    failure = e.what();
    ascent = stationarity = disagreement = std::numeric_limits<double>::infinity();
  }
  const std::string d = failure.empty() ? "p in {2, 3}, starts P(default) and upper bound" : failure;
  // relative cost increase per accepted step, roundoff allowance
  out.push_back(finish("control_descent", 6, ascent, 1e-12, d, t0));
  out.push_back(finish("control_stationarity", 6, stationarity, 1.0, d + "; value is stationarity / (1e-6 scale)", t0));
  out.push_back(finish("control_uniqueness", 6, disagreement, 1e-4, d, t0));

  out.push_back(guarded("state_superposition", 6, 1e-8, [&](Clock::time_point t1) {
    EnergyParams params;
    ControlProblem p1 = tracking(grid, 1e-3, 2.0);
    ControlProblem p2 = p1;
    p2.u_des *= -2.0;
    const auto s1 = solve_control(p1, pr.nl.op, params);
    const auto s2 = solve_control(p2, pr.nl.op, params);
    const Field mid = solve_state_p2(0.5 * (s1.g + s2.g), pr.nl.op, params, control_state_options()).u;
    const double err = l2(grid, mid - 0.5 * (s1.u + s2.u)) / std::max(1.0, l2(grid, mid));
    return finish("state_superposition", 6, err, 1e-8, "S((g1 + g2) / 2) against (S(g1) + S(g2)) / 2", t1);
  }));
  return out;
}

std::vector<CheckResult> run_checks(const CheckOptions& options) {
  std::vector<CheckResult> out;
  out.push_back(check_integration_by_parts(options));
  out.push_back(check_linear_reproduction(options));
  out.push_back(check_state_oracle(options));
  out.push_back(check_weak_residual(options));
  for (auto& r : check_gradient_consistency(options)) out.push_back(std::move(r));
  for (auto& r : check_control_probes(options)) out.push_back(std::move(r));
  return out;
}

}  // namespace nlgrad
