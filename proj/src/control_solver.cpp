#include "nlgrad/control_solver.hpp"

#include "format.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace nlgrad {

namespace {

using Clock = std::chrono::steady_clock;

double l2_norm(const Grid& grid, const Field& f) { return std::sqrt(l2_dot(grid, f, f)); }

Field restrict_to_omega(const Grid& grid, Field f) {
  for (Index i = 0; i < grid.num_nodes(); ++i) {
    if (!grid.in_omega(i)) f.col(i).setZero();
  }
  return f;
}

// Lambda-free penalty density and its derivative factor.
double penalty_density(const Eigen::VectorXd& g, double pc, double eps) {
  const double a2 = g.squaredNorm();
  if (pc >= 2.0) return std::pow(a2, 0.5 * pc);
  return std::pow(a2 + eps * eps, 0.5 * pc) - std::pow(eps, pc);
}

double penalty_factor(const Eigen::VectorXd& g, double pc, double eps) {
  const double a2 = g.squaredNorm();
  if (pc == 2.0) return 2.0;
  if (pc > 2.0) return pc * std::pow(a2, 0.5 * (pc - 2.0));
  return pc * std::pow(a2 + eps * eps, 0.5 * (pc - 2.0));
}

}  // namespace

BoxBounds make_box(const Grid& grid, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  if (lower.size() != grid.dim() || upper.size() != grid.dim()) {
    throw std::invalid_argument("make_box: bound dimension mismatch");
  }
  BoxBounds b{Field::Zero(grid.dim(), grid.num_nodes()), Field::Zero(grid.dim(), grid.num_nodes())};
  for (Index i = 0; i < grid.num_nodes(); ++i) {
    if (!grid.in_omega(i)) continue;
    b.lower.col(i) = lower;
    b.upper.col(i) = upper;
  }
  return b;
}

void validate_control(const ControlProblem& problem, const Grid& grid) {
  const Index N = grid.num_nodes();
  const int n = grid.dim();
  auto shape_ok = [&](const Field& f) { return f.rows() == n && f.cols() == N; };
  if (!shape_ok(problem.u_des)) throw std::invalid_argument("control.u_des has the wrong shape");
  if (!shape_ok(problem.bounds.lower) || !shape_ok(problem.bounds.upper)) {
    throw std::invalid_argument("control bounds have the wrong shape");
  }
  if (problem.weight.size() != N) throw std::invalid_argument("control.lambda has the wrong size");
  if (!(problem.weight_floor > 0.0)) throw std::invalid_argument("control.lambda_min must be positive");
  if (!(problem.epsilon > 0.0)) throw std::invalid_argument("control.epsilon must be positive");
  for (Index i = 0; i < N; ++i) {
    if (!grid.in_omega(i)) continue;
    if (!(problem.weight[i] >= problem.weight_floor)) {
      std::ostringstream os;
      os << "control.lambda = " << problem.weight[i] << " below lambda_min = " << problem.weight_floor
         << " at node " << i << " (x = " << grid.coordinate(i).transpose() << ")";
      throw std::invalid_argument(os.str());
    }
    for (int a = 0; a < n; ++a) {
      if (!(problem.bounds.lower(a, i) <= problem.bounds.upper(a, i))) {
        std::ostringstream os;
        os << "control bounds: lower > upper at node " << i << " component " << a << " (x = "
           << grid.coordinate(i).transpose() << ")";
        throw std::invalid_argument(os.str());
      }
    }
  }
}

Field project_box(const Field& g, const BoxBounds& bounds) {
  return g.cwiseMax(bounds.lower).cwiseMin(bounds.upper);
}

CostValue control_cost(const Field& u, const Field& g, const ControlProblem& problem, const Grid& grid,
                       double p) {
  const double pc = p / (p - 1.0);
  CostValue c;
  for (Index i = 0; i < grid.num_nodes(); ++i) {
    if (!grid.in_omega(i)) continue;
    c.tracking += std::pow((u.col(i) - problem.u_des.col(i)).norm(), p) / p;
    c.penalty += problem.weight[i] * penalty_density(g.col(i), pc, problem.epsilon);
  }
  c.tracking *= grid.cell_volume();
  c.penalty *= grid.cell_volume();
  c.total = c.tracking + c.penalty;
  return c;
}

ReducedProblem::ReducedProblem(const GradientOperator& op, EnergyParams params, ControlProblem problem,
                               ControlOptions options)
    : op_(op), params_(std::move(params)), problem_(std::move(problem)), options_(options) {
  if (params_.density != DensityKind::PLaplacian) {
    throw std::invalid_argument("ReducedProblem: the control solver requires the convex p-Laplacian density");
  }
  validate_energy(params_, op_.grid());
  validate_control(problem_, op_.grid());
  warm_ = zero_field(op_.grid());
}

Field ReducedProblem::state(const Field& g) {
  StateSolution sol = solve_state_auto(g, op_, params_, options_.state, &warm_);
  ++state_solves_;
  warm_ = sol.u;
  return std::move(sol.u);
}

double ReducedProblem::cost(const Field& g) { return evaluate(g, false).cost.total; }

Field ReducedProblem::adjoint(const Field& u, const Field& rhs) const {
  const MatrixField Du = op_.apply(u);
  // For p > 2 the linearization vanishes where Du = 0; a floor of eps^{p-2}
  // times the p = 2 operator keeps the system definite.
  EnergyParams quad = params_;
  quad.p = 2.0;
  const double floor = params_.p > 2.0 ? std::pow(params_.epsilon, params_.p - 2.0) : 0.0;
  auto apply = [&](const Field& v) {
    Field out = linearized_apply_at(Du, v, op_, params_);
    if (floor > 0.0) out += floor * linearized_apply_at(Du, v, op_, quad);
    return out;
  };
  const Field b = restrict_to_dofs(op_, rhs);
  try {
    return restrict_to_dofs(op_, conjugate_gradient(apply, b, zero_field(op_.grid()), options_.state.cg_tol,
                                                    options_.state.cg_max_iterations).x);
  } catch (const SolverFailure& e) {
    throw SolverFailure(std::string("adjoint solve failed: ") + e.what());
  }
}

ReducedProblem::Evaluation ReducedProblem::evaluate(const Field& g_in, bool with_gradient) {
  const Grid& grid = op_.grid();
  Evaluation ev;
  ev.g = restrict_to_omega(grid, g_in);
  ev.u = state(ev.g);
  ev.cost = control_cost(ev.u, ev.g, problem_, grid, params_.p);
  if (!with_gradient) return ev;
  const double p = params_.p;
  const double pc = p_conj();
  Field dF = zero_field(grid);
  for (Index i = 0; i < grid.num_nodes(); ++i) {
    if (!grid.in_omega(i)) continue;
    const Eigen::VectorXd e = ev.u.col(i) - problem_.u_des.col(i);
    const double en = e.norm();
    dF.col(i) = (p == 2.0 ? 1.0 : (en == 0.0 ? 0.0 : std::pow(en, p - 2.0))) * e;
  }
  const Field lambda = adjoint(ev.u, dF);
  ev.gradient = lambda;
  for (Index i = 0; i < grid.num_nodes(); ++i) {
    if (!grid.in_omega(i)) {
      ev.gradient.col(i).setZero();
      continue;
    }
    ev.gradient.col(i) += problem_.weight[i] * penalty_factor(ev.g.col(i), pc, problem_.epsilon) * ev.g.col(i);
  }
  return ev;
}

double reduced_cost(const Field& g, const ControlProblem& problem, const GradientOperator& op,
                    const EnergyParams& params, const ControlOptions& options) {
  ReducedProblem rp(op, params, problem, options);
  return rp.cost(project_box(g, problem.bounds));
}

Field reduced_gradient(const Field& g, const ControlProblem& problem, const GradientOperator& op,
                       const EnergyParams& params, const ControlOptions& options) {
  ReducedProblem rp(op, params, problem, options);
  return rp.evaluate(g, true).gradient;
}

ControlSolution solve_control(const ControlProblem& problem, const GradientOperator& op,
                              const EnergyParams& params, const ControlOptions& options, const Field* init) {
  const auto t0 = Clock::now();
  ReducedProblem rp(op, params, problem, options);
  const Grid& grid = op.grid();
  const BoxBounds& box = problem.bounds;
  auto stationarity = [&](const ReducedProblem::Evaluation& ev) {
    return l2_norm(grid, ev.g - project_box(ev.g - ev.gradient, box));
  };

  ControlSolution out;
  ControlSolveReport& rep = out.report;
  // j is not differentiable at g = 0 when p > 2, so the default start there is P(u_des).
  Field start = init ? *init : (params.p > 2.0 ? problem.u_des : zero_field(grid));
  ReducedProblem::Evaluation cur = rp.evaluate(project_box(start, box));
  rep.scale = std::max(1.0, l2_norm(grid, cur.gradient));
  double stat = stationarity(cur);
  double step = std::clamp(1.0, options.step_min, options.step_max);
  rep.history.push_back({0, cur.cost.total, stat, 0.0});

  const double eps = std::numeric_limits<double>::epsilon();
  while (stat > options.tol * rep.scale && rep.iterations < options.max_iterations) {
    bool accepted = false;
    double trial = step;
    ReducedProblem::Evaluation next;
    for (int bt = 0; bt <= options.max_backtracks; ++bt) {
      const Field g_new = project_box(cur.g - trial * cur.gradient, box);
      const double model = l2_dot(grid, cur.gradient, g_new - cur.g);
      next = rp.evaluate(g_new);
      const double noise = 1e3 * eps * (cur.cost.tracking + cur.cost.penalty) +
                           options.state.tol * l2_norm(grid, g_new - cur.g);
      if (std::isfinite(next.cost.total)) {
        if (-options.armijo * model > noise) {
          accepted = next.cost.total <= cur.cost.total + options.armijo * model;
        } else if (next.cost.total <= cur.cost.total + noise) {
          // approximate Wolfe test along the segment g -> g_new
          accepted = l2_dot(grid, next.gradient, g_new - cur.g) <= (2.0 * options.armijo - 1.0) * model;
        }
      }
      if (accepted) break;
      trial *= options.backtrack;
      ++rep.backtracks;
    }
    if (!accepted) {
      throw SolverFailure("solve_control: line search failed (stationarity " + detail::fmt_sci(stat) + ")");
    }
    const Field s = next.g - cur.g;
    const Field y = next.gradient - cur.gradient;
    const double sy = l2_dot(grid, s, y);
    step = sy > 0.0 ? std::clamp(l2_dot(grid, s, s) / sy, options.step_min, options.step_max) : options.step_max;
    cur = std::move(next);
    stat = stationarity(cur);
    ++rep.iterations;
    rep.history.push_back({rep.iterations, cur.cost.total, stat, trial});
  }

  rep.cost = cur.cost.total;
  rep.stationarity = stat;
  rep.converged = stat <= options.tol * rep.scale;
  rep.state_solves = rp.state_solves();
  rep.wall_time = std::chrono::duration<double>(Clock::now() - t0).count();
  out.u = std::move(cur.u);
  out.g = std::move(cur.g);
  out.cost = cur.cost;
  return out;
}

ControlSolution solve_control_local(const ControlProblem& problem, const GradientOperator& local_op,
                                    const EnergyParams& params, const ControlOptions& options, const Field* init) {
  return solve_control(problem, local_op, params, options, init);
}

}  // namespace nlgrad
