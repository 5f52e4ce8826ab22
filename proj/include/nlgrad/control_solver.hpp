#pragma once

#include "nlgrad/state_solver.hpp"

#include <string>
#include <vector>

namespace nlgrad {

/// Componentwise bounds on grid nodes. Outside Omega both bounds are zero.
struct BoxBounds {
  Field lower;
  Field upper;
};

/// Constant bounds on Omega.
BoxBounds make_box(const Grid& grid, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);

/// Tracking cost (1/p)|u - u_des|^p plus penalty Lambda |g|^{p'} with
/// p' = p / (p - 1), both integrated over Omega. The exponent p is taken from
/// the energy parameters.
struct ControlProblem {
  Field u_des;
  /// Lambda on grid nodes.
  Eigen::VectorXd weight;
  /// Declared lower bound lambda for the weight.
  double weight_floor = 0.0;
  BoxBounds bounds;
  /// Regularization of |g| in the penalty for p' < 2.
  double epsilon = 1e-10;
};

/// Throws std::invalid_argument naming the first offending node.
void validate_control(const ControlProblem& problem, const Grid& grid);

Field project_box(const Field& g, const BoxBounds& bounds);

struct CostValue {
  double tracking = 0.0;
  double penalty = 0.0;
  double total = 0.0;
};

/// F(u, g) for a state-control pair.
CostValue control_cost(const Field& u, const Field& g, const ControlProblem& problem, const Grid& grid,
                       double p);

/// State solves inside the control loop: tighter than the defaults.
inline SolverOptions control_state_options() {
  SolverOptions s;
  s.tol = 1e-10;
  s.cg_tol = 1e-12;
  s.record_history = false;
  return s;
}

struct ControlOptions {
  /// Stationarity ||g - P(g - grad j)|| <= tol * max(1, ||grad j(g0)||).
  double tol = 1e-6;
  int max_iterations = 5000;
  double armijo = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 60;
  double step_min = 1e-6;
  double step_max = 1e2;
  SolverOptions state = control_state_options();
};

/// Reduced functional j(g) = F(S(g), g) with adjoint gradients. Keeps the
/// last state as a warm start.
class ReducedProblem {
 public:
  ReducedProblem(const GradientOperator& op, EnergyParams params, ControlProblem problem,
                 ControlOptions options = {});

  struct Evaluation {
    Field g;
    Field u;
    CostValue cost;
    Field gradient;
  };

  const Grid& grid() const { return op_.grid(); }
  const GradientOperator& op() const { return op_; }
  const ControlProblem& problem() const { return problem_; }
  const EnergyParams& params() const { return params_; }
  double p() const { return params_.p; }
  double p_conj() const { return params_.p / (params_.p - 1.0); }

  Field state(const Field& g);
  double cost(const Field& g);
  Evaluation evaluate(const Field& g, bool with_gradient = true);
  /// Solves the linearized state system at u with right-hand side rhs.
  Field adjoint(const Field& u, const Field& rhs) const;

  int state_solves() const { return state_solves_; }

 private:
  const GradientOperator& op_;
  EnergyParams params_;
  ControlProblem problem_;
  ControlOptions options_;
  Field warm_;
  int state_solves_ = 0;
};

double reduced_cost(const Field& g, const ControlProblem& problem, const GradientOperator& op,
                    const EnergyParams& params, const ControlOptions& options = {});

Field reduced_gradient(const Field& g, const ControlProblem& problem, const GradientOperator& op,
                       const EnergyParams& params, const ControlOptions& options = {});

struct ControlIteration {
  int iteration = 0;
  double cost = 0.0;
  double stationarity = 0.0;
  double step = 0.0;
};

struct ControlSolveReport {
  int iterations = 0;
  double cost = 0.0;
  double stationarity = 0.0;
  double scale = 1.0;
  bool converged = false;
  int backtracks = 0;
  int state_solves = 0;
  double wall_time = 0.0;
  std::vector<ControlIteration> history;
};

struct ControlSolution {
  Field u;
  Field g;
  CostValue cost;
  ControlSolveReport report;
};

/// Projected gradient with Barzilai-Borwein steps and Armijo backtracking
/// along the projection arc, started from P(init). Without init the start is
/// P(0) for p <= 2 and P(u_des) for p > 2.
ControlSolution solve_control(const ControlProblem& problem, const GradientOperator& op,
                              const EnergyParams& params, const ControlOptions& options = {},
                              const Field* init = nullptr);

/// Same machinery with a local gradient operator.
ControlSolution solve_control_local(const ControlProblem& problem, const GradientOperator& local_op,
                                    const EnergyParams& params, const ControlOptions& options = {},
                                    const Field* init = nullptr);

}  // namespace nlgrad
