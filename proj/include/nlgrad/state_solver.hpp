#pragma once

#include "nlgrad/energy.hpp"

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlgrad {

class SolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SolverOptions {
  /// Stop when the L^2 norm of the first variation is <= tol * max(1, ||g||).
  double tol = 1e-8;
  int max_iterations = 20000;
  int memory = 10;
  double armijo = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 60;
  /// Relative residual for the conjugate gradient path.
  double cg_tol = 1e-10;
  int cg_max_iterations = 100000;
  bool record_history = true;
};

struct HistoryEntry {
  int iteration = 0;
  double energy = 0.0;
  double variation_norm = 0.0;
};

struct SolveReport {
  std::string method;
  int iterations = 0;
  double energy = 0.0;
  double variation_norm = 0.0;
  int backtracks = 0;
  double wall_time = 0.0;
  bool converged = false;
  std::vector<HistoryEntry> history;
};

struct StateSolution {
  Field u;
  SolveReport report;
};

struct CgResult {
  Field x;
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Conjugate gradients for a symmetric positive definite map on fields.
/// Throws SolverFailure on loss of positive definiteness or stagnation.
CgResult conjugate_gradient(const std::function<Field(const Field&)>& apply, const Field& b,
                            const Field& x0, double rel_tol, int max_iterations);

/// p = 2 state: CG on the free degrees of freedom.
StateSolution solve_state_p2(const Field& g, const GradientOperator& op, const EnergyParams& params,
                             const SolverOptions& options = {}, const Field* init = nullptr);

/// General p: limited-memory BFGS with Armijo backtracking on eval_energy.
StateSolution solve_state(const Field& g, const GradientOperator& op, const EnergyParams& params,
                          const Field& init, const SolverOptions& options = {});

/// Chooses CG for the p = 2 p-Laplacian and L-BFGS otherwise.
StateSolution solve_state_auto(const Field& g, const GradientOperator& op, const EnergyParams& params,
                               const SolverOptions& options = {}, const Field* init = nullptr);

/// Local reference domain: Omega_{-delta} (s sweeps) or Omega (delta sweeps).
enum class LocalDomain { Free, Omega };

GradientOperator make_local_operator(std::shared_ptr<const Grid> grid, LocalDomain domain);

/// State solve with a local gradient operator and zero Dirichlet data.
StateSolution solve_state_local(const Field& g, const GradientOperator& local_op,
                                const EnergyParams& params, const SolverOptions& options = {});

struct MultistartResult {
  Field best;
  std::size_t best_index = 0;
  std::vector<SolveReport> reports;
  std::vector<Field> states;
  double energy_spread = 0.0;
};

/// Start 0 is the zero field; starts 1..k-1 are seeded Gaussian fields with
/// standard deviation `scale` on the degrees of freedom. The lowest energy
/// wins, ties broken by the L^2 norm of u.
MultistartResult multistart_state(const Field& g, const GradientOperator& op, const EnergyParams& params,
                                  int starts, std::uint64_t seed, const SolverOptions& options = {},
                                  double scale = 1.0, int threads = 1);

}  // namespace nlgrad
