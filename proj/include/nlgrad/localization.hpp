#pragma once

#include "nlgrad/control_solver.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace nlgrad {

using PointFunction = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Copies the Omega values of f (given on `from`) onto the matching lattice
/// nodes of `to`. Nodes of `to` without a counterpart are zero.
Field transfer(const Grid& from, const Field& f, const Grid& to);

/// Samples a point function on the Omega nodes (zero elsewhere).
Field sample_on_omega(const Grid& grid, const PointFunction& f);

/// Grid-independent description of a control problem.
struct ControlSpec {
  PointFunction u_des;
  double weight = 1e-3;
  double weight_floor = 1e-3;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  double epsilon = 1e-10;

  ControlProblem instantiate(const Grid& grid) const;
};

enum class SweepVariable { S, Delta };

std::string to_string(SweepVariable v);

/// A ladder of nonlocal problems against one local reference problem.
///
/// s sweeps: one grid with horizon `delta`, fixed-horizon kernel with a0 = 1,
/// local reference on Omega_{-delta} of the same grid.
/// delta sweeps: one grid per delta, kernel rescaled from the unit horizon
/// with mass n, local reference on Omega with a one-layer grid.
struct SweepConfig {
  SweepVariable variable = SweepVariable::S;
  std::vector<double> ladder;
  /// Fixed counterpart: s for delta sweeps.
  double s = 0.5;
  /// Fixed counterpart: delta for s sweeps.
  double delta = 0.25;
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
  double h = 1.0 / 128;
  CutoffSpec cutoff{};
  double p = 2.0;
  /// Constant coefficient; empty means the identity.
  Eigen::MatrixXd coefficient;
  ControlSpec control;
  std::vector<double> r_list{4.0};
  ControlOptions options{};
  int threads = 1;
};

/// 1D tracking instance on (0, 1): p = 2, u_des = sin(pi x), Lambda = 0.3,
/// box [-10, 10], h = 1/128. The s ladder is {0.3, 0.5, 0.7, 0.9, 0.95} at
/// delta = 0.25; the delta ladder is {1/4, 1/8, 1/16, 1/32} at s = 0.5.
SweepConfig canonical_sweep(SweepVariable variable);

/// Throws std::invalid_argument on a violated sweep hypothesis.
void validate_sweep(const SweepConfig& config);
/// Lists violations without throwing.
std::vector<std::string> sweep_violations(const SweepConfig& config);

/// Nonlocal problem at one ladder value.
struct LadderPoint {
  double value = 0.0;
  std::shared_ptr<const Grid> grid;
  NonlocalGradientOp nl;
};

LadderPoint make_ladder_point(const SweepConfig& config, double value);

/// Local reference grid and operator for the configured sweep.
struct LocalReference {
  std::shared_ptr<const Grid> grid;
  GradientOperator op;
};

LocalReference make_local_reference(const SweepConfig& config);

EnergyParams sweep_energy(const SweepConfig& config, const Grid& grid);

struct SweepRecord {
  double value = 0.0;
  bool ok = false;
  std::string error;
  double state_error = 0.0;
  double gradient_error = 0.0;
  /// L^{p'} control error.
  double control_error = 0.0;
  /// One entry per configured r.
  std::vector<double> control_error_r;
  double cost = 0.0;
  double cost_gap = 0.0;
  double energy_gap = 0.0;
  int iterations = 0;
  double stationarity = 0.0;
  double wall_time = 0.0;
};

struct SweepResult {
  SweepConfig config;
  double reference_cost = 0.0;
  double reference_energy = 0.0;
  double reference_state_norm = 0.0;
  std::vector<SweepRecord> records;
};

/// Solves the local reference control problem once and each nonlocal ladder
/// problem; failures are recorded and the sweep continues.
SweepResult sweep(const SweepConfig& config);

/// Last value <= ratio * first value and every step grows by at most `slack`.
struct TrendVerdict {
  bool halved = false;
  bool near_monotone = false;
  bool pass() const { return halved && near_monotone; }
};

TrendVerdict check_trend(const std::vector<double>& values, double ratio = 0.5, double slack = 0.05);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// ||D u - grad u||_{L^p} over the comparison region for a smooth test field
/// given with its exact gradient (column-major n x n).
struct ProbeRecord {
  double value = 0.0;
  double error = 0.0;
};

std::vector<ProbeRecord> operator_probe(const SweepConfig& config, const PointFunction& u,
                                        const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& grad);

/// sin^2 bump on the middle half of each axis, with its gradient.
PointFunction bump_field(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);
std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> bump_gradient(const Eigen::VectorXd& lo,
                                                                      const Eigen::VectorXd& hi);

struct PoincareOptions {
  double tol = 1e-8;
  int max_iterations = 500;
  int starts = 10;
  std::uint64_t seed = 1;
  SolverOptions state{};
};

struct PoincareEstimate {
  double constant = 0.0;
  double eigenvalue = 0.0;
  int iterations = 0;
  /// True for p != 2, where the value is the best ratio found.
  bool lower_bound = false;
};

/// max ||u||_{L^p} / ||D u||_{L^p} over fields supported on the operator's
/// degrees of freedom. p = 2 uses inverse power iteration; other p use the
/// nonlinear inverse iteration u <- S(|u|^{p-2} u) from seeded starts.
PoincareEstimate estimate_poincare(const GradientOperator& op, double p, const PoincareOptions& options = {});

struct PoincareRecord {
  double value = 0.0;
  PoincareEstimate estimate;
};

std::vector<PoincareRecord> poincare_ladder(const SweepConfig& config, const PoincareOptions& options = {});

struct GammaRecord {
  double value = 0.0;
  double nonlocal_min = 0.0;
  double local_min = 0.0;
  double gap = 0.0;
  /// Nonlocal energy of the collar-restricted local minimizer.
  double nonlocal_at_local = 0.0;
};

/// Minimum energies for a fixed load g along the ladder.
std::vector<GammaRecord> gamma_proxy(const SweepConfig& config, const PointFunction& g);

}  // namespace nlgrad
