#include "nlgrad/localization.hpp"

#include "format.hpp"

#include <Eigen/Cholesky>

#include <chrono>
#include <cmath>
#include <future>
#include <numbers>
#include <random>
#include <sstream>

namespace nlgrad {

namespace {

using Clock = std::chrono::steady_clock;

// Lattice map from the nodes of `to` to the nodes of `from` (-1 if absent).
std::vector<Index> lattice_map(const Grid& from, const Grid& to) {
  std::vector<Index> map(static_cast<std::size_t>(to.num_nodes()), -1);
  for (Index i = 0; i < to.num_nodes(); ++i) map[static_cast<std::size_t>(i)] = from.index_of(to.lattice(i));
  return map;
}

double masked_lp(const Field& f, double p, double weight, const std::vector<bool>& mask) {
  return lp_norm(f, p, weight, mask);
}

// For every ladder value, run `job` and collect results in ladder order.
template <typename R, typename Job>
std::vector<R> run_ladder(const std::vector<double>& ladder, int threads, Job job) {
  std::vector<R> out(ladder.size());
  if (threads <= 1) {
    for (std::size_t k = 0; k < ladder.size(); ++k) out[k] = job(ladder[k]);
    return out;
  }
  for (std::size_t base = 0; base < ladder.size(); base += static_cast<std::size_t>(threads)) {
    std::vector<std::future<R>> jobs;
    const std::size_t end = std::min(ladder.size(), base + static_cast<std::size_t>(threads));
    for (std::size_t k = base; k < end; ++k) jobs.push_back(std::async(std::launch::async, job, ladder[k]));
    for (std::size_t k = base; k < end; ++k) out[k] = jobs[k - base].get();
  }
  return out;
}

double bump_1d(double t) {
  if (t <= 0.25 || t >= 0.75) return 0.0;
  const double v = std::sin(2.0 * std::numbers::pi * (t - 0.25));
  return v * v;
}

double bump_1d_prime(double t) {
  if (t <= 0.25 || t >= 0.75) return 0.0;
  return 2.0 * std::numbers::pi * std::sin(4.0 * std::numbers::pi * (t - 0.25));
}

}  // namespace

Field transfer(const Grid& from, const Field& f, const Grid& to) {
  Field out = Field::Zero(f.rows(), to.num_nodes());
  const auto map = lattice_map(from, to);
  for (Index i = 0; i < to.num_nodes(); ++i) {
    const Index j = map[static_cast<std::size_t>(i)];
    if (j >= 0 && from.in_omega(j)) out.col(i) = f.col(j);
  }
  return out;
}

Field sample_on_omega(const Grid& grid, const PointFunction& f) {
  Field out = zero_field(grid);
  for (Index i = 0; i < grid.num_nodes(); ++i) {
    if (grid.in_omega(i)) out.col(i) = f(grid.coordinate(i));
  }
  return out;
}

ControlProblem ControlSpec::instantiate(const Grid& grid) const {
  ControlProblem pr;
  pr.u_des = u_des ? sample_on_omega(grid, u_des) : zero_field(grid);
  pr.weight = Eigen::VectorXd::Constant(grid.num_nodes(), weight);
  pr.weight_floor = weight_floor;
  pr.bounds = make_box(grid, lower, upper);
  pr.epsilon = epsilon;
  return pr;
}

std::string to_string(SweepVariable v) { return v == SweepVariable::S ? "s" : "delta"; }

SweepConfig canonical_sweep(SweepVariable variable) {
  SweepConfig c;
  c.variable = variable;
  c.lo = Eigen::VectorXd::Zero(1);
  c.hi = Eigen::VectorXd::Ones(1);
  c.h = 1.0 / 128;
  c.delta = 0.25;
  c.s = 0.5;
  c.ladder = variable == SweepVariable::S ? std::vector<double>{0.3, 0.5, 0.7, 0.9, 0.95}
                                          : std::vector<double>{0.25, 0.125, 0.0625, 0.03125};
  c.control.u_des = [](const Eigen::VectorXd& x) {
    return Eigen::VectorXd::Constant(1, std::sin(std::numbers::pi * x[0])).eval();
  };
  c.control.weight = 0.3;
  c.control.weight_floor = 0.3;
  c.control.lower = Eigen::VectorXd::Constant(1, -10.0);
  c.control.upper = Eigen::VectorXd::Constant(1, 10.0);
  return c;
}

std::vector<std::string> sweep_violations(const SweepConfig& c) {
  std::vector<std::string> out;
  const int n = static_cast<int>(c.lo.size());
  if (n < 1 || c.hi.size() != n) out.push_back("grid.lo and grid.hi must have the same positive dimension");
  if (c.ladder.empty()) out.push_back("sweep.ladder is empty");
  if (!(c.h > 0.0)) out.push_back("grid.h must be positive");
  if (c.variable == SweepVariable::S) {
    if (c.cutoff.a0 != 1.0) {
      out.push_back("kernel.a0 = " + detail::fmt_sci(c.cutoff.a0) +
                    ": s sweeps require a0 = 1 (plateau value one at the origin)");
    }
    for (double s : c.ladder) {
      if (!(s > 0.0 && s < 1.0)) out.push_back("sweep.ladder: s = " + detail::fmt_sci(s) + " outside (0, 1)");
    }
    if (integral_ratio(c.delta / c.h) < 2) out.push_back("kernel.delta / grid.h must be an integer >= 2");
  } else {
    if (!(c.s > 0.0 && c.s < 1.0)) out.push_back("kernel.s must lie in (0, 1)");
    for (double d : c.ladder) {
      if (!(d > 0.0 && d <= 1.0)) out.push_back("sweep.ladder: delta = " + detail::fmt_sci(d) + " outside (0, 1]");
      if (integral_ratio(d / c.h) < 2) {
        out.push_back("sweep.ladder: delta / h = " + detail::fmt_sci(d / c.h) + " is not an integer >= 2");
      }
    }
  }
  if (c.control.lower.size() != n || c.control.upper.size() != n) {
    out.push_back("control bounds must have dimension " + std::to_string(n));
  } else {
    for (int a = 0; a < n; ++a) {
      if (!(c.control.lower[a] <= c.control.upper[a])) {
        out.push_back("control.lower > control.upper in component " + std::to_string(a));
      }
    }
  }
  if (!(c.control.weight_floor > 0.0)) out.push_back("control.lambda_min must be positive");
  if (!(c.control.weight >= c.control.weight_floor)) out.push_back("control.lambda is below control.lambda_min");
  if (!(c.p > 1.0)) out.push_back("energy.p must exceed 1");
  for (double r : c.r_list) {
    if (!(r >= 1.0)) out.push_back("control.r_list entries must be >= 1");
  }
  return out;
}

void validate_sweep(const SweepConfig& config) {
  const auto v = sweep_violations(config);
  if (v.empty()) return;
  std::ostringstream os;
  os << "invalid sweep configuration:";
  for (const auto& m : v) os << "\n  " << m;
  throw std::invalid_argument(os.str());
}

LadderPoint make_ladder_point(const SweepConfig& config, double value) {
  LadderPoint pt;
  pt.value = value;
  KernelSpec k;
  k.n = static_cast<int>(config.lo.size());
  k.cutoff = config.cutoff;
  if (config.variable == SweepVariable::S) {
    k.s = value;
    k.delta = config.delta;
    k.mode = KernelMode::FixedHorizon;
  } else {
    k.s = config.s;
    k.delta = value;
    k.mode = KernelMode::RescaledFromUnit;
    k = normalize_mass(k, static_cast<double>(k.n));
  }
  pt.grid = std::make_shared<const Grid>(build_grid(config.lo, config.hi, config.h, k.delta));
  pt.nl = assemble_nl_gradient(pt.grid, k);
  return pt;
}

LocalReference make_local_reference(const SweepConfig& config) {
  LocalReference ref;
  if (config.variable == SweepVariable::S) {
    ref.grid = std::make_shared<const Grid>(build_grid(config.lo, config.hi, config.h, config.delta));
    ref.op = make_local_operator(ref.grid, LocalDomain::Free);
  } else {
    ref.grid = std::make_shared<const Grid>(build_grid(config.lo, config.hi, config.h, config.h));
    ref.op = make_local_operator(ref.grid, LocalDomain::Omega);
  }
  return ref;
}

EnergyParams sweep_energy(const SweepConfig& config, const Grid& grid) {
  EnergyParams params;
  params.p = config.p;
  if (config.coefficient.size() > 0) params.coefficient = constant_coefficient(grid, config.coefficient);
  return params;
}

namespace {

// Gradient comparison nodes on the reference grid: Omega for s sweeps, the
// free nodes of the ladder grid (chi of Omega_{-delta}) for delta sweeps.
std::vector<bool> compare_mask(const SweepConfig& config, const Grid& nl, const Grid& ref) {
  const auto map = lattice_map(nl, ref);
  std::vector<bool> mask(static_cast<std::size_t>(ref.num_nodes()), false);
  for (Index i = 0; i < ref.num_nodes(); ++i) {
    const Index j = map[static_cast<std::size_t>(i)];
    if (j < 0) continue;
    mask[static_cast<std::size_t>(i)] = config.variable == SweepVariable::S ? nl.in_omega(j) : nl.is_free(j);
  }
  return mask;
}

struct ReferenceSolution {
  LocalReference ref;
  EnergyParams params;
  ControlSolution sol;
  MatrixField grad;  // on reference grid nodes
  double energy = 0.0;
};

}  // namespace

SweepResult sweep(const SweepConfig& config) {
  validate_sweep(config);
  SweepResult result;
  result.config = config;

  ReferenceSolution R;
  R.ref = make_local_reference(config);
  const Grid& rg = *R.ref.grid;
  R.params = sweep_energy(config, rg);
  R.sol = solve_control_local(config.control.instantiate(rg), R.ref.op, R.params, config.options);
  if (!R.sol.report.converged) throw SolverFailure("sweep: local reference control did not converge");
  R.grad = R.ref.op.on_grid_nodes(R.ref.op.apply(R.sol.u));
  R.energy = eval_energy(R.sol.u, R.sol.g, R.ref.op, R.params).total;
  result.reference_cost = R.sol.report.cost;
  result.reference_energy = R.energy;
  result.reference_state_norm = lp_norm(rg, R.sol.u, config.p, Region::Omega);

  const double p = config.p;
  const double pc = p / (p - 1.0);
  const std::vector<bool> omega = omega_mask(rg);

  auto job = [&](double value) {
    SweepRecord rec;
    rec.value = value;
    const auto t0 = Clock::now();
    try {
      const LadderPoint pt = make_ladder_point(config, value);
      const Grid& g = *pt.grid;
      const EnergyParams params = sweep_energy(config, g);
      const ControlSolution sol = solve_control(config.control.instantiate(g), pt.nl.op, params, config.options);
      rec.iterations = sol.report.iterations;
      rec.stationarity = sol.report.stationarity;
      rec.cost = sol.report.cost;
      if (!sol.report.converged) {
        throw SolverFailure("control iteration cap reached (stationarity " + detail::fmt_sci(sol.report.stationarity) + ")");
      }
      const double w = rg.cell_volume();
      const Field du = transfer(g, sol.u, rg) - R.sol.u;
      rec.state_error = masked_lp(du, p, w, omega);
      const MatrixField grad = transfer(g, pt.nl.op.on_grid_nodes(pt.nl.op.apply(sol.u)), rg);
      rec.gradient_error = masked_lp(grad - R.grad, p, w, compare_mask(config, g, rg));
      const Field dg = transfer(g, sol.g, rg) - R.sol.g;
      rec.control_error = masked_lp(dg, pc, w, omega);
      for (double r : config.r_list) rec.control_error_r.push_back(masked_lp(dg, r, w, omega));
      rec.cost_gap = std::abs(sol.report.cost - R.sol.report.cost);
      rec.energy_gap = std::abs(eval_energy(sol.u, sol.g, pt.nl.op, params).total - R.energy);
      rec.ok = true;
    } catch (const std::exception& e) {
      rec.ok = false;
      rec.error = e.what();
    }
    rec.wall_time = std::chrono::duration<double>(Clock::now() - t0).count();
    return rec;
  };
  result.records = run_ladder<SweepRecord>(config.ladder, config.threads, job);
  return result;
}

TrendVerdict check_trend(const std::vector<double>& values, double ratio, double slack) {
  TrendVerdict v;
  if (values.empty()) return v;
  v.halved = values.back() <= ratio * values.front();
  v.near_monotone = true;
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (!(values[k] <= (1.0 + slack) * values[k - 1])) v.near_monotone = false;
  }
  return v;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need two or more points");
  const auto m = static_cast<Index>(x.size());
  Eigen::MatrixXd A(m, 2);
  Eigen::VectorXd b(m);
  for (Index k = 0; k < m; ++k) {
    A(k, 0) = std::log(x[static_cast<std::size_t>(k)]);
    A(k, 1) = 1.0;
    b[k] = std::log(y[static_cast<std::size_t>(k)]);
  }
  const Eigen::Vector2d coef = (A.transpose() * A).ldlt().solve(A.transpose() * b);
  return coef[0];
}

PointFunction bump_field(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  return [lo, hi](const Eigen::VectorXd& x) {
    double b = 1.0;
    for (Index a = 0; a < x.size(); ++a) b *= bump_1d((x[a] - lo[a]) / (hi[a] - lo[a]));
    return Eigen::VectorXd::Constant(x.size(), b).eval();
  };
}

std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> bump_gradient(const Eigen::VectorXd& lo,
                                                                      const Eigen::VectorXd& hi) {
  return [lo, hi](const Eigen::VectorXd& x) {
    const Index n = x.size();
    Eigen::MatrixXd G(n, n);
    for (Index b = 0; b < n; ++b) {
      double d = bump_1d_prime((x[b] - lo[b]) / (hi[b] - lo[b])) / (hi[b] - lo[b]);
      for (Index a = 0; a < n; ++a) {
        if (a != b) d *= bump_1d((x[a] - lo[a]) / (hi[a] - lo[a]));
      }
      G.col(b).setConstant(d);
    }
    return G;
  };
}

std::vector<ProbeRecord> operator_probe(const SweepConfig& config, const PointFunction& u,
                                        const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& grad) {
  validate_sweep(config);
  auto job = [&](double value) {
    const LadderPoint pt = make_ladder_point(config, value);
    const Grid& g = *pt.grid;
    const int n = g.dim();
    Field f(n, g.num_nodes());
    for (Index i = 0; i < g.num_nodes(); ++i) f.col(i) = u(g.coordinate(i));
    const MatrixField Du = pt.nl.op.on_grid_nodes(pt.nl.op.apply(f));
    MatrixField err = Du;
    std::vector<bool> mask(static_cast<std::size_t>(g.num_nodes()));
    for (Index i = 0; i < g.num_nodes(); ++i) {
      const Eigen::MatrixXd G = grad(g.coordinate(i));
      err.col(i) -= Eigen::Map<const Eigen::VectorXd>(G.data(), n * n);
      mask[static_cast<std::size_t>(i)] = config.variable == SweepVariable::S ? g.in_omega(i) : g.is_free(i);
    }
    return ProbeRecord{value, lp_norm(err, config.p, g.cell_volume(), mask)};
  };
  return run_ladder<ProbeRecord>(config.ladder, config.threads, job);
}

PoincareEstimate estimate_poincare(const GradientOperator& op, double p, const PoincareOptions& options) {
  const Grid& grid = op.grid();
  PoincareEstimate est;
  EnergyParams quad;
  quad.p = 2.0;
  const MatrixField zero_grad = MatrixField::Zero(op.dim() * op.dim(), op.num_eval());
  auto K = [&](const Field& v) { return linearized_apply_at(zero_grad, v, op, quad); };
  Field ones = restrict_to_dofs(op, Field::Ones(grid.dim(), grid.num_nodes()));
  if (ones.squaredNorm() == 0.0) throw std::invalid_argument("estimate_poincare: operator has no degrees of freedom");

  if (p == 2.0) {
    Field x = ones / ones.norm();
    double lambda = 0.0;
    for (est.iterations = 1; est.iterations <= options.max_iterations; ++est.iterations) {
      Field y = conjugate_gradient(K, x, x, 1e-12, options.state.cg_max_iterations).x;
      const double next = x.cwiseProduct(y).sum() / y.squaredNorm();
      x = y / y.norm();
      if (est.iterations > 1 && std::abs(next - lambda) <= options.tol * next) {
        lambda = next;
        est.eigenvalue = lambda;
        est.constant = 1.0 / std::sqrt(lambda);
        return est;
      }
      lambda = next;
    }
    throw SolverFailure("estimate_poincare: inverse iteration cap reached (eigenvalue " + detail::fmt_sci(lambda) + ")");
  }

  // nonlinear inverse iteration; each step does not decrease the ratio
  EnergyParams params;
  params.p = p;
  auto ratio = [&](const Field& u) {
    const MatrixField Du = op.apply(u);
    double acc = 0.0;
    for (Index m = 0; m < op.num_eval(); ++m) acc += op.quad_weights()[m] * std::pow(Du.col(m).norm(), p);
    return lp_norm(u, p, grid.cell_volume(), {}) / std::pow(acc, 1.0 / p);
  };
  est.lower_bound = true;
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> N;
  SolverOptions sopts = options.state;
  sopts.record_history = false;
  for (int start = 0; start < options.starts; ++start) {
    Field u(grid.dim(), grid.num_nodes());
    if (start == 0) {
      u = ones;
    } else {
      for (Index e = 0; e < u.size(); ++e) u.data()[e] = N(rng);
      u = restrict_to_dofs(op, u);
    }
    double r = ratio(u);
    for (int it = 0; it < options.max_iterations; ++it) {
      Field load = u;
      for (Index i = 0; i < load.cols(); ++i) {
        const double nrm = load.col(i).norm();
        if (nrm > 0.0) load.col(i) *= std::pow(nrm, p - 2.0);
      }
      load /= lp_norm(load, p / (p - 1.0), grid.cell_volume(), {});
      Field v = solve_state_auto(load, op, params, sopts, &u).u;
      v /= lp_norm(v, p, grid.cell_volume(), {});
      const double rn = ratio(v);
      ++est.iterations;
      u = std::move(v);
      const bool done = std::abs(rn - r) <= options.tol * rn;
      r = std::max(r, rn);
      if (done) break;
    }
    est.constant = std::max(est.constant, r);
  }
  return est;
}

std::vector<PoincareRecord> poincare_ladder(const SweepConfig& config, const PoincareOptions& options) {
  validate_sweep(config);
  auto job = [&](double value) {
    const LadderPoint pt = make_ladder_point(config, value);
    return PoincareRecord{value, estimate_poincare(pt.nl.op, config.p, options)};
  };
  return run_ladder<PoincareRecord>(config.ladder, config.threads, job);
}

std::vector<GammaRecord> gamma_proxy(const SweepConfig& config, const PointFunction& load) {
  validate_sweep(config);
  const LocalReference ref = make_local_reference(config);
  const Grid& rg = *ref.grid;
  const EnergyParams rparams = sweep_energy(config, rg);
  const Field g_ref = sample_on_omega(rg, load);
  SolverOptions opts = control_state_options();
  const Field u_loc = solve_state_auto(g_ref, ref.op, rparams, opts).u;
  const double local_min = eval_energy(u_loc, g_ref, ref.op, rparams).total;

  auto job = [&](double value) {
    const LadderPoint pt = make_ladder_point(config, value);
    const Grid& g = *pt.grid;
    const EnergyParams params = sweep_energy(config, g);
    const Field gl = sample_on_omega(g, load);
    const Field u = solve_state_auto(gl, pt.nl.op, params, opts).u;
    GammaRecord rec;
    rec.value = value;
    rec.nonlocal_min = eval_energy(u, gl, pt.nl.op, params).total;
    rec.local_min = local_min;
    rec.gap = std::abs(rec.nonlocal_min - local_min);
    const Field competitor = apply_collar_zero(g, transfer(rg, u_loc, g));
    rec.nonlocal_at_local = eval_energy(competitor, gl, pt.nl.op, params).total;
    return rec;
  };
  return run_ladder<GammaRecord>(config.ladder, config.threads, job);
}

}  // namespace nlgrad
