#include "nlgrad/state_solver.hpp"

#include "format.hpp"

#include <chrono>
#include <cmath>
#include <deque>
#include <future>
#include <limits>
#include <random>

namespace nlgrad {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double l2_norm(const Grid& grid, const Field& f) { return std::sqrt(l2_dot(grid, f, f)); }

void require_shape(const GradientOperator& op, const Field& f, const char* what) {
  if (f.rows() != op.dim() || f.cols() != op.grid().num_nodes()) {
    throw std::invalid_argument(std::string(what) + ": field shape does not match the grid");
  }
}

}  // namespace

CgResult conjugate_gradient(const std::function<Field(const Field&)>& apply, const Field& b,
                            const Field& x0, double rel_tol, int max_iterations) {
  CgResult out;
  out.x = x0;
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    out.x.setZero();
    return out;
  }
  Field r = b - apply(out.x);
  Field d = r;
  double rr = r.squaredNorm();
  out.relative_residual = std::sqrt(rr) / bnorm;
  double best = out.relative_residual;
  int best_at = 0;
  while (out.relative_residual > rel_tol) {
    if (out.iterations - best_at > 1000) {
      throw SolverFailure("conjugate_gradient: stagnated at relative residual " + detail::fmt_sci(best) +
                          " (target " + detail::fmt_sci(rel_tol) + ")");
    }
    if (out.iterations >= max_iterations) {
      throw SolverFailure("conjugate_gradient: no convergence after " + std::to_string(max_iterations) +
                          " iterations (relative residual " + detail::fmt_sci(out.relative_residual) + ")");
    }
    const Field Ad = apply(d);
    const double dAd = d.cwiseProduct(Ad).sum();
    if (!(dAd > 0.0)) {
      throw SolverFailure("conjugate_gradient: operator is not positive definite (d'Ad = " +
                          detail::fmt_sci(dAd) + ")");
    }
    const double alpha = rr / dAd;
    out.x += alpha * d;
    r -= alpha * Ad;
    ++out.iterations;
    // periodic true residual to avoid drift
    if (out.iterations % 50 == 0) r = b - apply(out.x);
    const double rr_new = r.squaredNorm();
    d = r + (rr_new / rr) * d;
    rr = rr_new;
    out.relative_residual = std::sqrt(rr) / bnorm;
    if (out.relative_residual < 0.5 * best) {
      best = out.relative_residual;
      best_at = out.iterations;
    }
  }
  // confirm with the true residual
  const Field rt = b - apply(out.x);
  out.relative_residual = rt.norm() / bnorm;
  if (out.relative_residual > 10.0 * rel_tol) {
    return conjugate_gradient(apply, b, out.x, rel_tol, max_iterations - out.iterations);
  }
  return out;
}

StateSolution solve_state_p2(const Field& g, const GradientOperator& op, const EnergyParams& params,
                             const SolverOptions& options, const Field* init) {
  const auto t0 = Clock::now();
  if (params.p != 2.0 || params.density != DensityKind::PLaplacian) {
    throw std::invalid_argument("solve_state_p2: requires the p = 2 p-Laplacian density");
  }
  require_shape(op, g, "solve_state_p2");
  const Grid& grid = op.grid();
  const MatrixField zero_grad = MatrixField::Zero(op.dim() * op.dim(), op.num_eval());
  auto apply = [&](const Field& v) { return linearized_apply_at(zero_grad, v, op, params); };
  const Field b = restrict_to_dofs(op, g);
  const Field x0 = init ? restrict_to_dofs(op, *init) : zero_field(grid);
  const CgResult cg = conjugate_gradient(apply, b, x0, options.cg_tol, options.cg_max_iterations);

  StateSolution sol;
  sol.u = restrict_to_dofs(op, cg.x);
  SolveReport& rep = sol.report;
  rep.method = "cg";
  rep.iterations = cg.iterations;
  rep.energy = eval_energy(sol.u, g, op, params).total;
  rep.variation_norm = l2_norm(grid, eval_first_variation(sol.u, g, op, params));
  rep.converged = true;
  rep.wall_time = seconds_since(t0);
  if (options.record_history) rep.history.push_back({rep.iterations, rep.energy, rep.variation_norm});
  return sol;
}

StateSolution solve_state(const Field& g, const GradientOperator& op, const EnergyParams& params,
                          const Field& init, const SolverOptions& options) {
  const auto t0 = Clock::now();
  require_shape(op, g, "solve_state");
  require_shape(op, init, "solve_state");
  const Grid& grid = op.grid();
  auto dot = [&](const Field& a, const Field& b) { return l2_dot(grid, a, b); };

  StateSolution sol;
  SolveReport& rep = sol.report;
  rep.method = "lbfgs";
  Field u = restrict_to_dofs(op, init);
  double E = eval_energy(u, g, op, params).total;
  Field r = eval_first_variation(u, g, op, params);
  double rnorm = std::sqrt(dot(r, r));
  if (!std::isfinite(E)) throw SolverFailure("solve_state: non-finite initial energy");
  const double target = options.tol * std::max(1.0, l2_norm(grid, restrict_to_dofs(op, g)));

  std::deque<Field> S, Y;
  std::deque<double> rho;
  auto record = [&]() {
    if (options.record_history) rep.history.push_back({rep.iterations, E, rnorm});
  };
  record();

  while (rnorm > target) {
    if (rep.iterations >= options.max_iterations) break;
    // two-loop recursion in the L^2 inner product
    Field q = r;
    std::vector<double> alpha(S.size());
    for (std::size_t k = S.size(); k-- > 0;) {
      alpha[k] = rho[k] * dot(S[k], q);
      q -= alpha[k] * Y[k];
    }
    if (!S.empty()) {
      q *= dot(S.back(), Y.back()) / dot(Y.back(), Y.back());
    } else {
      // first step: unit length in L^2
      q /= std::max(rnorm, 1.0);
    }
    for (std::size_t k = 0; k < S.size(); ++k) {
      const double beta = rho[k] * dot(Y[k], q);
      q += (alpha[k] - beta) * S[k];
    }
    Field d = -q;
    double slope = dot(r, d);
    if (!(slope < 0.0)) {
      S.clear();
      Y.clear();
      rho.clear();
      d = -r / std::max(rnorm, 1.0);
      slope = dot(r, d);
    }

    double step = 1.0;
    bool accepted = false;
    Field u_new;
    Field r_new;
    double E_new = E;
    for (int bt = 0; bt <= options.max_backtracks; ++bt) {
      u_new = u + step * d;
      r_new.resize(0, 0);
      const EnergyValue ev = eval_energy(u_new, g, op, params);
      E_new = ev.total;
      // roundoff level of the energy difference
      const double noise = 64.0 * std::numeric_limits<double>::epsilon() * (std::abs(ev.density) + std::abs(ev.load));
      const double decrease = options.armijo * step * slope;
      if (std::isfinite(E_new)) {
        if (-decrease > noise) {
          accepted = E_new <= E + decrease;
        } else if (E_new <= E + noise) {
          // energy differences are at roundoff: approximate Wolfe test on the
          // trapezoid estimate of the decrease (Hager-Zhang)
          r_new = eval_first_variation(u_new, g, op, params);
          accepted = dot(r_new, d) <= (2.0 * options.armijo - 1.0) * slope;
        }
      }
      if (accepted) break;
      step *= options.backtrack;
      ++rep.backtracks;
    }
    if (!accepted) {
      throw SolverFailure("solve_state: line search failed after " + std::to_string(options.max_backtracks) +
                          " backtracks (first variation " + detail::fmt_sci(rnorm) + ", target " +
                          detail::fmt_sci(target) + ")");
    }
    if (r_new.size() == 0) r_new = eval_first_variation(u_new, g, op, params);
    Field s = u_new - u;
    Field y = r_new - r;
    const double sy = dot(s, y);
    if (sy > 1e-14 * std::sqrt(dot(s, s) * dot(y, y))) {
      S.push_back(std::move(s));
      Y.push_back(std::move(y));
      rho.push_back(1.0 / sy);
      if (static_cast<int>(S.size()) > options.memory) {
        S.pop_front();
        Y.pop_front();
        rho.pop_front();
      }
    }
    u = std::move(u_new);
    r = std::move(r_new);
    E = E_new;
    rnorm = std::sqrt(dot(r, r));
    ++rep.iterations;
    record();
  }

  sol.u = std::move(u);
  rep.energy = E;
  rep.variation_norm = rnorm;
  rep.converged = rnorm <= target;
  rep.wall_time = seconds_since(t0);
  return sol;
}

StateSolution solve_state_auto(const Field& g, const GradientOperator& op, const EnergyParams& params,
                               const SolverOptions& options, const Field* init) {
  if (params.p == 2.0 && params.density == DensityKind::PLaplacian) {
    return solve_state_p2(g, op, params, options, init);
  }
  const Field start = init ? *init : zero_field(op.grid());
  StateSolution sol = solve_state(g, op, params, start, options);
  if (!sol.report.converged) {
    throw SolverFailure("solve_state: iteration cap reached with first variation " +
                        detail::fmt_sci(sol.report.variation_norm));
  }
  return sol;
}

GradientOperator make_local_operator(std::shared_ptr<const Grid> grid, LocalDomain domain) {
  const std::vector<bool> mask = domain == LocalDomain::Free ? free_mask(*grid) : omega_mask(*grid);
  return assemble_local_gradient(std::move(grid), mask);
}

StateSolution solve_state_local(const Field& g, const GradientOperator& local_op,
                                const EnergyParams& params, const SolverOptions& options) {
  return solve_state_auto(g, local_op, params, options);
}

MultistartResult multistart_state(const Field& g, const GradientOperator& op, const EnergyParams& params,
                                  int starts, std::uint64_t seed, const SolverOptions& options,
                                  double scale, int threads) {
  if (starts < 1) throw std::invalid_argument("multistart_state: need at least one start");
  const Grid& grid = op.grid();
  std::vector<Field> inits;
  inits.push_back(zero_field(grid));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, scale);
  for (int k = 1; k < starts; ++k) {
    Field f(grid.dim(), grid.num_nodes());
    for (Index e = 0; e < f.size(); ++e) f.data()[e] = N(rng);
    inits.push_back(restrict_to_dofs(op, f));
  }

  std::vector<StateSolution> results(static_cast<std::size_t>(starts));
  auto run = [&](int k) { results[static_cast<std::size_t>(k)] = solve_state(g, op, params, inits[static_cast<std::size_t>(k)], options); };
  if (threads > 1) {
    for (int base = 0; base < starts; base += threads) {
      std::vector<std::future<void>> jobs;
      for (int k = base; k < std::min(starts, base + threads); ++k) jobs.push_back(std::async(std::launch::async, run, k));
      for (auto& j : jobs) j.get();
    }
  } else {
    for (int k = 0; k < starts; ++k) run(k);
  }

  MultistartResult out;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  double best_norm = 0.0;
  for (std::size_t k = 0; k < results.size(); ++k) {
    const double e = results[k].report.energy;
    const double nrm = l2_norm(grid, results[k].u);
    hi = std::max(hi, e);
    if (e < lo || (e == lo && nrm < best_norm)) {
      lo = e;
      best_norm = nrm;
      out.best_index = k;
    }
  }
  out.energy_spread = hi - lo;
  out.best = results[out.best_index].u;
  for (auto& r : results) {
    out.reports.push_back(std::move(r.report));
    out.states.push_back(std::move(r.u));
  }
  return out;
}

}  // namespace nlgrad
