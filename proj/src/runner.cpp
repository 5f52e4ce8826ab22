#include "nlgrad/runner.hpp"

#include "nlgrad/checks.hpp"
#include "nlgrad/io.hpp"

#include "json.hpp"

#include <chrono>
#include <cmath>
#include <iostream>

#ifndef NLGRAD_VERSION
#define NLGRAD_VERSION "unknown"
#endif

namespace nlgrad {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;
namespace fs = std::filesystem;

// Non-finite values are written as strings so the summary stays valid JSON.
json number(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

std::string num(double v) { return format_number(v); }

struct Output {
  fs::path dir;
  json summary = json::object();
  json timings = json::object();
};

std::vector<std::string> node_header(int n, const std::vector<std::string>& fields) {
  std::vector<std::string> h{"node"};
  for (int a = 0; a < n; ++a) h.push_back("x" + std::to_string(a));
  h.push_back("class");
  for (const auto& f : fields) {
    for (int a = 0; a < n; ++a) h.push_back(f + std::to_string(a));
  }
  return h;
}

void write_nodes(const fs::path& path, const Grid& grid, const std::vector<std::pair<std::string, const Field*>>& fields) {
  std::vector<std::string> names;
  for (const auto& f : fields) names.push_back(f.first);
  std::vector<std::vector<std::string>> rows;
  for (Index i = 0; i < grid.num_nodes(); ++i) {
    std::vector<std::string> r{std::to_string(i)};
    const Eigen::VectorXd x = grid.coordinate(i);
    for (Index a = 0; a < x.size(); ++a) r.push_back(num(x[a]));
    r.push_back(to_string(grid.node_class(i)));
    for (const auto& f : fields) {
      for (Index a = 0; a < f.second->rows(); ++a) r.push_back(num((*f.second)(a, i)));
    }
    rows.push_back(std::move(r));
  }
  write_csv(path, node_header(grid.dim(), names), rows);
}

NonlocalGradientOp assemble(const ExperimentConfig& c, std::shared_ptr<const Grid> grid) {
  return assemble_nl_gradient(std::move(grid), c.kernel);
}

json trend_json(const TrendVerdict& v) {
  return {{"halved", v.halved}, {"near_monotone", v.near_monotone}, {"pass", v.pass()}};
}

int run_check(const ExperimentConfig& c, Output& out) {
  CheckOptions opts;
  opts.seed = c.seed;
  const auto results = run_checks(opts);
  std::vector<std::vector<std::string>> rows;
  json checks = json::array();
  bool all = true;
  for (const auto& r : results) {
    rows.push_back({r.name, std::to_string(r.criterion), num(r.value), num(r.threshold), r.pass ? "1" : "0"});
    checks.push_back({{"name", r.name}, {"criterion", r.criterion}, {"value", number(r.value)},
                      {"threshold", r.threshold}, {"pass", r.pass}, {"detail", r.detail}});
    out.timings[r.name] = r.wall_time;
    all = all && r.pass;
    std::cerr << (r.pass ? "PASS " : "FAIL ") << r.name << " value " << num(r.value) << " threshold "
              << num(r.threshold) << '\n';
  }
  write_csv(out.dir / "results.csv", {"name", "criterion", "value", "threshold", "pass"}, rows);
  out.summary["all_pass"] = all;
  out.summary["checks"] = checks;
  return all ? kExitSuccess : kExitCheckFailed;
}

int run_solve_state(const ExperimentConfig& c, Output& out) {
  const auto grid = make_grid(c);
  const auto nl = assemble(c, grid);
  const EnergyParams params = make_energy(c, *grid);
  const Field g = sample_on_omega(*grid, parse_source(c.load, c.lo, c.hi));
  const StateSolution sol = solve_state_auto(g, nl.op, params, c.state);
  write_nodes(out.dir / "results.csv", *grid, {{"g", &g}, {"u", &sol.u}});
  if (c.write_fields) {
    write_field(out.dir / "fields" / "g.bin", g);
    write_field(out.dir / "fields" / "u.bin", sol.u);
  }
  const auto& rep = sol.report;
  out.summary["method"] = rep.method;
  out.summary["converged"] = rep.converged;
  out.summary["iterations"] = rep.iterations;
  out.summary["energy"] = number(rep.energy);
  out.summary["variation_norm"] = number(rep.variation_norm);
  out.summary["discrete_mass"] = nl.discrete_mass;
  out.timings["solve"] = rep.wall_time;
  return rep.converged ? kExitSuccess : kExitSolver;
}

int run_solve_control(const ExperimentConfig& c, Output& out) {
  const auto grid = make_grid(c);
  const auto nl = assemble(c, grid);
  const EnergyParams params = make_energy(c, *grid);
  const ControlProblem problem = make_control_spec(c).instantiate(*grid);
  ControlOptions opts = c.control;
  const ControlSolution sol = solve_control(problem, nl.op, params, opts);
  write_nodes(out.dir / "results.csv", *grid, {{"u_des", &problem.u_des}, {"g", &sol.g}, {"u", &sol.u}});
  if (c.write_fields) {
    write_field(out.dir / "fields" / "g.bin", sol.g);
    write_field(out.dir / "fields" / "u.bin", sol.u);
  }
  const auto& rep = sol.report;
  out.summary["converged"] = rep.converged;
  out.summary["iterations"] = rep.iterations;
  out.summary["cost"] = {{"total", sol.cost.total}, {"tracking", sol.cost.tracking}, {"penalty", sol.cost.penalty}};
  out.summary["stationarity"] = number(rep.stationarity);
  out.summary["scale"] = rep.scale;
  out.summary["state_solves"] = rep.state_solves;
  out.timings["solve"] = rep.wall_time;
  return rep.converged ? kExitSuccess : kExitSolver;
}

void write_plot(const fs::path& path, const std::vector<double>& x, const std::vector<double>& y) {
  std::string text;
  for (std::size_t k = 0; k < x.size(); ++k) text += num(x[k]) + ' ' + num(y[k]) + '\n';
  write_text(path, text);
}

int run_sweep(const ExperimentConfig& c, Output& out) {
  const SweepConfig sc = to_sweep_config(c);
  const auto t0 = Clock::now();
  const SweepResult res = sweep(sc);
  out.timings["sweep"] = std::chrono::duration<double>(Clock::now() - t0).count();

  std::vector<std::string> header{to_string(sc.variable), "ok", "state_error", "gradient_error", "control_error"};
  for (double r : sc.r_list) header.push_back("control_error_r" + format_number(r));
  for (const char* h : {"cost", "cost_gap", "energy_gap", "iterations", "stationarity"}) header.push_back(h);

  std::vector<std::vector<std::string>> rows;
  std::vector<double> x;
  std::vector<std::vector<double>> metrics(header.size());
  json failures = json::array();
  json times = json::array();
  bool all_ok = true;
  for (const auto& rec : res.records) {
    std::vector<double> vals{rec.state_error, rec.gradient_error, rec.control_error};
    for (double v : rec.control_error_r) vals.push_back(v);
    vals.resize(3 + sc.r_list.size(), std::nan(""));
    for (double v : {rec.cost, rec.cost_gap, rec.energy_gap}) vals.push_back(v);
    std::vector<std::string> row{num(rec.value), rec.ok ? "1" : "0"};
    for (double v : vals) row.push_back(num(v));
    row.push_back(std::to_string(rec.iterations));
    row.push_back(num(rec.stationarity));
    rows.push_back(std::move(row));
    x.push_back(rec.value);
    for (std::size_t k = 0; k < vals.size(); ++k) metrics[k + 2].push_back(vals[k]);
    times.push_back(rec.wall_time);
    if (!rec.ok) {
      all_ok = false;
      failures.push_back({{"value", rec.value}, {"error", rec.error}});
    }
  }
  write_csv(out.dir / "results.csv", header, rows);

  json trends = json::object();
  bool trend_pass = true;
  for (std::size_t k = 2; k < 2 + 3 + sc.r_list.size() + 3; ++k) {
    if (header[k] == "cost") continue;
    write_plot(out.dir / "plots" / (header[k] + ".dat"), x, metrics[k]);
    if (header[k] == "energy_gap") continue;
    const TrendVerdict v = check_trend(metrics[k]);
    trends[header[k]] = trend_json(v);
    trend_pass = trend_pass && v.pass();
  }
  out.summary["variable"] = to_string(sc.variable);
  out.summary["reference"] = {{"cost", res.reference_cost},
                              {"energy", res.reference_energy},
                              {"state_norm", res.reference_state_norm}};
  out.summary["trends"] = trends;
  out.summary["trend_pass"] = all_ok && trend_pass;
  out.summary["failures"] = failures;
  out.timings["records"] = times;
  return all_ok ? kExitSuccess : kExitSolver;
}

int run_poincare(const ExperimentConfig& c, Output& out) {
  const SweepConfig sc = to_sweep_config(c);
  PoincareOptions opts;
  opts.seed = c.seed;
  opts.starts = c.poincare_starts;
  const auto t0 = Clock::now();
  const auto recs = poincare_ladder(sc, opts);
  out.timings["poincare"] = std::chrono::duration<double>(Clock::now() - t0).count();
  std::vector<std::vector<std::string>> rows;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  std::vector<double> x, y;
  for (const auto& r : recs) {
    rows.push_back({num(r.value), num(r.estimate.constant), num(r.estimate.eigenvalue),
                    std::to_string(r.estimate.iterations), r.estimate.lower_bound ? "1" : "0"});
    lo = std::min(lo, r.estimate.constant);
    hi = std::max(hi, r.estimate.constant);
    x.push_back(r.value);
    y.push_back(r.estimate.constant);
  }
  write_csv(out.dir / "results.csv", {to_string(sc.variable), "constant", "eigenvalue", "iterations", "lower_bound"},
            rows);
  write_plot(out.dir / "plots" / "constant.dat", x, y);
  out.summary["variable"] = to_string(sc.variable);
  out.summary["max_over_min"] = number(hi / lo);
  out.summary["bounded_by_5"] = hi / lo <= 5.0;
  return kExitSuccess;
}

int run_probe(const ExperimentConfig& c, Output& out) {
  const SweepConfig sc = to_sweep_config(c);
  const auto t0 = Clock::now();
  const auto recs = operator_probe(sc, bump_field(c.lo, c.hi), bump_gradient(c.lo, c.hi));
  out.timings["probe"] = std::chrono::duration<double>(Clock::now() - t0).count();
  std::vector<std::vector<std::string>> rows;
  std::vector<double> x, y;
  bool decreasing = true;
  for (const auto& r : recs) {
    rows.push_back({num(r.value), num(r.error)});
    if (!y.empty() && !(r.error < y.back())) decreasing = false;
    x.push_back(r.value);
    y.push_back(r.error);
  }
  write_csv(out.dir / "results.csv", {to_string(sc.variable), "error"}, rows);
  write_plot(out.dir / "plots" / "error.dat", x, y);
  out.summary["variable"] = to_string(sc.variable);
  out.summary["field"] = "bump";
  out.summary["strictly_decreasing"] = decreasing;
  if (sc.variable == SweepVariable::Delta && x.size() >= 2) {
    const double slope = loglog_slope(x, y);
    out.summary["loglog_slope"] = number(slope);
    out.summary["slope_within_factor_3_of_1"] = slope >= 1.0 / 3.0 && slope <= 3.0;
  }
  return kExitSuccess;
}

}  // namespace

int run_experiment(ExperimentConfig config, const RunOptions& options) {
  if (options.seed) config.seed = *options.seed;
  if (options.threads) config.threads = *options.threads;
  if (options.out) config.out_dir = options.out->string();

  const auto violations = config_violations(config);
  if (!violations.empty()) {
    std::cerr << "invalid configuration:\n";
    for (const auto& v : violations) std::cerr << "  " << v << '\n';
    return kExitValidation;
  }

  Output out;
  out.dir = config.out_dir;
  fs::create_directories(out.dir);
  const auto t0 = Clock::now();
  int status = kExitSuccess;
  std::string error;
  try {
    switch (config.kind) {
      case ExperimentKind::Check: status = run_check(config, out); break;
      case ExperimentKind::SolveState: status = run_solve_state(config, out); break;
      case ExperimentKind::SolveControl: status = run_solve_control(config, out); break;
      case ExperimentKind::SweepS:
      case ExperimentKind::SweepDelta: status = run_sweep(config, out); break;
      case ExperimentKind::Poincare: status = run_poincare(config, out); break;
      case ExperimentKind::OperatorProbe: status = run_probe(config, out); break;
    }
  } catch (const std::invalid_argument& e) {
    error = e.what();
    status = kExitValidation;
  } catch (const std::exception& e) {
    error = e.what();
    status = kExitSolver;
  }
  if (!error.empty()) std::cerr << "error: " << error << '\n';
  out.timings["total"] = std::chrono::duration<double>(Clock::now() - t0).count();

  out.summary["kind"] = to_string(config.kind);
  out.summary["status"] = status;
  if (!error.empty()) out.summary["error"] = error;
  write_text(out.dir / "summary.json", out.summary.dump(2) + '\n');

  json manifest;
  manifest["kind"] = to_string(config.kind);
  manifest["version"] = NLGRAD_VERSION;
  manifest["config_path"] = options.config_path;
  manifest["config"] = config.source_text;
  manifest["overrides"] = {{"seed", config.seed}, {"threads", config.threads}, {"out", config.out_dir}};
  manifest["timings"] = out.timings;
  manifest["status"] = status;
  write_text(out.dir / "manifest.json", manifest.dump(2) + '\n');
  return status;
}

}  // namespace nlgrad
