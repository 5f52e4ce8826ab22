#include "nlgrad/config.hpp"

#include "format.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

namespace nlgrad {

namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"experiment", {"kind"}},
      {"grid", {"lo", "hi", "h", "delta"}},
      {"kernel", {"s", "delta", "b0", "a0", "profile", "mode", "mass_target"}},
      {"energy", {"p", "epsilon", "coefficient", "density", "load"}},
      {"control", {"u_des", "lambda", "lambda_min", "lower", "upper", "r_list", "epsilon"}},
      {"solver",
       {"state_tol", "state_max_iterations", "cg_tol", "control_tol", "control_max_iterations", "seed", "threads",
        "starts"}},
      {"sweep", {"variable", "ladder"}},
      {"output", {"dir", "fields"}},
  };
  return keys;
}

// "a/b" or a plain decimal, consuming the whole string.
double parse_number(std::string text) {
  boost::algorithm::trim(text);
  const auto slash = text.find('/');
  if (slash != std::string::npos) return parse_number(text.substr(0, slash)) / parse_number(text.substr(slash + 1));
  std::size_t used = 0;
  const double v = std::stod(text, &used);
  if (used != text.size()) throw std::invalid_argument("trailing characters");
  return v;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<std::string> parts;
  boost::algorithm::split(parts, text, boost::algorithm::is_any_of(","));
  std::vector<double> out;
  for (const auto& p : parts) out.push_back(parse_number(p));
  return out;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
}

class Reader {
 public:
  Reader(const pt::ptree& tree, std::vector<std::string>& errors) : tree_(tree), errors_(errors) {}

  template <typename T, typename Parse>
  void get(const std::string& path, T& target, Parse parse) {
    const auto node = tree_.get_optional<std::string>(pt::ptree::path_type(path, '.'));
    if (!node) return;
    try {
      target = parse(*node);
    } catch (const std::exception& e) {
      errors_.push_back(path + ": cannot parse '" + *node + "' (" + e.what() + ")");
    }
  }

  void number(const std::string& path, double& target) { get(path, target, parse_number); }

  void integer(const std::string& path, int& target) {
    get(path, target, [](const std::string& s) {
      const double v = parse_number(s);
      if (v != std::floor(v)) throw std::invalid_argument("not an integer");
      return static_cast<int>(v);
    });
  }

  bool has(const std::string& path) const {
    return static_cast<bool>(tree_.get_optional<std::string>(pt::ptree::path_type(path, '.')));
  }

 private:
  const pt::ptree& tree_;
  std::vector<std::string>& errors_;
};

std::string join(const std::vector<std::string>& v) {
  std::string out = "invalid configuration:";
  for (const auto& m : v) out += "\n  " + m;
  return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::invalid_argument(join(violations)), violations_(std::move(violations)) {}

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Check: return "check";
    case ExperimentKind::SolveState: return "solve-state";
    case ExperimentKind::SolveControl: return "solve-control";
    case ExperimentKind::SweepS: return "sweep-s";
    case ExperimentKind::SweepDelta: return "sweep-delta";
    case ExperimentKind::Poincare: return "poincare";
    case ExperimentKind::OperatorProbe: return "operator-probe";
  }
  return "?";
}

ExperimentKind parse_experiment_kind(const std::string& name) {
  for (ExperimentKind k : {ExperimentKind::Check, ExperimentKind::SolveState, ExperimentKind::SolveControl,
                           ExperimentKind::SweepS, ExperimentKind::SweepDelta, ExperimentKind::Poincare,
                           ExperimentKind::OperatorProbe}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown experiment kind '" + name + "'");
}

PointFunction parse_source(const std::string& spec, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  const auto colon = spec.find(':');
  const std::string name = boost::algorithm::trim_copy(spec.substr(0, colon));
  const double amp = colon == std::string::npos ? 1.0 : parse_number(spec.substr(colon + 1));
  if (name == "zero") {
    return [](const Eigen::VectorXd& x) { return Eigen::VectorXd::Zero(x.size()).eval(); };
  }
  if (name == "constant") {
    return [amp](const Eigen::VectorXd& x) { return Eigen::VectorXd::Constant(x.size(), amp).eval(); };
  }
  if (name == "sin") {
    return [amp, lo, hi](const Eigen::VectorXd& x) {
      double v = amp;
      for (Index a = 0; a < x.size(); ++a) v *= std::sin(std::numbers::pi * (x[a] - lo[a]) / (hi[a] - lo[a]));
      return Eigen::VectorXd::Constant(x.size(), v).eval();
    };
  }
  if (name == "bump") {
    const PointFunction b = bump_field(lo, hi);
    return [amp, b](const Eigen::VectorXd& x) { return (amp * b(x)).eval(); };
  }
  throw std::invalid_argument("unknown source '" + name + "' (zero, constant, sin, bump)");
}

ExperimentConfig parse_config(std::istream& in) {
  std::stringstream buffer;
  buffer << in.rdbuf();
  ExperimentConfig c;
  c.source_text = buffer.str();

  pt::ptree tree;
  try {
    std::istringstream text(c.source_text);
    pt::read_ini(text, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError({std::string("syntax: ") + e.what()});
  }

  std::vector<std::string> errors;
  for (const auto& [section, body] : tree) {
    const auto it = known_keys().find(section);
    if (it == known_keys().end() || body.empty()) {
      errors.push_back(section + ": unknown section");
      continue;
    }
    for (const auto& [key, value] : body) {
      if (!it->second.count(key)) errors.push_back(section + "." + key + ": unknown key");
    }
  }

  Reader r(tree, errors);
  r.get("experiment.kind", c.kind, parse_experiment_kind);

  std::vector<double> lo{0.0}, hi{1.0};
  r.get("grid.lo", lo, parse_list);
  r.get("grid.hi", hi, parse_list);
  c.lo = to_vector(lo);
  c.hi = to_vector(hi);
  r.number("grid.h", c.h);
  double delta = 0.25;
  r.number("grid.delta", delta);

  c.kernel.n = static_cast<int>(c.lo.size());
  c.kernel.delta = delta;
  r.number("kernel.s", c.kernel.s);
  if (r.has("kernel.delta")) {
    double kd = delta;
    r.number("kernel.delta", kd);
    if (std::abs(kd - delta) > 1e-12 * delta) errors.push_back("kernel.delta: differs from grid.delta");
  }
  r.number("kernel.b0", c.kernel.cutoff.b0);
  r.number("kernel.a0", c.kernel.cutoff.a0);
  r.get("kernel.profile", c.kernel.cutoff.profile, parse_cutoff_profile);
  r.get("kernel.mode", c.kernel.mode, parse_kernel_mode);
  r.get("kernel.mass_target", c.kernel.mass_target, [](const std::string& s) { return std::optional(parse_number(s)); });

  r.number("energy.p", c.p);
  r.number("energy.epsilon", c.epsilon);
  r.get("energy.coefficient", c.coefficient, [&](const std::string& s) -> Eigen::MatrixXd {
    if (boost::algorithm::trim_copy(s) == "identity") return {};
    const auto v = parse_list(s);
    const auto n = static_cast<std::size_t>(c.kernel.n);
    if (v.size() != n * n) throw std::invalid_argument("expected n^2 entries, column-major");
    return Eigen::Map<const Eigen::MatrixXd>(v.data(), c.kernel.n, c.kernel.n);
  });
  r.get("energy.density", c.p, [&](const std::string& s) {
    if (boost::algorithm::trim_copy(s) != "p-laplacian") throw std::invalid_argument("only p-laplacian is configurable");
    return c.p;
  });
  r.get("energy.load", c.load, [](const std::string& s) { return s; });

  r.get("control.u_des", c.u_des, [](const std::string& s) { return s; });
  r.number("control.lambda", c.lambda);
  c.lambda_min = c.lambda;
  r.number("control.lambda_min", c.lambda_min);
  std::vector<double> lower(lo.size(), -10.0), upper(lo.size(), 10.0);
  r.get("control.lower", lower, parse_list);
  r.get("control.upper", upper, parse_list);
  c.lower = to_vector(lower);
  c.upper = to_vector(upper);
  r.get("control.r_list", c.r_list, parse_list);
  r.number("control.epsilon", c.control_epsilon);

  r.number("solver.state_tol", c.state.tol);
  r.integer("solver.state_max_iterations", c.state.max_iterations);
  r.number("solver.cg_tol", c.state.cg_tol);
  r.number("solver.control_tol", c.control.tol);
  r.integer("solver.control_max_iterations", c.control.max_iterations);
  r.get("solver.seed", c.seed, [](const std::string& s) { return static_cast<std::uint64_t>(std::stoull(s)); });
  r.integer("solver.threads", c.threads);
  r.integer("solver.starts", c.poincare_starts);

  r.get("sweep.ladder", c.ladder, parse_list);
  r.get("sweep.variable", c.ladder_variable, [](const std::string& s) {
    const std::string v = boost::algorithm::trim_copy(s);
    if (v == "s") return SweepVariable::S;
    if (v == "delta") return SweepVariable::Delta;
    throw std::invalid_argument("expected s or delta");
  });
  if (c.kind == ExperimentKind::SweepS) c.ladder_variable = SweepVariable::S;
  if (c.kind == ExperimentKind::SweepDelta) c.ladder_variable = SweepVariable::Delta;

  r.get("output.dir", c.out_dir, [](const std::string& s) { return boost::algorithm::trim_copy(s); });
  r.get("output.fields", c.write_fields, [](const std::string& s) {
    const std::string v = boost::algorithm::trim_copy(s);
    if (v == "true") return true;
    if (v == "false") return false;
    throw std::invalid_argument("expected true or false");
  });

  if (!errors.empty()) throw ConfigError(errors);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"config: cannot read '" + path + "'"});
  return parse_config(in);
}

std::shared_ptr<const Grid> make_grid(const ExperimentConfig& config) {
  return std::make_shared<const Grid>(build_grid(config.lo, config.hi, config.h, config.kernel.delta));
}

EnergyParams make_energy(const ExperimentConfig& config, const Grid& grid) {
  EnergyParams e;
  e.p = config.p;
  e.epsilon = config.epsilon;
  if (config.coefficient.size() > 0) e.coefficient = constant_coefficient(grid, config.coefficient);
  return e;
}

ControlSpec make_control_spec(const ExperimentConfig& config) {
  ControlSpec spec;
  spec.u_des = parse_source(config.u_des, config.lo, config.hi);
  spec.weight = config.lambda;
  spec.weight_floor = config.lambda_min;
  spec.lower = config.lower;
  spec.upper = config.upper;
  spec.epsilon = config.control_epsilon;
  return spec;
}

SweepConfig to_sweep_config(const ExperimentConfig& config) {
  SweepConfig s;
  s.variable = config.ladder_variable;
  s.ladder = config.ladder;
  if (s.ladder.empty()) s.ladder = {s.variable == SweepVariable::S ? config.kernel.s : config.kernel.delta};
  s.s = config.kernel.s;
  s.delta = config.kernel.delta;
  s.lo = config.lo;
  s.hi = config.hi;
  s.h = config.h;
  s.cutoff = config.kernel.cutoff;
  s.p = config.p;
  s.coefficient = config.coefficient;
  s.control = make_control_spec(config);
  s.r_list = config.r_list;
  s.options = config.control;
  s.threads = config.threads;
  return s;
}

std::vector<std::string> config_violations(const ExperimentConfig& c) {
  std::vector<std::string> out;
  if (c.threads < 1) out.push_back("solver.threads: must be >= 1");
  // The check suite builds its own fixed instances.
  if (c.kind == ExperimentKind::Check) return out;
  const auto n = c.lo.size();
  if (n < 1 || n > 2 || c.hi.size() != n) out.push_back("grid.lo, grid.hi: need matching dimension 1 or 2");
  if (c.lower.size() != n || c.upper.size() != n) out.push_back("control.lower, control.upper: need dimension n");
  if (c.poincare_starts < 1) out.push_back("solver.starts: must be >= 1");
  for (const auto& [path, spec] : {std::pair{"energy.load", c.load}, std::pair{"control.u_des", c.u_des}}) {
    try {
      parse_source(spec, c.lo, c.hi);
    } catch (const std::exception& e) {
      out.push_back(std::string(path) + ": " + e.what());
    }
  }
  if (!out.empty()) return out;

  const bool ladder_kind = c.kind == ExperimentKind::SweepS || c.kind == ExperimentKind::SweepDelta ||
                           c.kind == ExperimentKind::Poincare || c.kind == ExperimentKind::OperatorProbe;
  if ((c.kind == ExperimentKind::SweepS || c.kind == ExperimentKind::SweepDelta) && c.ladder.empty()) {
    out.push_back("sweep.ladder: required for " + to_string(c.kind));
  }
  if (ladder_kind && c.ladder_variable == SweepVariable::Delta) {
    if (c.kernel.mode != KernelMode::RescaledFromUnit) {
      out.push_back("kernel.mode: delta ladders use kernels rescaled from the unit horizon (mode = rescaled)");
    }
    if (c.kernel.mass_target && std::abs(*c.kernel.mass_target - static_cast<double>(n)) > 1e-12) {
      out.push_back("kernel.mass_target: delta ladders normalize the unit kernel to mass n = " + std::to_string(n));
    }
  }
  if (ladder_kind && c.ladder_variable == SweepVariable::S) {
    if (c.kernel.mode != KernelMode::FixedHorizon) out.push_back("kernel.mode: s ladders use the fixed-horizon kernel");
    if (c.kernel.mass_target) out.push_back("kernel.mass_target: not used by s ladders (a0 = 1 fixes the kernel)");
  }
  if (ladder_kind) {
    for (auto& v : sweep_violations(to_sweep_config(c))) {
      if (v.rfind("kernel.a0", 0) == 0) v += " (s-sweep hypothesis a0 = w_delta(0) = 1)";
      out.push_back(std::move(v));
    }
    return out;
  }

  std::shared_ptr<const Grid> grid;
  try {
    grid = make_grid(c);
  } catch (const std::exception& e) {
    out.push_back(std::string("grid: ") + e.what());
    return out;
  }
  if (grid->layers() < 2) out.push_back("grid.delta: the horizon must span at least two lattice steps");
  try {
    validate_kernel(c.kernel);
  } catch (const std::exception& e) {
    out.push_back(std::string("kernel: ") + e.what());
  }
  try {
    validate_energy(make_energy(c, *grid), *grid);
  } catch (const std::exception& e) {
    out.push_back(std::string("energy: ") + e.what());
  }
  if (c.kind == ExperimentKind::SolveControl) {
    if (!(c.p > 1.0)) return out;
    try {
      validate_control(make_control_spec(c).instantiate(*grid), *grid);
    } catch (const std::exception& e) {
      out.push_back(std::string("control: ") + e.what());
    }
  }
  return out;
}

}  // namespace nlgrad
