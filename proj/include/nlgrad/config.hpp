#pragma once

#include "nlgrad/localization.hpp"

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlgrad {

enum class ExperimentKind { Check, SolveState, SolveControl, SweepS, SweepDelta, Poincare, OperatorProbe };

std::string to_string(ExperimentKind kind);
/// Throws std::invalid_argument for an unknown name.
ExperimentKind parse_experiment_kind(const std::string& name);

/// Raised when a config cannot be parsed or is inconsistent. Each violation
/// starts with the offending field path ("grid.h: ...").
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

/// Field sources: "zero", "constant:<v>", "sin:<amp>" (product of
/// sin(pi (x_a - lo_a) / (hi_a - lo_a))) and "bump:<amp>". The value is
/// repeated in every component.
PointFunction parse_source(const std::string& spec, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Check;

  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
  double h = 1.0 / 128;

  /// n and delta are filled from the grid block.
  KernelSpec kernel;

  double p = 2.0;
  double epsilon = 1e-10;
  /// Constant n x n coefficient; empty means the identity.
  Eigen::MatrixXd coefficient;

  std::string load = "constant:1";

  std::string u_des = "sin:1";
  double lambda = 0.3;
  double lambda_min = 0.3;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  std::vector<double> r_list{4.0};
  double control_epsilon = 1e-10;

  SolverOptions state{};
  ControlOptions control{};
  int poincare_starts = 10;
  std::uint64_t seed = 1;
  int threads = 1;

  /// Ladder for sweeps, Poincare and probe runs; empty means one point at
  /// the kernel parameters.
  std::vector<double> ladder;
  /// Sweep variable for poincare and operator-probe runs.
  SweepVariable ladder_variable = SweepVariable::S;

  std::string out_dir = "out";
  bool write_fields = false;

  /// Text of the parsed file, echoed into the manifest.
  std::string source_text;
};

/// Parses the INI text. Unknown keys and unparsable values are violations.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::string& path);

/// Cross-field consistency of a parsed config; empty when valid.
std::vector<std::string> config_violations(const ExperimentConfig& config);

/// Sweep view of the config (also used by poincare and operator-probe).
SweepConfig to_sweep_config(const ExperimentConfig& config);

std::shared_ptr<const Grid> make_grid(const ExperimentConfig& config);
EnergyParams make_energy(const ExperimentConfig& config, const Grid& grid);
ControlSpec make_control_spec(const ExperimentConfig& config);

}  // namespace nlgrad
