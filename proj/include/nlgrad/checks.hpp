#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace nlgrad {

/// One invariant probe. `value` is the measured quantity and passes when
/// value <= threshold.
struct CheckResult {
  std::string name;
  int criterion = 0;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::string detail;
  double wall_time = 0.0;
};

struct CheckOptions {
  std::uint64_t seed = 1;
};

/// Max |<Du, phi> + <u, div phi>| / (|Du| |phi|) over 50 random pairs in 1D
/// (128 cells) and 2D (64^2 cells).
CheckResult check_integration_by_parts(const CheckOptions& options = {});
/// Max relative error of D(Ax) against A at fully interior nodes, mass n.
CheckResult check_linear_reproduction(const CheckOptions& options = {});
/// p = 2 CG state against a dense LDL^T solve, relative L^2 difference.
CheckResult check_state_oracle(const CheckOptions& options = {});
/// Max |Y(u, v) - <g, v>| / |v| over 20 random v for p in {2, 3, 4}.
CheckResult check_weak_residual(const CheckOptions& options = {});
/// Energy first variation and reduced control gradient against central
/// differences, p in {2, 3}.
std::vector<CheckResult> check_gradient_consistency(const CheckOptions& options = {});
/// Descent, stationarity, two-start agreement and p = 2 superposition.
std::vector<CheckResult> check_control_probes(const CheckOptions& options = {});

/// The full suite in criterion order.
std::vector<CheckResult> run_checks(const CheckOptions& options = {});

}  // namespace nlgrad
