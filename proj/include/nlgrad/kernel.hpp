#pragma once

#include <Eigen/Core>

#include <optional>
#include <stdexcept>
#include <string>

namespace nlgrad {

/// Raised when an adaptive integrator cannot reach the requested tolerance.
class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& what, double achieved_error)
      : std::runtime_error(what + " (achieved error estimate " +
                           std::to_string(achieved_error) + ")"),
        achieved_error_(achieved_error) {}
  double achieved_error() const { return achieved_error_; }

 private:
  double achieved_error_;
};

enum class CutoffProfile {
  QuinticSmoothstep,  // C2 at both ends of the transition
  SepticSmoothstep,   // C3 at both ends of the transition
};

/// Radial cutoff: constant a0 on [0, b0*delta], smooth monotone decay to
/// zero on [b0*delta, delta], zero beyond.
struct CutoffSpec {
  double b0 = 0.5;
  double a0 = 1.0;
  CutoffProfile profile = CutoffProfile::QuinticSmoothstep;
};

enum class KernelMode {
  FixedHorizon,      // rho(x) = c w_delta(|x|) / |x|^{n-1+s}
  RescaledFromUnit,  // rho(x) = delta^{-n} rho_1(x / delta)
};

/// Truncated Riesz kernel. `mass_scale` is the multiplier applied on top of
/// the raw formula; it is 1 unless `normalize_mass` resolved a mass target.
struct KernelSpec {
  int n = 1;
  double s = 0.5;
  double delta = 0.25;
  CutoffSpec cutoff{};
  KernelMode mode = KernelMode::FixedHorizon;
  std::optional<double> mass_target;
  double mass_scale = 1.0;
};

/// pi^{n/2} 2^s Gamma(s/2) / Gamma((n-s)/2). Requires 0 < s < n.
double gamma_const(int n, double s);

/// c_{n,s} = (n + s - 1) / gamma_const(n, 1 - s). Requires 0 < s < 1.
double riesz_normalizer(int n, double s);

/// Surface measure of the unit sphere in R^n (2 for n = 1).
double unit_sphere_measure(int n);

double cutoff_eval(const CutoffSpec& spec, double delta, double r);

/// Radial profile rho(r) for r > 0, including the mass scale.
double kernel_radial(const KernelSpec& spec, double r);

template <typename Derived>
double kernel_eval(const KernelSpec& spec, const Eigen::MatrixBase<Derived>& x) {
  const double r = x.norm();
  if (r == 0.0) {
    throw std::domain_error("kernel_eval: kernel is singular at the origin");
  }
  return kernel_radial(spec, r);
}

/// Integral of r^k * rho(r) over [r0, r1] (radial variable only, no sphere
/// measure). Exact on the plateau, adaptive Gauss-Kronrod elsewhere.
double radial_moment(const KernelSpec& spec, double k, double r0, double r1,
                     double rel_tol = 1e-12);

/// Total mass of the kernel over B(0, delta).
double kernel_mass(const KernelSpec& spec, double rel_tol = 1e-12);

/// Returns a copy scaled so that kernel_mass equals `target`.
KernelSpec normalize_mass(const KernelSpec& spec, double target);

void validate_kernel(const KernelSpec& spec);

std::string to_string(CutoffProfile profile);
std::string to_string(KernelMode mode);
CutoffProfile parse_cutoff_profile(const std::string& name);
KernelMode parse_kernel_mode(const std::string& name);

}  // namespace nlgrad
