#include "nlgrad/kernel.hpp"

#include "quadrature.hpp"

#include <boost/math/constants/constants.hpp>

#include <algorithm>
#include <cmath>

namespace nlgrad {

namespace {

constexpr double kPi = boost::math::constants::pi<double>();

// Smoothstep rising from 0 at t = 0 to 1 at t = 1.
double smoothstep(CutoffProfile profile, double t) {
  switch (profile) {
    case CutoffProfile::QuinticSmoothstep:
      return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
    case CutoffProfile::SepticSmoothstep: {
      const double t2 = t * t;
      return t2 * t2 * (35.0 + t * (-84.0 + t * (70.0 - 20.0 * t)));
    }
  }
  return 0.0;
}

// Horizon of the cutoff actually applied in radius space and the prefactor
// that multiplies c / r^{n-1+s} w(r).
struct ProfileScaling {
  double horizon;
  double prefactor;
};

ProfileScaling profile_scaling(const KernelSpec& spec) {
  const double c = riesz_normalizer(spec.n, spec.s);
  if (spec.mode == KernelMode::FixedHorizon) {
    return {spec.delta, spec.mass_scale * c};
  }
  // delta^{-n} rho_1(x/delta) = delta^{s-1} c w_1(|x|/delta) / |x|^{n-1+s}
  return {spec.delta, spec.mass_scale * c * std::pow(spec.delta, spec.s - 1.0)};
}

}  // namespace

double gamma_const(int n, double s) {
  if (n < 1) throw std::domain_error("gamma_const: dimension must be >= 1");
  if (!(s > 0.0) || !(s < n)) {
    throw std::domain_error("gamma_const: requires 0 < s < n, got s = " +
                            std::to_string(s));
  }
  return std::pow(kPi, 0.5 * n) * std::pow(2.0, s) * std::tgamma(0.5 * s) /
         std::tgamma(0.5 * (n - s));
}

double riesz_normalizer(int n, double s) {
  if (!(s > 0.0) || !(s < 1.0)) {
    throw std::domain_error("riesz_normalizer: requires 0 < s < 1, got s = " +
                            std::to_string(s));
  }
  return (n + s - 1.0) / gamma_const(n, 1.0 - s);
}

double unit_sphere_measure(int n) {
  return 2.0 * std::pow(kPi, 0.5 * n) / std::tgamma(0.5 * n);
}

double cutoff_eval(const CutoffSpec& spec, double delta, double r) {
  const double plateau = spec.b0 * delta;
  if (r <= plateau) return spec.a0;
  if (r >= delta) return 0.0;
  const double t = (r - plateau) / (delta - plateau);
  return spec.a0 * (1.0 - smoothstep(spec.profile, t));
}

double kernel_radial(const KernelSpec& spec, double r) {
  const auto [horizon, prefactor] = profile_scaling(spec);
  if (r >= horizon) return 0.0;
  return prefactor * cutoff_eval(spec.cutoff, horizon, r) /
         std::pow(r, spec.n - 1 + spec.s);
}

double radial_moment(const KernelSpec& spec, double k, double r0, double r1,
                     double rel_tol) {
  const auto [horizon, prefactor] = profile_scaling(spec);
  r1 = std::min(r1, horizon);
  if (r1 <= r0) return 0.0;
  // integrand r^e w(r) with e = k - (n - 1 + s)
  const double e = k - (spec.n - 1 + spec.s);
  if (r0 == 0.0 && !(e > -1.0)) {
    throw std::domain_error("radial_moment: integrand not integrable at 0");
  }
  const double plateau = spec.cutoff.b0 * horizon;
  double total = 0.0;
  // Plateau part in closed form.
  const double p0 = std::min(r0, plateau);
  const double p1 = std::min(r1, plateau);
  if (p1 > p0) {
    total += spec.cutoff.a0 * (std::pow(p1, e + 1.0) - std::pow(p0, e + 1.0)) / (e + 1.0);
  }
  const double t0 = std::max(r0, plateau);
  if (r1 > t0) {
    const auto& cutoff = spec.cutoff;
    auto f = [&](double r) { return std::pow(r, e) * cutoff_eval(cutoff, horizon, r); };
    total += detail::adaptive_integrate(f, t0, r1, rel_tol, "radial_moment");
  }
  return prefactor * total;
}

double kernel_mass(const KernelSpec& spec, double rel_tol) {
  return unit_sphere_measure(spec.n) *
         radial_moment(spec, spec.n - 1.0, 0.0, spec.delta, rel_tol);
}

KernelSpec normalize_mass(const KernelSpec& spec, double target) {
  if (!(target > 0.0)) {
    throw std::invalid_argument("normalize_mass: target must be positive");
  }
  KernelSpec out = spec;
  out.mass_scale = 1.0;
  out.mass_target.reset();
  const double raw = kernel_mass(out);
  out.mass_scale = target / raw;
  out.mass_target = target;
  return out;
}

void validate_kernel(const KernelSpec& spec) {
  if (spec.n < 1 || spec.n > 3) {
    throw std::invalid_argument("kernel.n must be 1, 2 or 3");
  }
  if (!(spec.s > 0.0 && spec.s < 1.0)) {
    throw std::invalid_argument("kernel.s must lie in (0, 1)");
  }
  if (!(spec.delta > 0.0)) throw std::invalid_argument("kernel.delta must be positive");
  if (!(spec.cutoff.b0 > 0.0 && spec.cutoff.b0 < 1.0)) {
    throw std::invalid_argument("kernel.b0 must lie in (0, 1)");
  }
  if (!(spec.cutoff.a0 > 0.0)) throw std::invalid_argument("kernel.a0 must be positive");
}

std::string to_string(CutoffProfile profile) {
  switch (profile) {
    case CutoffProfile::QuinticSmoothstep: return "quintic";
    case CutoffProfile::SepticSmoothstep: return "septic";
  }
  return "unknown";
}

std::string to_string(KernelMode mode) {
  return mode == KernelMode::FixedHorizon ? "fixed" : "rescaled";
}

CutoffProfile parse_cutoff_profile(const std::string& name) {
  if (name == "quintic") return CutoffProfile::QuinticSmoothstep;
  if (name == "septic") return CutoffProfile::SepticSmoothstep;
  throw std::invalid_argument("unknown cutoff profile '" + name + "'");
}

KernelMode parse_kernel_mode(const std::string& name) {
  if (name == "fixed" || name == "fixed-horizon") return KernelMode::FixedHorizon;
  if (name == "rescaled" || name == "rescaled-from-unit") return KernelMode::RescaledFromUnit;
  throw std::invalid_argument("unknown kernel mode '" + name + "'");
}

}  // namespace nlgrad
