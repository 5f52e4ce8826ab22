#pragma once

#include "nlgrad/operators.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>

namespace nlgrad {

/// Thrown when a density evaluates to a non-finite value.
class NonFiniteEnergy : public std::runtime_error {
 public:
  NonFiniteEnergy(const std::string& what, Index node) : std::runtime_error(what), node_(node) {}
  Index node() const { return node_; }

 private:
  Index node_;
};

/// Density with p-growth supplied by the caller together with its partial
/// derivatives. Arguments are (x, u(x), A) with A the n x n gradient value.
struct CustomDensity {
  using Value = std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&, const Eigen::MatrixXd&)>;
  using DerivA = std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&, const Eigen::MatrixXd&)>;
  using DerivU = std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&, const Eigen::MatrixXd&)>;

  std::string name;
  Value W;
  DerivA dW_dA;
  DerivU dW_du;
  // c|A|^p - c0 <= W <= C2 (1 + |u|^p + |A|^p)
  double c = 0.0;
  double c0 = 0.0;
  double C2 = 0.0;
};

/// (1/p)|A|^p + k(|u|^2 - 1)^2, p >= 4. Non-convex in u.
CustomDensity double_well_density(double p, double k);

/// Checks the growth bounds of a custom density on random samples of
/// (x, u, A) with |u|, |A| up to `radius`. Returns the number of violations.
int certify_growth(const CustomDensity& density, int n, double p, int samples,
                   std::uint64_t seed, double radius = 10.0);

enum class DensityKind { PLaplacian, Custom };

struct EnergyParams {
  double p = 2.0;
  /// Coefficient field on grid nodes (n*n rows); empty means the identity.
  MatrixField coefficient;
  /// Regularization of |A| inside |A|^{p-2} for p < 2.
  double epsilon = 1e-10;
  DensityKind density = DensityKind::PLaplacian;
  std::shared_ptr<const CustomDensity> custom;
};

/// Coefficient field equal to M at every node.
MatrixField constant_coefficient(const Grid& grid, const Eigen::MatrixXd& M);

/// Smallest eigenvalue of the coefficient over all nodes.
double ellipticity_constant(const EnergyParams& params, const Grid& grid);

/// Throws std::invalid_argument for p <= 1, non-symmetric or non-elliptic
/// coefficients, or a custom density without callables.
void validate_energy(const EnergyParams& params, const Grid& grid);

/// p-Laplacian density (1/p)|A|^{p-2} (C A):A for a symmetric coefficient C.
template <typename Scalar>
Scalar pl_density(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& A,
                  const Eigen::MatrixXd& C, double p, double eps) {
  using std::pow;
  Scalar m = A.squaredNorm();
  if (p < 2.0) m += Scalar(eps * eps);
  const Scalar q = (C.template cast<Scalar>() * A).cwiseProduct(A).sum();
  if (p == 2.0) return Scalar(0.5) * q;
  if (m == Scalar(0)) return Scalar(0);
  return pow(m, Scalar(0.5 * (p - 2.0))) * q / Scalar(p);
}

/// Derivative of pl_density with respect to A.
Eigen::MatrixXd pl_flux(const Eigen::MatrixXd& A, const Eigen::MatrixXd& C, double p, double eps);

/// Directional derivative of pl_flux at A in direction B.
Eigen::MatrixXd pl_flux_derivative(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                   const Eigen::MatrixXd& C, double p, double eps);

struct EnergyValue {
  double total = 0.0;
  double density = 0.0;
  double load = 0.0;
};

/// sum_m w_m W(x, u, (Du)_m) - <g, u>.
EnergyValue eval_energy(const Field& u, const Field& g, const GradientOperator& op,
                        const EnergyParams& params);

/// L^2 representative of the derivative of eval_energy, i.e.
/// (1/h^n) dE/du, zero off the operator's degrees of freedom.
Field eval_first_variation(const Field& u, const Field& g, const GradientOperator& op,
                           const EnergyParams& params);

/// sum_m w_m |Du|^{p-2} (C Du):(Dv).
double eval_Y(const Field& u, const Field& v, const GradientOperator& op, const EnergyParams& params);

/// Linearized first variation at u applied to v (p-Laplacian density only),
/// as an L^2 representative zeroed off the degrees of freedom.
Field linearized_apply(const Field& u, const Field& v, const GradientOperator& op,
                       const EnergyParams& params);

/// Same, reusing precomputed (Du) on evaluation nodes.
Field linearized_apply_at(const MatrixField& Du, const Field& v, const GradientOperator& op,
                          const EnergyParams& params);

/// Zeroes the columns of f that are not degrees of freedom of op.
Field restrict_to_dofs(const GradientOperator& op, const Field& f);

}  // namespace nlgrad
