#include "nlgrad/energy.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <sstream>

namespace nlgrad {

namespace {

using Mat = Eigen::MatrixXd;

Mat coefficient_at(const EnergyParams& params, int n, Index node) {
  if (params.coefficient.size() == 0) return Mat::Identity(n, n);
  return Eigen::Map<const Mat>(params.coefficient.col(node).data(), n, n);
}

Eigen::Map<const Mat> matrix_at(const MatrixField& f, int n, Index m) {
  return Eigen::Map<const Mat>(f.col(m).data(), n, n);
}

void check_finite(double v, Index node, const char* what) {
  if (!std::isfinite(v)) {
    std::ostringstream os;
    os << what << ": non-finite density at node " << node;
    throw NonFiniteEnergy(os.str(), node);
  }
}

}  // namespace

CustomDensity double_well_density(double p, double k) {
  if (p < 4.0) throw std::invalid_argument("double_well_density: requires p >= 4");
  if (!(k > 0.0)) throw std::invalid_argument("double_well_density: k must be positive");
  CustomDensity d;
  d.name = "double-well";
  d.W = [p, k](const Eigen::VectorXd&, const Eigen::VectorXd& u, const Mat& A) {
    const double w = u.squaredNorm() - 1.0;
    return std::pow(A.norm(), p) / p + k * w * w;
  };
  d.dW_dA = [p](const Eigen::VectorXd&, const Eigen::VectorXd&, const Mat& A) -> Mat {
    const double a = A.norm();
    if (a == 0.0) return Mat::Zero(A.rows(), A.cols());
    return std::pow(a, p - 2.0) * A;
  };
  d.dW_du = [k](const Eigen::VectorXd&, const Eigen::VectorXd& u, const Mat&) -> Eigen::VectorXd {
    return 4.0 * k * (u.squaredNorm() - 1.0) * u;
  };
  d.c = 1.0 / p;
  d.c0 = 0.0;
  // k(|u|^2 - 1)^2 <= k(1 + |u|^4) <= k(2 + |u|^p) for p >= 4
  d.C2 = std::max(1.0 / p, 2.0 * k);
  return d;
}

int certify_growth(const CustomDensity& density, int n, double p, int samples,
                   std::uint64_t seed, double radius) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N;
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int violations = 0;
  for (int t = 0; t < samples; ++t) {
    Eigen::VectorXd x(n), u(n);
    Mat A(n, n);
    for (int a = 0; a < n; ++a) {
      x[a] = U(rng);
      u[a] = N(rng);
    }
    for (Index e = 0; e < A.size(); ++e) A.data()[e] = N(rng);
    u *= radius * U(rng) / std::max(u.norm(), 1e-300);
    A *= radius * U(rng) / std::max(A.norm(), 1e-300);
    const double w = density.W(x, u, A);
    const double an = std::pow(A.norm(), p);
    const double lower = density.c * an - density.c0;
    const double upper = density.C2 * (1.0 + std::pow(u.norm(), p) + an);
    const double slack = 1e-12 * (1.0 + std::abs(w));
    if (!(w >= lower - slack && w <= upper + slack)) ++violations;
  }
  return violations;
}

MatrixField constant_coefficient(const Grid& grid, const Eigen::MatrixXd& M) {
  const int n = grid.dim();
  if (M.rows() != n || M.cols() != n) throw std::invalid_argument("constant_coefficient: shape mismatch");
  MatrixField out(n * n, grid.num_nodes());
  for (Index i = 0; i < grid.num_nodes(); ++i) out.col(i) = Eigen::Map<const Eigen::VectorXd>(M.data(), n * n);
  return out;
}

double ellipticity_constant(const EnergyParams& params, const Grid& grid) {
  const int n = grid.dim();
  if (params.coefficient.size() == 0) return 1.0;
  double mu = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < grid.num_nodes(); ++i) {
    const Mat C = coefficient_at(params, n, i);
    Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (C + C.transpose()), Eigen::EigenvaluesOnly);
    mu = std::min(mu, eig.eigenvalues()[0]);
  }
  return mu;
}

void validate_energy(const EnergyParams& params, const Grid& grid) {
  if (!(params.p > 1.0) || !std::isfinite(params.p)) {
    throw std::invalid_argument("energy.p must lie in (1, inf)");
  }
  if (!(params.epsilon > 0.0)) throw std::invalid_argument("energy.epsilon must be positive");
  const int n = grid.dim();
  if (params.coefficient.size() != 0) {
    if (params.coefficient.rows() != n * n || params.coefficient.cols() != grid.num_nodes()) {
      throw std::invalid_argument("energy coefficient field has the wrong shape");
    }
    for (Index i = 0; i < grid.num_nodes(); ++i) {
      const Mat C = coefficient_at(params, n, i);
      if ((C - C.transpose()).norm() > 1e-12 * (1.0 + C.norm())) {
        throw std::invalid_argument("energy coefficient is not symmetric at node " + std::to_string(i));
      }
    }
    if (!(ellipticity_constant(params, grid) > 0.0)) {
      throw std::invalid_argument("energy coefficient is not uniformly elliptic");
    }
  }
  if (params.density == DensityKind::Custom) {
    if (!params.custom || !params.custom->W || !params.custom->dW_dA || !params.custom->dW_du) {
      throw std::invalid_argument("custom density requires W, dW_dA and dW_du");
    }
  }
}

Eigen::MatrixXd pl_flux(const Mat& A, const Mat& C, double p, double eps) {
  const Mat CA = C * A;
  if (p == 2.0) return CA;
  double m = A.squaredNorm();
  if (p < 2.0) m += eps * eps;
  if (m == 0.0) return Mat::Zero(A.rows(), A.cols());
  const double q = CA.cwiseProduct(A).sum();
  return ((p - 2.0) * std::pow(m, 0.5 * (p - 4.0)) * q * A + 2.0 * std::pow(m, 0.5 * (p - 2.0)) * CA) / p;
}

Eigen::MatrixXd pl_flux_derivative(const Mat& A, const Mat& B, const Mat& C, double p, double eps) {
  const Mat CB = C * B;
  if (p == 2.0) return CB;
  double m = A.squaredNorm();
  if (p < 2.0) m += eps * eps;
  if (m == 0.0) return Mat::Zero(A.rows(), A.cols());
  const Mat CA = C * A;
  const double q = CA.cwiseProduct(A).sum();
  const double ab = A.cwiseProduct(B).sum();
  const double cab = CA.cwiseProduct(B).sum();
  const double a = 0.5 * (p - 4.0);
  const double b = 0.5 * (p - 2.0);
  const Mat first = 2.0 * a * std::pow(m, a - 1.0) * ab * q * A + 2.0 * std::pow(m, a) * cab * A +
                    std::pow(m, a) * q * B;
  const Mat second = 2.0 * b * std::pow(m, b - 1.0) * ab * CA + std::pow(m, b) * CB;
  return ((p - 2.0) * first + 2.0 * second) / p;
}

Field restrict_to_dofs(const GradientOperator& op, const Field& f) {
  Field out = f;
  for (Index i = 0; i < out.cols(); ++i) {
    if (!op.is_dof(i)) out.col(i).setZero();
  }
  return out;
}

EnergyValue eval_energy(const Field& u, const Field& g, const GradientOperator& op,
                        const EnergyParams& params) {
  const Grid& grid = op.grid();
  const int n = grid.dim();
  const MatrixField Du = op.apply(u);
  EnergyValue e;
  for (Index m = 0; m < op.num_eval(); ++m) {
    const Index i = op.eval_nodes()[static_cast<std::size_t>(m)];
    const Mat A = matrix_at(Du, n, m);
    double w;
    if (params.density == DensityKind::PLaplacian) {
      w = pl_density<double>(A, coefficient_at(params, n, i), params.p, params.epsilon);
    } else {
      w = params.custom->W(grid.coordinate(i), u.col(i), A);
    }
    check_finite(w, i, "eval_energy");
    e.density += op.quad_weights()[m] * w;
  }
  for (Index i = 0; i < grid.num_nodes(); ++i) {
    if (op.is_dof(i)) e.load += grid.cell_volume() * g.col(i).dot(u.col(i));
  }
  e.total = e.density - e.load;
  return e;
}

Field eval_first_variation(const Field& u, const Field& g, const GradientOperator& op,
                           const EnergyParams& params) {
  const Grid& grid = op.grid();
  const int n = grid.dim();
  const MatrixField Du = op.apply(u);
  MatrixField flux(n * n, op.num_eval());
  Field local = Field::Zero(n, grid.num_nodes());
  for (Index m = 0; m < op.num_eval(); ++m) {
    const Index i = op.eval_nodes()[static_cast<std::size_t>(m)];
    const Mat A = matrix_at(Du, n, m);
    Mat F;
    if (params.density == DensityKind::PLaplacian) {
      F = pl_flux(A, coefficient_at(params, n, i), params.p, params.epsilon);
    } else {
      const Eigen::VectorXd x = grid.coordinate(i);
      F = params.custom->dW_dA(x, u.col(i), A);
      local.col(i) += op.quad_weights()[m] * params.custom->dW_du(x, u.col(i), A);
    }
    check_finite(F.norm(), i, "eval_first_variation");
    flux.col(m) = op.quad_weights()[m] * Eigen::Map<const Eigen::VectorXd>(F.data(), n * n);
  }
  Field r = (op.apply_transpose(flux) + local) / grid.cell_volume() - g;
  return restrict_to_dofs(op, r);
}

double eval_Y(const Field& u, const Field& v, const GradientOperator& op, const EnergyParams& params) {
  const int n = op.dim();
  const MatrixField Du = op.apply(u);
  const MatrixField Dv = op.apply(v);
  double acc = 0.0;
  for (Index m = 0; m < op.num_eval(); ++m) {
    const Index i = op.eval_nodes()[static_cast<std::size_t>(m)];
    const Mat A = matrix_at(Du, n, m);
    double scale = 1.0;
    if (params.p != 2.0) {
      double a2 = A.squaredNorm();
      if (params.p < 2.0) a2 += params.epsilon * params.epsilon;
      scale = a2 == 0.0 ? 0.0 : std::pow(a2, 0.5 * (params.p - 2.0));
    }
    acc += op.quad_weights()[m] * scale * (coefficient_at(params, n, i) * A).cwiseProduct(matrix_at(Dv, n, m)).sum();
  }
  return acc;
}

Field linearized_apply_at(const MatrixField& Du, const Field& v, const GradientOperator& op,
                          const EnergyParams& params) {
  if (params.density != DensityKind::PLaplacian) {
    throw std::invalid_argument("linearized_apply: only the p-Laplacian density is supported");
  }
  const int n = op.dim();
  const MatrixField Dv = op.apply(v);
  MatrixField psi(n * n, op.num_eval());
  if (params.p == 2.0 && params.coefficient.size() == 0) {
    psi = Dv * op.quad_weights().asDiagonal();
    return restrict_to_dofs(op, op.apply_transpose(psi) / op.grid().cell_volume());
  }
  for (Index m = 0; m < op.num_eval(); ++m) {
    const Index i = op.eval_nodes()[static_cast<std::size_t>(m)];
    const Mat J = pl_flux_derivative(matrix_at(Du, n, m), matrix_at(Dv, n, m), coefficient_at(params, n, i),
                                     params.p, params.epsilon);
    psi.col(m) = op.quad_weights()[m] * Eigen::Map<const Eigen::VectorXd>(J.data(), n * n);
  }
  return restrict_to_dofs(op, op.apply_transpose(psi) / op.grid().cell_volume());
}

Field linearized_apply(const Field& u, const Field& v, const GradientOperator& op,
                       const EnergyParams& params) {
  return linearized_apply_at(op.apply(u), v, op, params);
}

}  // namespace nlgrad
