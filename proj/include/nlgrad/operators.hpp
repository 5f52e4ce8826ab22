#pragma once

#include "nlgrad/grid.hpp"
#include "nlgrad/kernel.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <iosfwd>
#include <memory>
#include <vector>

namespace nlgrad {

/// Discrete gradient in difference form. For evaluation node m located at
/// grid node i(m):
///
///   (Du)_m = sum_t (u_{i(m)} - u_{j(t)}) (x) c_t,   t in row m,
///
/// so constant fields map to zero exactly. Each evaluation node carries a
/// quadrature weight; dof_mask marks the nodes on which u may be nonzero.
class GradientOperator {
 public:
  GradientOperator() = default;
  GradientOperator(std::shared_ptr<const Grid> grid, std::vector<Index> eval_nodes,
                   Eigen::VectorXd quad_weights, std::vector<bool> dof_mask,
                   std::vector<Index> row_ptr, std::vector<Index> neighbours,
                   Eigen::MatrixXd coefficients);

  const Grid& grid() const { return *grid_; }
  const std::shared_ptr<const Grid>& grid_ptr() const { return grid_; }
  int dim() const { return grid_->dim(); }
  Index num_eval() const { return static_cast<Index>(eval_nodes_.size()); }
  const std::vector<Index>& eval_nodes() const { return eval_nodes_; }
  const Eigen::VectorXd& quad_weights() const { return quad_weights_; }
  const std::vector<bool>& dof_mask() const { return dof_mask_; }
  bool is_dof(Index node) const { return dof_mask_[static_cast<std::size_t>(node)]; }
  Index num_dof_nodes() const;

  const std::vector<Index>& row_ptr() const { return row_ptr_; }
  const std::vector<Index>& neighbours() const { return neighbours_; }
  const Eigen::MatrixXd& coefficients() const { return coefficients_; }

  /// Matrix field on evaluation nodes.
  template <typename Derived>
  MatrixFieldT<typename Derived::Scalar> apply(const Eigen::MatrixBase<Derived>& u_in) const {
    using Scalar = typename Derived::Scalar;
    const int n = dim();
    const FieldT<Scalar> u = u_in;
    MatrixFieldT<Scalar> out = MatrixFieldT<Scalar>::Zero(n * n, num_eval());
    const double* c = coefficients_.data();
    for (Index m = 0; m < num_eval(); ++m) {
      const Index i = eval_nodes_[static_cast<std::size_t>(m)];
      Scalar* A = out.col(m).data();
      const Scalar* ui = u.col(i).data();
      for (Index t = row_ptr_[static_cast<std::size_t>(m)]; t < row_ptr_[static_cast<std::size_t>(m) + 1]; ++t) {
        const Scalar* uj = u.col(neighbours_[static_cast<std::size_t>(t)]).data();
        const double* ct = c + t * n;
        for (int b = 0; b < n; ++b) {
          for (int a = 0; a < n; ++a) A[a + n * b] += (ui[a] - uj[a]) * ct[b];
        }
      }
    }
    return out;
  }

  /// Unweighted transpose: returns G^T phi as a field on grid nodes.
  template <typename Derived>
  FieldT<typename Derived::Scalar> apply_transpose(const Eigen::MatrixBase<Derived>& phi) const {
    using Scalar = typename Derived::Scalar;
    const int n = dim();
    const MatrixFieldT<Scalar> values = phi;
    FieldT<Scalar> out = FieldT<Scalar>::Zero(n, grid_->num_nodes());
    const double* c = coefficients_.data();
    for (Index m = 0; m < num_eval(); ++m) {
      const Index i = eval_nodes_[static_cast<std::size_t>(m)];
      const Scalar* A = values.col(m).data();
      Scalar* oi = out.col(i).data();
      for (Index t = row_ptr_[static_cast<std::size_t>(m)]; t < row_ptr_[static_cast<std::size_t>(m) + 1]; ++t) {
        Scalar* oj = out.col(neighbours_[static_cast<std::size_t>(t)]).data();
        const double* ct = c + t * n;
        for (int a = 0; a < n; ++a) {
          Scalar v(0);
          for (int b = 0; b < n; ++b) v += A[a + n * b] * ct[b];
          oi[a] += v;
          oj[a] -= v;
        }
      }
    }
    return out;
  }

  /// Discrete divergence: the negative adjoint of apply() under the weighted
  /// L^2 pairings, <Du, phi>_W = -<u, div phi>_{h^n}.
  template <typename Derived>
  FieldT<typename Derived::Scalar> divergence(const Eigen::MatrixBase<Derived>& phi) const {
    using Scalar = typename Derived::Scalar;
    MatrixFieldT<Scalar> weighted = phi;
    for (Index m = 0; m < num_eval(); ++m) weighted.col(m) *= Scalar(quad_weights_[m]);
    return -apply_transpose(weighted) / Scalar(grid_->cell_volume());
  }

  /// Weighted pairing sum_m w_m A_m : B_m over evaluation nodes.
  template <typename A, typename B>
  double pairing(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) const {
    return (a.cwiseProduct(b).colwise().sum().transpose().cwiseProduct(quad_weights_)).sum();
  }

  /// Assembled sparse matrix mapping vec(u) (column-major n x N) to
  /// vec(Du) (column-major n^2 x M).
  Eigen::SparseMatrix<double> to_sparse() const;

  /// Scatters a matrix field given on evaluation nodes to all grid nodes
  /// (zero where the node is not an evaluation node).
  MatrixField on_grid_nodes(const MatrixField& values) const;

 private:
  std::shared_ptr<const Grid> grid_;
  std::vector<Index> eval_nodes_;
  Eigen::VectorXd quad_weights_;
  std::vector<bool> dof_mask_;
  std::vector<Index> row_ptr_;
  std::vector<Index> neighbours_;
  Eigen::MatrixXd coefficients_;
};

/// One interaction offset of the translation-invariant nonlocal stencil.
struct StencilEntry {
  Eigen::VectorXi offset;     // lattice offset of the neighbour, j = i + offset
  double distance = 0.0;      // |x_i - x_j|
  Eigen::VectorXd direction;  // e(i, j) = (x_i - x_j) / |x_i - x_j|
  double weight = 0.0;        // w(i, j)
};

struct AssemblyOptions {
  double cell_rel_tol = 1e-10;
};

/// Assembled nonlocal gradient on the Omega nodes of a grid.
///
/// Each offset j != i within the open horizon ball gets
/// w = (integral of rho over cell_j) / |x_i - x_j|. The singular self cell is
/// not discarded: its mass m0 is moved onto the 2n axial nearest neighbours,
/// which reproduces its first-order Taylor contribution (m0 / n) grad u(x_i).
/// With a mass target set on the kernel, all weights are then scaled so the
/// discrete first moment sum_j w r_j equals the target, which makes affine
/// reproduction exact.
struct NonlocalGradientOp {
  GradientOperator op;
  KernelSpec kernel;
  std::vector<StencilEntry> stencil;
  double self_cell_mass = 0.0;
  double calibration = 1.0;
  /// sum_j w(i, j) |x_i - x_j| after correction and calibration.
  double discrete_mass = 0.0;

  /// w(i, j) for grid nodes i, j (zero outside the horizon).
  double weight(Index i, Index j) const;
};

NonlocalGradientOp assemble_nl_gradient(std::shared_ptr<const Grid> grid,
                                        const KernelSpec& kernel,
                                        const AssemblyOptions& options = {});

/// Central differences on the local domain `mask`, one-sided differences on
/// the boundary layer (nodes outside the mask with an axial neighbour in it),
/// where the quadrature weight is halved per boundary axis. Values outside
/// the mask are zero.
GradientOperator assemble_local_gradient(std::shared_ptr<const Grid> grid,
                                         const std::vector<bool>& mask);

std::vector<bool> free_mask(const Grid& grid);
std::vector<bool> omega_mask(const Grid& grid);

template <typename Derived>
MatrixFieldT<typename Derived::Scalar> apply_nl_gradient(const NonlocalGradientOp& op,
                                                        const Eigen::MatrixBase<Derived>& u) {
  return op.op.apply(u);
}

template <typename Derived>
FieldT<typename Derived::Scalar> apply_nl_divergence(const NonlocalGradientOp& op,
                                                    const Eigen::MatrixBase<Derived>& phi) {
  return op.op.divergence(phi);
}

/// Writes "row col weight" triplets of the assembled sparse matrix.
void dump_operator(const GradientOperator& op, std::ostream& os);

}  // namespace nlgrad
