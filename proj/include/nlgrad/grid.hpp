#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace nlgrad {

using Index = Eigen::Index;

/// Vector field on grid nodes: column i holds the R^n value at node i.
template <typename Scalar>
using FieldT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Field = FieldT<double>;

/// Matrix field on evaluation nodes: column m holds an n x n matrix stored
/// column-major (entry (a, b) at a + n * b).
template <typename Scalar>
using MatrixFieldT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using MatrixField = MatrixFieldT<double>;

enum class NodeClass : std::uint8_t {
  ExteriorCollar,  // outside the open box (Omega_delta \ Omega, plus box corners)
  InteriorCollar,  // in Omega, within distance delta of the boundary
  Free,            // in Omega_{-delta}
};

/// Uniform node lattice covering the box inflated by delta. Omega is the open
/// box (lo, hi); all geometry is computed on integer lattice coordinates.
class Grid {
 public:
  Grid() = default;

  int dim() const { return dim_; }
  double h() const { return h_; }
  double delta() const { return delta_; }
  const Eigen::VectorXd& lo() const { return lo_; }
  const Eigen::VectorXd& hi() const { return hi_; }
  Index num_nodes() const { return num_nodes_; }
  double cell_volume() const { return cell_volume_; }
  /// Collar thickness in lattice steps (delta / h).
  int layers() const { return layers_; }
  /// Number of lattice steps across the box along axis a.
  int cells(int a) const { return cells_[a]; }
  /// Nodes per axis, including both collars.
  int extent(int a) const { return extent_[a]; }

  NodeClass node_class(Index i) const { return classes_[static_cast<std::size_t>(i)]; }
  bool in_omega(Index i) const { return node_class(i) != NodeClass::ExteriorCollar; }
  bool is_free(Index i) const { return node_class(i) == NodeClass::Free; }

  /// Lattice coordinate of node i relative to the lower box corner.
  Eigen::VectorXi lattice(Index i) const;
  /// Node index of a lattice coordinate, or -1 when outside the grid.
  Index index_of(const Eigen::VectorXi& k) const;
  Eigen::VectorXd coordinate(Index i) const;

  std::vector<Index> nodes_where(NodeClass c) const;
  std::vector<Index> omega_nodes() const;
  std::vector<Index> free_nodes() const;
  Index count(NodeClass c) const;

  /// Distance to the box boundary in lattice steps (negative outside).
  int boundary_distance_steps(Index i) const;

  friend Grid build_grid(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                         double h, double delta);

 private:
  int dim_ = 0;
  double h_ = 0.0;
  double delta_ = 0.0;
  int layers_ = 0;
  Eigen::VectorXd lo_;
  Eigen::VectorXd hi_;
  std::vector<int> cells_;
  std::vector<int> extent_;
  Index num_nodes_ = 0;
  double cell_volume_ = 0.0;
  std::vector<NodeClass> classes_;
};

/// Throws std::invalid_argument unless h > 0, delta >= h, delta / h and the
/// box side lengths over h are integral to 1e-12.
Grid build_grid(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, double h,
                double delta);

/// Convenience overload for the 1D interval (lo, hi).
Grid build_grid(double lo, double hi, double h, double delta);

/// Returns k if x is within 1e-12 (relative) of an integer k, else -1.
long integral_ratio(double x);

/// Node selection used by norms.
enum class Region { All, Omega, Free };

inline bool region_contains(const Grid& grid, Region region, Index i) {
  switch (region) {
    case Region::All: return true;
    case Region::Omega: return grid.in_omega(i);
    case Region::Free: return grid.is_free(i);
  }
  return false;
}

/// Discrete L^p norm over the selected columns with Euclidean / Frobenius
/// pointwise norms and weight h^n; p = infinity gives the max norm.
template <typename Derived>
double lp_norm(const Eigen::MatrixBase<Derived>& f, double p, double weight,
               const std::vector<bool>& mask) {
  double acc = 0.0;
  for (Index i = 0; i < f.cols(); ++i) {
    if (!mask.empty() && !mask[static_cast<std::size_t>(i)]) continue;
    const double v = static_cast<double>(f.col(i).norm());
    if (std::isinf(p)) {
      acc = std::max(acc, v);
    } else {
      acc += std::pow(v, p) * weight;
    }
  }
  return std::isinf(p) ? acc : std::pow(acc, 1.0 / p);
}

template <typename Derived>
double lp_norm(const Grid& grid, const Eigen::MatrixBase<Derived>& f, double p,
               Region region = Region::All) {
  std::vector<bool> mask(static_cast<std::size_t>(f.cols()));
  for (Index i = 0; i < f.cols(); ++i) mask[static_cast<std::size_t>(i)] = region_contains(grid, region, i);
  return lp_norm(f, p, grid.cell_volume(), mask);
}

/// L^2 inner product of two fields over all nodes with weight h^n.
template <typename A, typename B>
double l2_dot(const Grid& grid, const Eigen::MatrixBase<A>& u, const Eigen::MatrixBase<B>& v) {
  return grid.cell_volume() * u.cwiseProduct(v).sum();
}

/// Zeroes both collars; free-node values are left bit-identical.
template <typename Derived>
FieldT<typename Derived::Scalar> apply_collar_zero(const Grid& grid,
                                                   const Eigen::MatrixBase<Derived>& f) {
  FieldT<typename Derived::Scalar> out = f;
  for (Index i = 0; i < out.cols(); ++i) {
    if (!grid.is_free(i)) out.col(i).setZero();
  }
  return out;
}

Field zero_field(const Grid& grid);

std::string to_string(NodeClass c);

}  // namespace nlgrad
