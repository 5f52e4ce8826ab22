#include "nlgrad/grid.hpp"

#include <algorithm>
#include <stdexcept>

namespace nlgrad {

long integral_ratio(double x) {
  const double k = std::round(x);
  if (std::abs(x - k) <= 1e-12 * std::max(1.0, std::abs(x))) return static_cast<long>(k);
  return -1;
}

Grid build_grid(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, double h,
                double delta) {
  const auto n = static_cast<int>(lo.size());
  if (n < 1 || n > 2 || hi.size() != n) {
    throw std::invalid_argument("grid: dimension must be 1 or 2 with matching box corners");
  }
  if (!(h > 0.0)) throw std::invalid_argument("grid: h must be positive");
  if (delta < h) {
    throw std::invalid_argument("grid: delta must be >= h (no neighbours inside the horizon)");
  }
  const long layers = integral_ratio(delta / h);
  if (layers < 1) throw std::invalid_argument("grid: delta / h must be integral");

  Grid g;
  g.dim_ = n;
  g.h_ = h;
  g.delta_ = delta;
  g.layers_ = static_cast<int>(layers);
  g.lo_ = lo;
  g.hi_ = hi;
  g.cells_.resize(static_cast<std::size_t>(n));
  g.extent_.resize(static_cast<std::size_t>(n));
  g.num_nodes_ = 1;
  for (int a = 0; a < n; ++a) {
    if (!(hi[a] > lo[a])) throw std::invalid_argument("grid: box must be nonempty");
    const long cells = integral_ratio((hi[a] - lo[a]) / h);
    if (cells < 1) throw std::invalid_argument("grid: box side lengths must be integral multiples of h");
    g.cells_[static_cast<std::size_t>(a)] = static_cast<int>(cells);
    g.extent_[static_cast<std::size_t>(a)] = static_cast<int>(cells + 2 * layers + 1);
    g.num_nodes_ *= g.extent_[static_cast<std::size_t>(a)];
  }
  g.cell_volume_ = std::pow(h, n);
  g.classes_.resize(static_cast<std::size_t>(g.num_nodes_));
  for (Index i = 0; i < g.num_nodes_; ++i) {
    const int d = g.boundary_distance_steps(i);
    NodeClass c = NodeClass::ExteriorCollar;
    if (d > 0) c = d > layers ? NodeClass::Free : NodeClass::InteriorCollar;
    g.classes_[static_cast<std::size_t>(i)] = c;
  }
  return g;
}

Grid build_grid(double lo, double hi, double h, double delta) {
  return build_grid(Eigen::VectorXd::Constant(1, lo), Eigen::VectorXd::Constant(1, hi), h, delta);
}

Eigen::VectorXi Grid::lattice(Index i) const {
  Eigen::VectorXi k(dim_);
  for (int a = 0; a < dim_; ++a) {
    const int e = extent_[static_cast<std::size_t>(a)];
    k[a] = static_cast<int>(i % e) - layers_;
    i /= e;
  }
  return k;
}

Index Grid::index_of(const Eigen::VectorXi& k) const {
  Index idx = 0;
  Index stride = 1;
  for (int a = 0; a < dim_; ++a) {
    const int e = extent_[static_cast<std::size_t>(a)];
    const int ka = k[a] + layers_;
    if (ka < 0 || ka >= e) return -1;
    idx += ka * stride;
    stride *= e;
  }
  return idx;
}

Eigen::VectorXd Grid::coordinate(Index i) const {
  return lo_ + h_ * lattice(i).cast<double>();
}

int Grid::boundary_distance_steps(Index i) const {
  const Eigen::VectorXi k = lattice(i);
  int d = std::numeric_limits<int>::max();
  for (int a = 0; a < dim_; ++a) {
    d = std::min({d, k[a], cells_[static_cast<std::size_t>(a)] - k[a]});
  }
  return d;
}

std::vector<Index> Grid::nodes_where(NodeClass c) const {
  std::vector<Index> out;
  for (Index i = 0; i < num_nodes_; ++i) {
    if (node_class(i) == c) out.push_back(i);
  }
  return out;
}

std::vector<Index> Grid::omega_nodes() const {
  std::vector<Index> out;
  for (Index i = 0; i < num_nodes_; ++i) {
    if (in_omega(i)) out.push_back(i);
  }
  return out;
}

std::vector<Index> Grid::free_nodes() const { return nodes_where(NodeClass::Free); }

Index Grid::count(NodeClass c) const {
  return static_cast<Index>(std::count(classes_.begin(), classes_.end(), c));
}

Field zero_field(const Grid& grid) { return Field::Zero(grid.dim(), grid.num_nodes()); }

std::string to_string(NodeClass c) {
  switch (c) {
    case NodeClass::ExteriorCollar: return "exterior-collar";
    case NodeClass::InteriorCollar: return "interior-collar";
    case NodeClass::Free: return "free";
  }
  return "unknown";
}

}  // namespace nlgrad
