#include "nlgrad/operators.hpp"

#include "quadrature.hpp"

#include <boost/math/constants/constants.hpp>

#include <cmath>
#include <algorithm>
#include <map>
#include <ostream>
#include <stdexcept>

namespace nlgrad {

GradientOperator::GradientOperator(std::shared_ptr<const Grid> grid,
                                   std::vector<Index> eval_nodes,
                                   Eigen::VectorXd quad_weights,
                                   std::vector<bool> dof_mask,
                                   std::vector<Index> row_ptr,
                                   std::vector<Index> neighbours,
                                   Eigen::MatrixXd coefficients)
    : grid_(std::move(grid)),
      eval_nodes_(std::move(eval_nodes)),
      quad_weights_(std::move(quad_weights)),
      dof_mask_(std::move(dof_mask)),
      row_ptr_(std::move(row_ptr)),
      neighbours_(std::move(neighbours)),
      coefficients_(std::move(coefficients)) {
  if (row_ptr_.size() != eval_nodes_.size() + 1 ||
      quad_weights_.size() != static_cast<Index>(eval_nodes_.size()) ||
      coefficients_.cols() != static_cast<Index>(neighbours_.size())) {
    throw std::invalid_argument("GradientOperator: inconsistent storage");
  }
}

Index GradientOperator::num_dof_nodes() const {
  return static_cast<Index>(std::count(dof_mask_.begin(), dof_mask_.end(), true));
}

Eigen::SparseMatrix<double> GradientOperator::to_sparse() const {
  const int n = dim();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(neighbours_.size() * static_cast<std::size_t>(2 * n * n));
  for (Index m = 0; m < num_eval(); ++m) {
    const Index i = eval_nodes_[static_cast<std::size_t>(m)];
    for (Index t = row_ptr_[static_cast<std::size_t>(m)]; t < row_ptr_[static_cast<std::size_t>(m) + 1]; ++t) {
      const Index j = neighbours_[static_cast<std::size_t>(t)];
      for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
          const Index row = m * n * n + a + n * b;
          const double c = coefficients_(b, t);
          triplets.emplace_back(row, i * n + a, c);
          triplets.emplace_back(row, j * n + a, -c);
        }
      }
    }
  }
  Eigen::SparseMatrix<double> G(num_eval() * n * n, grid_->num_nodes() * n);
  G.setFromTriplets(triplets.begin(), triplets.end());
  return G;
}

MatrixField GradientOperator::on_grid_nodes(const MatrixField& values) const {
  MatrixField out = MatrixField::Zero(values.rows(), grid_->num_nodes());
  for (Index m = 0; m < num_eval(); ++m) out.col(eval_nodes_[static_cast<std::size_t>(m)]) = values.col(m);
  return out;
}

std::vector<bool> free_mask(const Grid& grid) {
  std::vector<bool> mask(static_cast<std::size_t>(grid.num_nodes()));
  for (Index i = 0; i < grid.num_nodes(); ++i) mask[static_cast<std::size_t>(i)] = grid.is_free(i);
  return mask;
}

std::vector<bool> omega_mask(const Grid& grid) {
  std::vector<bool> mask(static_cast<std::size_t>(grid.num_nodes()));
  for (Index i = 0; i < grid.num_nodes(); ++i) mask[static_cast<std::size_t>(i)] = grid.in_omega(i);
  return mask;
}

namespace {

constexpr double kPi = boost::math::constants::pi<double>();

// Mass of the kernel over the lattice cell centred at offset k (k != 0).
double cell_mass(const KernelSpec& kernel, const Eigen::VectorXi& k, double h,
                 double rel_tol) {
  if (k.size() == 1) {
    const double c = std::abs(k[0]) * h;
    return radial_moment(kernel, 0.0, c - 0.5 * h, c + 0.5 * h, rel_tol);
  }
  const double x0 = (k[0] - 0.5) * h;
  const double x1 = (k[0] + 0.5) * h;
  const double y0 = (k[1] - 0.5) * h;
  const double y1 = (k[1] + 0.5) * h;
  // The integrand is only C^2 across the plateau edge and the horizon;
  // integrate piecewise between those circles.
  const double radii[2] = {kernel.cutoff.b0 * kernel.delta, kernel.delta};
  auto crossings = [&](double fixed, double lo, double hi) {
    std::vector<double> pts{lo};
    for (double R : radii) {
      const double d2 = R * R - fixed * fixed;
      if (d2 <= 0.0) continue;
      for (double c : {-std::sqrt(d2), std::sqrt(d2)}) {
        if (c > lo && c < hi) pts.push_back(c);
      }
    }
    pts.push_back(hi);
    std::sort(pts.begin(), pts.end());
    return pts;
  };
  auto piecewise = [](auto&& f, const std::vector<double>& pts, double tol, const char* what) {
    double total = 0.0;
    for (std::size_t q = 0; q + 1 < pts.size(); ++q) {
      total += detail::adaptive_integrate(f, pts[q], pts[q + 1], tol, what);
    }
    return total;
  };
  const double inner_tol = 0.1 * rel_tol;
  auto column = [&](double x) {
    auto f = [&](double y) { return kernel_radial(kernel, std::hypot(x, y)); };
    return piecewise(f, crossings(x, y0, y1), inner_tol, "cell quadrature (inner)");
  };
  // column(x) loses smoothness where a circle passes a cell corner
  std::vector<double> xs = crossings(y0, x0, x1);
  for (double x : crossings(y1, x0, x1)) xs.push_back(x);
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  return piecewise(column, xs, rel_tol, "cell quadrature");
}

// Mass of the kernel over the self cell [-h/2, h/2]^n.
double self_cell_mass(const KernelSpec& kernel, int n, double h, double rel_tol) {
  if (n == 1) return 2.0 * radial_moment(kernel, 0.0, 0.0, 0.5 * h, rel_tol);
  // Eight congruent triangles; polar coordinates around the singularity.
  auto wedge = [&](double theta) {
    return radial_moment(kernel, 1.0, 0.0, 0.5 * h / std::cos(theta), 0.1 * rel_tol);
  };
  return 8.0 * detail::adaptive_integrate(wedge, 0.0, 0.25 * kPi, rel_tol, "self-cell quadrature");
}

// Canonical representative of an offset under the lattice symmetry group.
Eigen::VectorXi canonical(const Eigen::VectorXi& k) {
  Eigen::VectorXi c = k.cwiseAbs();
  std::sort(c.data(), c.data() + c.size(), std::greater<>());
  return c;
}

struct OffsetLess {
  bool operator()(const Eigen::VectorXi& a, const Eigen::VectorXi& b) const {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
  }
};

}  // namespace

NonlocalGradientOp assemble_nl_gradient(std::shared_ptr<const Grid> grid,
                                        const KernelSpec& kernel,
                                        const AssemblyOptions& options) {
  validate_kernel(kernel);
  const int n = grid->dim();
  if (kernel.n != n) throw std::invalid_argument("assemble_nl_gradient: kernel and grid dimensions differ");
  if (std::abs(kernel.delta - grid->delta()) > 1e-12 * grid->delta()) {
    throw std::invalid_argument("assemble_nl_gradient: grid and kernel must share delta");
  }
  const int layers = grid->layers();
  if (layers < 2) {
    throw std::invalid_argument("assemble_nl_gradient: the horizon must span at least two lattice steps");
  }
  const double h = grid->h();

  NonlocalGradientOp out;
  out.kernel = kernel;
  out.self_cell_mass = self_cell_mass(kernel, n, h, options.cell_rel_tol);

  // Offsets strictly inside the horizon ball, on exact lattice arithmetic.
  std::map<Eigen::VectorXi, double, OffsetLess> cache;
  Eigen::VectorXi k = Eigen::VectorXi::Constant(n, -layers);
  const int span = 2 * layers + 1;
  const long total = static_cast<long>(std::pow(span, n));
  for (long flat = 0; flat < total; ++flat) {
    long rest = flat;
    for (int a = 0; a < n; ++a) {
      k[a] = static_cast<int>(rest % span) - layers;
      rest /= span;
    }
    const int r2 = k.squaredNorm();
    if (r2 == 0 || r2 >= layers * layers) continue;
    const Eigen::VectorXi key = canonical(k);
    auto it = cache.find(key);
    if (it == cache.end()) {
      it = cache.emplace(key, cell_mass(kernel, key, h, options.cell_rel_tol)).first;
    }
    StencilEntry e;
    e.offset = k;
    e.distance = h * std::sqrt(static_cast<double>(r2));
    e.direction = -k.cast<double>() * h / e.distance;
    e.weight = it->second / e.distance;
    if (r2 == 1) e.weight += out.self_cell_mass / (2.0 * n * h);
    out.stencil.push_back(std::move(e));
  }

  double moment = 0.0;
  for (const auto& e : out.stencil) moment += e.weight * e.distance;
  if (kernel.mass_target) {
    out.calibration = *kernel.mass_target / moment;
    for (auto& e : out.stencil) e.weight *= out.calibration;
    moment = *kernel.mass_target;
  }
  out.discrete_mass = moment;

  // Rows on every node of Omega.
  std::vector<Index> eval_nodes = grid->omega_nodes();
  std::vector<Index> row_ptr{0};
  std::vector<Index> neighbours;
  Eigen::MatrixXd coefficients(n, static_cast<Index>(eval_nodes.size() * out.stencil.size()));
  Index t = 0;
  for (const Index i : eval_nodes) {
    const Eigen::VectorXi ki = grid->lattice(i);
    for (const auto& e : out.stencil) {
      const Index j = grid->index_of(ki + e.offset);
      if (j < 0) throw std::logic_error("assemble_nl_gradient: horizon ball leaves the grid");
      neighbours.push_back(j);
      coefficients.col(t++) = e.weight * e.direction;
    }
    row_ptr.push_back(t);
  }
  coefficients.conservativeResize(n, t);
  Eigen::VectorXd quad_weights = Eigen::VectorXd::Constant(static_cast<Index>(eval_nodes.size()), grid->cell_volume());
  out.op = GradientOperator(grid, std::move(eval_nodes), std::move(quad_weights), free_mask(*grid), std::move(row_ptr), std::move(neighbours),
                            std::move(coefficients));
  return out;
}

double NonlocalGradientOp::weight(Index i, Index j) const {
  const Grid& g = op.grid();
  const Eigen::VectorXi d = g.lattice(j) - g.lattice(i);
  for (const auto& e : stencil) {
    if (e.offset == d) return e.weight;
  }
  return 0.0;
}

GradientOperator assemble_local_gradient(std::shared_ptr<const Grid> grid,
                                         const std::vector<bool>& mask) {
  const int n = grid->dim();
  const double h = grid->h();
  if (mask.size() != static_cast<std::size_t>(grid->num_nodes())) {
    throw std::invalid_argument("assemble_local_gradient: mask size mismatch");
  }
  auto in_mask = [&](Index j) { return j >= 0 && mask[static_cast<std::size_t>(j)]; };
  auto neighbour = [&](Index i, int a, int sign) {
    Eigen::VectorXi k = grid->lattice(i);
    k[a] += sign;
    return grid->index_of(k);
  };

  std::vector<Index> eval_nodes;
  std::vector<double> weights;
  std::vector<Index> row_ptr{0};
  std::vector<Index> neighbours;
  std::vector<Eigen::VectorXd> coefs;

  for (Index i = 0; i < grid->num_nodes(); ++i) {
    const bool inside = in_mask(i);
    bool touches = false;
    for (int a = 0; a < n && !inside && !touches; ++a) {
      touches = in_mask(neighbour(i, a, +1)) || in_mask(neighbour(i, a, -1));
    }
    if (!inside && !touches) continue;

    double w = grid->cell_volume();
    for (int a = 0; a < n; ++a) {
      const Index jp = neighbour(i, a, +1);
      const Index jm = neighbour(i, a, -1);
      Eigen::VectorXd ea = Eigen::VectorXd::Unit(n, a);
      if (inside) {
        if (jp < 0 || jm < 0) throw std::logic_error("assemble_local_gradient: mask touches the grid edge");
        // (u_p - u_m) / 2h = (u_i - u_m)/2h - (u_i - u_p)/2h
        neighbours.push_back(jm);
        coefs.push_back(ea / (2.0 * h));
        neighbours.push_back(jp);
        coefs.push_back(-ea / (2.0 * h));
        continue;
      }
      const bool p_in = in_mask(jp);
      const bool m_in = in_mask(jm);
      if (p_in && m_in) {
        neighbours.push_back(jm);
        coefs.push_back(ea / (2.0 * h));
        neighbours.push_back(jp);
        coefs.push_back(-ea / (2.0 * h));
      } else if (p_in) {
        // (u_p - u_i) / h
        neighbours.push_back(jp);
        coefs.push_back(-ea / h);
        w *= 0.5;
      } else if (m_in) {
        // (u_i - u_m) / h
        neighbours.push_back(jm);
        coefs.push_back(ea / h);
        w *= 0.5;
      }
    }
    eval_nodes.push_back(i);
    weights.push_back(w);
    row_ptr.push_back(static_cast<Index>(neighbours.size()));
  }

  Eigen::MatrixXd coefficients(n, static_cast<Index>(coefs.size()));
  for (std::size_t t = 0; t < coefs.size(); ++t) coefficients.col(static_cast<Index>(t)) = coefs[t];
  return GradientOperator(std::move(grid), std::move(eval_nodes),
                          Eigen::Map<Eigen::VectorXd>(weights.data(), static_cast<Index>(weights.size())),
                          mask, std::move(row_ptr), std::move(neighbours), std::move(coefficients));
}

void dump_operator(const GradientOperator& op, std::ostream& os) {
  const Eigen::SparseMatrix<double> G = op.to_sparse();
  os.precision(17);
  for (int k = 0; k < G.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(G, k); it; ++it) {
      os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    }
  }
}

}  // namespace nlgrad
