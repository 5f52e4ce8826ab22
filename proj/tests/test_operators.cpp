#include "doctest.h"

#include "nlgrad/operators.hpp"

#include <Eigen/Dense>

#include <random>

using namespace nlgrad;

namespace {

Field random_field(int n, Index N, std::mt19937_64& rng) {
  std::normal_distribution<double> dist;
  Field f(n, N);
  for (Index i = 0; i < f.size(); ++i) f.data()[i] = dist(rng);
  return f;
}

std::shared_ptr<const Grid> grid1d(double h, double delta) {
  return std::make_shared<const Grid>(build_grid(0.0, 1.0, h, delta));
}

std::shared_ptr<const Grid> grid2d(double h, double delta) {
  return std::make_shared<const Grid>(build_grid(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1), h, delta));
}

KernelSpec kernel(int n, double s, double delta) {
  KernelSpec k;
  k.n = n;
  k.s = s;
  k.delta = delta;
  return k;
}

// Nodes of Omega whose full horizon ball lies inside Omega.
bool fully_interior(const Grid& g, Index i) { return g.boundary_distance_steps(i) > g.layers(); }

}  // namespace

TEST_CASE("constant fields have zero nonlocal gradient exactly") {
  for (int n : {1, 2}) {
    auto g = n == 1 ? grid1d(1.0 / 32, 0.25) : grid2d(1.0 / 16, 0.25);
    const auto op = assemble_nl_gradient(g, kernel(n, 0.4, 0.25));
    Field c(n, g->num_nodes());
    for (int a = 0; a < n; ++a) c.row(a).setConstant(1.7 + a);
    const MatrixField D = op.op.apply(c);
    CHECK(D.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("interaction weights are symmetric and supported in the open horizon ball") {
  auto g = grid2d(1.0 / 16, 0.25);
  const auto op = assemble_nl_gradient(g, kernel(2, 0.6, 0.25));
  const Index c = g->index_of(Eigen::Vector2i(8, 8));
  for (int dx = -5; dx <= 5; ++dx) {
    for (int dy = -5; dy <= 5; ++dy) {
      const Index j = g->index_of(Eigen::Vector2i(8 + dx, 8 + dy));
      const double w = op.weight(c, j);
      CHECK(w == op.weight(j, c));
      if ((g->coordinate(c) - g->coordinate(j)).norm() >= g->delta() - 1e-14) CHECK(w == 0.0);
      if (dx == 0 && dy == 0) CHECK(w == 0.0);
      CHECK(w >= 0.0);
    }
  }
}

TEST_CASE("affine fields are reproduced with mass-normalized kernels") {
  SUBCASE("1D") {
    auto g = grid1d(1.0 / 64, 0.125);
    const auto op = assemble_nl_gradient(g, normalize_mass(kernel(1, 0.5, 0.125), 1.0));
    Field u(1, g->num_nodes());
    for (Index i = 0; i < g->num_nodes(); ++i) u(0, i) = 2.5 * g->coordinate(i)[0] - 0.3;
    const MatrixField D = op.op.apply(u);
    int checked = 0;
    for (Index m = 0; m < op.op.num_eval(); ++m) {
      if (!fully_interior(*g, op.op.eval_nodes()[static_cast<std::size_t>(m)])) continue;
      CHECK(D(0, m) == doctest::Approx(2.5).epsilon(1e-6));
      ++checked;
    }
    CHECK(checked > 0);
  }
  SUBCASE("2D") {
    auto g = grid2d(1.0 / 32, 0.125);
    const auto op = assemble_nl_gradient(g, normalize_mass(kernel(2, 0.5, 0.125), 2.0));
    Eigen::Matrix2d A;
    A << 1.0, -2.0, 0.5, 3.0;
    Field u(2, g->num_nodes());
    for (Index i = 0; i < g->num_nodes(); ++i) u.col(i) = A * g->coordinate(i);
    const MatrixField D = op.op.apply(u);
    for (Index m = 0; m < op.op.num_eval(); ++m) {
      if (!fully_interior(*g, op.op.eval_nodes()[static_cast<std::size_t>(m)])) continue;
      const Eigen::Map<const Eigen::Matrix2d> Dm(D.col(m).data());
      CHECK((Dm - A).norm() <= 1e-6 * A.norm());
    }
  }
}

TEST_CASE("self-cell correction recovers the continuum mass") {
  // Without a mass target the discrete first moment is the kernel mass minus
  // the thin slivers of cells centred outside the ball.
  auto g = grid1d(1.0 / 128, 0.25);
  for (double s : {0.3, 0.7, 0.95}) {
    const KernelSpec k = kernel(1, s, 0.25);
    const auto op = assemble_nl_gradient(g, k);
    CHECK(op.discrete_mass == doctest::Approx(kernel_mass(k)).epsilon(1e-5));
    CHECK(op.calibration == 1.0);
  }
}

TEST_CASE("spike field reproduces the explicit weight row") {
  auto g = grid1d(1.0 / 32, 0.25);
  const auto op = assemble_nl_gradient(g, kernel(1, 0.5, 0.25));
  const Index spike = g->free_nodes()[3];
  Field u = zero_field(*g);
  u(0, spike) = 1.0;
  const MatrixField D = op.op.apply(u);
  for (Index m = 0; m < op.op.num_eval(); ++m) {
    const Index i = op.op.eval_nodes()[static_cast<std::size_t>(m)];
    double expected = 0.0;
    if (i == spike) {
      // sum_j w(i,j) (1 - 0) e(i,j); the row is symmetric so it cancels
      for (Index j = 0; j < g->num_nodes(); ++j) {
        const double w = op.weight(i, j);
        if (w > 0) expected += w * (g->coordinate(i)[0] > g->coordinate(j)[0] ? 1.0 : -1.0);
      }
    } else {
      const double w = op.weight(i, spike);
      if (w > 0) expected = -w * (g->coordinate(i)[0] > g->coordinate(spike)[0] ? 1.0 : -1.0);
    }
    CHECK(D(0, m) == doctest::Approx(expected).epsilon(1e-13).scale(1e-12));
  }
}

TEST_CASE("linearity and pair antisymmetry") {
  std::mt19937_64 rng(5);
  auto g = grid1d(1.0 / 32, 0.25);
  const auto op = assemble_nl_gradient(g, kernel(1, 0.5, 0.25));
  const Field u = random_field(1, g->num_nodes(), rng);
  const Field v = random_field(1, g->num_nodes(), rng);
  const MatrixField lhs = op.op.apply((1.5 * u - 0.25 * v).eval());
  const MatrixField rhs = 1.5 * op.op.apply(u) - 0.25 * op.op.apply(v);
  CHECK((lhs - rhs).norm() <= 1e-12 * rhs.norm());

  // swap the values of one interacting pair: their mutual contribution flips
  const Index i = g->free_nodes()[2];
  const Index j = i + 1;
  Field a = zero_field(*g), b = zero_field(*g);
  a(0, i) = 1.0;
  b(0, j) = 1.0;
  const MatrixField Da = op.op.apply(a);
  const MatrixField Db = op.op.apply(b);
  const auto& nodes = op.op.eval_nodes();
  const Index mi = std::find(nodes.begin(), nodes.end(), i) - nodes.begin();
  const Index mj = std::find(nodes.begin(), nodes.end(), j) - nodes.begin();
  // row j sees (0 - 1) w e_ji with e_ji = +1; row i sees (0 - 1) w e_ij with e_ij = -1
  const double w = op.weight(i, j);
  CHECK(w > 0.0);
  CHECK(Da(0, mj) == doctest::Approx(-w));
  CHECK(Db(0, mi) == doctest::Approx(w));
}

TEST_CASE("discrete integration by parts") {
  std::mt19937_64 rng(17);
  for (int n : {1, 2}) {
    auto g = n == 1 ? grid1d(1.0 / 64, 0.125) : grid2d(1.0 / 16, 0.125);
    const auto op = assemble_nl_gradient(g, kernel(n, 0.3, 0.125));
    for (int t = 0; t < 10; ++t) {
      const Field u = apply_collar_zero(*g, random_field(n, g->num_nodes(), rng));
      const MatrixField phi = random_field(n * n, op.op.num_eval(), rng);
      const MatrixField Du = op.op.apply(u);
      const Field div = op.op.divergence(phi);
      const double lhs = op.op.pairing(Du, phi);
      const double rhs = l2_dot(*g, u, div);
      CHECK(std::abs(lhs + rhs) <= 1e-12 * Du.norm() * phi.norm() * g->cell_volume());
    }
  }
}

TEST_CASE("divergence of a constant matrix field is supported near the collars") {
  auto g = grid1d(1.0 / 32, 0.125);
  const auto op = assemble_nl_gradient(g, kernel(1, 0.5, 0.125));
  const MatrixField phi = MatrixField::Ones(1, op.op.num_eval());
  const Field div = op.op.divergence(phi);
  // brute force: div(i) = -(1/h) sum over rows m and pairs containing i
  for (Index i = 0; i < g->num_nodes(); ++i) {
    double ref = 0.0;
    for (Index k = 0; k < g->num_nodes(); ++k) {
      if (!g->in_omega(k)) continue;
      const double e = g->coordinate(k)[0] > g->coordinate(i)[0] ? 1.0 : -1.0;
      // row k contributes +w e_kj at column k and -w e_kj at column j
      if (k == i) {
        for (Index j = 0; j < g->num_nodes(); ++j) {
          const double w = op.weight(k, j);
          if (w > 0) ref += w * (g->coordinate(k)[0] > g->coordinate(j)[0] ? 1.0 : -1.0);
        }
      } else {
        const double w = op.weight(k, i);
        if (w > 0) ref -= w * e;
      }
    }
    ref = -ref;
    CHECK(div(0, i) == doctest::Approx(ref).scale(1.0).epsilon(1e-12));
    if (g->boundary_distance_steps(i) > g->layers()) CHECK(std::abs(div(0, i)) < 1e-10);
  }
  CHECK(std::abs(div(0, g->index_of(Eigen::VectorXi::Constant(1, 1)))) > 1e-3);
}

TEST_CASE("local gradient") {
  SUBCASE("exact on affine, zero on constants at interior nodes") {
    auto g = grid2d(1.0 / 16, 0.125);
    const auto op = assemble_local_gradient(g, free_mask(*g));
    Eigen::Matrix2d A;
    A << 0.3, 1.0, -1.0, 2.0;
    Field u(2, g->num_nodes()), c(2, g->num_nodes());
    for (Index i = 0; i < g->num_nodes(); ++i) {
      u.col(i) = A * g->coordinate(i) + Eigen::Vector2d(1, 1);
      c.col(i) = Eigen::Vector2d(4, -2);
    }
    const MatrixField Du = op.apply(u);
    const MatrixField Dc = op.apply(c);
    for (Index m = 0; m < op.num_eval(); ++m) {
      const Index i = op.eval_nodes()[static_cast<std::size_t>(m)];
      if (!g->is_free(i)) continue;
      CHECK((Eigen::Map<const Eigen::Matrix2d>(Du.col(m).data()) - A).norm() < 1e-12);
      CHECK(Dc.col(m).norm() == 0.0);
    }
  }
  SUBCASE("second-order accuracy on a quadratic") {
    std::vector<double> errs;
    for (double h : {1.0 / 16, 1.0 / 32, 1.0 / 64}) {
      auto g = grid1d(h, 2 * h);
      const auto op = assemble_local_gradient(g, omega_mask(*g));
      Field u(1, g->num_nodes());
      for (Index i = 0; i < g->num_nodes(); ++i) {
        const double x = g->coordinate(i)[0];
        u(0, i) = x * x * x;
      }
      const MatrixField Du = op.apply(u);
      double err = 0.0;
      for (Index m = 0; m < op.num_eval(); ++m) {
        const Index i = op.eval_nodes()[static_cast<std::size_t>(m)];
        if (!g->in_omega(i)) continue;
        const double x = g->coordinate(i)[0];
        err = std::max(err, std::abs(Du(0, m) - 3 * x * x));
      }
      errs.push_back(err);
    }
    const double slope1 = std::log2(errs[0] / errs[1]);
    const double slope2 = std::log2(errs[1] / errs[2]);
    CHECK(slope1 == doctest::Approx(2.0).epsilon(0.1));
    CHECK(slope2 == doctest::Approx(2.0).epsilon(0.1));
  }
  SUBCASE("adjointness with nonuniform boundary weights") {
    std::mt19937_64 rng(2);
    auto g = grid2d(1.0 / 16, 0.125);
    const auto op = assemble_local_gradient(g, omega_mask(*g));
    Field u = random_field(2, g->num_nodes(), rng);
    for (Index i = 0; i < g->num_nodes(); ++i) if (!op.is_dof(i)) u.col(i).setZero();
    const MatrixField phi = random_field(4, op.num_eval(), rng);
    const double lhs = op.pairing(op.apply(u), phi);
    const double rhs = l2_dot(*g, u, op.divergence(phi));
    CHECK(std::abs(lhs + rhs) < 1e-12 * std::abs(lhs));
  }
}

TEST_CASE("sparse export matches stencil application") {
  std::mt19937_64 rng(9);
  auto g = grid2d(1.0 / 8, 0.25);
  const auto op = assemble_nl_gradient(g, kernel(2, 0.5, 0.25));
  const Field u = random_field(2, g->num_nodes(), rng);
  const Eigen::SparseMatrix<double> G = op.op.to_sparse();
  const Eigen::VectorXd Gu = G * Eigen::Map<const Eigen::VectorXd>(u.data(), u.size());
  const MatrixField Du = op.op.apply(u);
  CHECK((Gu - Eigen::Map<const Eigen::VectorXd>(Du.data(), Du.size())).norm() < 1e-12 * Gu.norm());
}
