#include "doctest.h"

#include "nlgrad/grid.hpp"

#include <random>
#include <set>

using namespace nlgrad;

namespace {

std::vector<double> free_coordinates_1d(const Grid& g) {
  std::vector<double> xs;
  for (Index i : g.free_nodes()) xs.push_back(g.coordinate(i)[0]);
  return xs;
}

}  // namespace

TEST_CASE("1D grid classification by hand enumeration") {
  const Grid g = build_grid(0.0, 1.0, 0.125, 0.25);
  REQUIRE(g.num_nodes() == 13);
  CHECK(g.coordinate(0)[0] == doctest::Approx(-0.25));
  CHECK(g.coordinate(12)[0] == doctest::Approx(1.25));
  const auto xs = free_coordinates_1d(g);
  REQUIRE(xs.size() == 3);
  CHECK(xs[0] == doctest::Approx(0.375));
  CHECK(xs[1] == doctest::Approx(0.5));
  CHECK(xs[2] == doctest::Approx(0.625));
  // node at distance exactly delta from the boundary is interior collar
  CHECK(g.node_class(g.index_of(Eigen::VectorXi::Constant(1, 2))) == NodeClass::InteriorCollar);
  // boundary nodes of the open interval belong to the exterior collar
  CHECK(g.node_class(g.index_of(Eigen::VectorXi::Constant(1, 0))) == NodeClass::ExteriorCollar);
  CHECK(g.count(NodeClass::ExteriorCollar) == 6);
  CHECK(g.count(NodeClass::InteriorCollar) == 4);
}

TEST_CASE("delta = h leaves the open band (h, 1 - h) free") {
  const double h = 0.0625;
  const Grid g = build_grid(0.0, 1.0, h, h);
  const auto xs = free_coordinates_1d(g);
  REQUIRE(!xs.empty());
  CHECK(xs.front() == doctest::Approx(2 * h));
  CHECK(xs.back() == doctest::Approx(1 - 2 * h));
  CHECK(xs.size() == 13);
}

TEST_CASE("2D unit square with delta = h = 0.25") {
  const Grid g = build_grid(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1), 0.25, 0.25);
  CHECK(g.num_nodes() == 49);
  const auto free = g.free_nodes();
  REQUIRE(free.size() == 1);
  CHECK(g.coordinate(free[0]).isApprox(Eigen::Vector2d(0.5, 0.5)));
  CHECK(g.count(NodeClass::InteriorCollar) == 8);
}

TEST_CASE("grid preconditions") {
  CHECK_THROWS_AS(build_grid(0.0, 1.0, 0.1, 0.05), std::invalid_argument);
  CHECK_THROWS_AS(build_grid(0.0, 1.0, 0.1, 0.25), std::invalid_argument);
  CHECK_THROWS_AS(build_grid(0.0, 1.0, 0.3, 0.3), std::invalid_argument);
  CHECK_THROWS_AS(build_grid(0.0, 1.0, -0.1, 0.3), std::invalid_argument);
  CHECK_THROWS_AS(build_grid(1.0, 1.0, 0.1, 0.2), std::invalid_argument);
}

TEST_CASE("mask partition, no truncated neighbourhoods, monotonicity in delta") {
  for (double delta : {0.125, 0.25, 0.375}) {
    const Grid g = build_grid(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0.75), 0.0625, delta);
    Index total = 0;
    for (auto c : {NodeClass::ExteriorCollar, NodeClass::InteriorCollar, NodeClass::Free}) total += g.count(c);
    CHECK(total == g.num_nodes());
    // every lattice point within delta of a free node exists
    const int L = g.layers();
    for (Index i : g.free_nodes()) {
      const Eigen::VectorXi k = g.lattice(i);
      for (int dx = -L; dx <= L; ++dx) {
        for (int dy = -L; dy <= L; ++dy) {
          if (dx * dx + dy * dy > L * L) continue;
          CHECK(g.index_of(k + Eigen::Vector2i(dx, dy)) >= 0);
        }
      }
    }
  }
  const Grid small = build_grid(0.0, 1.0, 0.03125, 0.0625);
  const Grid large = build_grid(0.0, 1.0, 0.03125, 0.125);
  std::set<long> small_free, large_free;
  for (Index i : small.free_nodes()) small_free.insert(std::lround(small.coordinate(i)[0] / 0.03125));
  for (Index i : large.free_nodes()) large_free.insert(std::lround(large.coordinate(i)[0] / 0.03125));
  for (long k : large_free) CHECK(small_free.count(k) == 1);
  CHECK(large_free.size() < small_free.size());
}

TEST_CASE("lp_norm") {
  const Grid g = build_grid(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 1), 0.125, 0.25);
  Field zero = zero_field(g);
  CHECK(lp_norm(g, zero, 2.0) == 0.0);

  SUBCASE("constant field on a region") {
    Field c(2, g.num_nodes());
    c.row(0).setConstant(3.0);
    c.row(1).setConstant(4.0);
    const double measure = g.count(NodeClass::Free) * g.cell_volume();
    for (double p : {1.0, 2.0, 3.5}) {
      CHECK(lp_norm(g, c, p, Region::Free) == doctest::Approx(5.0 * std::pow(measure, 1.0 / p)));
    }
    CHECK(lp_norm(g, c, std::numeric_limits<double>::infinity(), Region::Free) == doctest::Approx(5.0));
  }

  SUBCASE("properties on random fields") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> N;
    const double measure = g.num_nodes() * g.cell_volume();
    for (int t = 0; t < 25; ++t) {
      Field f(2, g.num_nodes()), k(2, g.num_nodes());
      for (Index i = 0; i < f.size(); ++i) {
        f.data()[i] = N(rng);
        k.data()[i] = N(rng);
      }
      const double inf = lp_norm(g, f, std::numeric_limits<double>::infinity());
      CHECK(inf >= lp_norm(g, f, 2.0) / std::sqrt(measure) - 1e-14);
      for (double p : {1.0, 2.0, 4.0}) {
        CHECK(lp_norm(g, (-2.5 * f).eval(), p) == doctest::Approx(2.5 * lp_norm(g, f, p)));
        CHECK(lp_norm(g, (f + k).eval(), p) <= lp_norm(g, f, p) + lp_norm(g, k, p) + 1e-12);
      }
    }
  }
}

TEST_CASE("apply_collar_zero") {
  const Grid g = build_grid(0.0, 1.0, 0.0625, 0.125);
  Field ones = Field::Ones(1, g.num_nodes());
  const Field z = apply_collar_zero(g, ones);
  for (Index i = 0; i < g.num_nodes(); ++i) CHECK(z(0, i) == (g.is_free(i) ? 1.0 : 0.0));
  CHECK(apply_collar_zero(g, z) == z);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> N;
  Field r(1, g.num_nodes());
  for (Index i = 0; i < r.size(); ++i) r.data()[i] = N(rng);
  const Field rz = apply_collar_zero(g, r);
  for (Index i : g.free_nodes()) CHECK(rz(0, i) == r(0, i));
}
