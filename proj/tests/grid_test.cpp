#include <cmath>
#include <numbers>
#include <random>

#include "gtest/gtest.h"
#include "stefan/grid.hpp"

using namespace stefan;

namespace {

double brute_force_radius(const CellMask& a, const CellMask& b) {
  const Grid& g = a.grid();
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!a.test(i)) continue;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (!b.test(j)) continue;
      const Point p = g.center(i), q = g.center(j);
      double d2 = 0.0;
      for (int ax = 0; ax < g.dim(); ++ax) d2 += (p[ax] - q[ax]) * (p[ax] - q[ax]);
      best = std::min(best, std::sqrt(d2));
    }
    worst = std::max(worst, best);
  }
  return worst;
}

CellMask random_mask(const Grid& g, std::mt19937_64& rng, double p) {
  std::bernoulli_distribution coin(p);
  CellMask m(g);
  for (std::size_t c = 0; c < g.size(); ++c) m.set(c, coin(rng));
  return m;
}

}  // namespace

TEST(Grid, RejectsTooFewCells) {
  EXPECT_THROW(Grid::line(0.0, 1.0, 3), InvalidInput);
  EXPECT_THROW(Grid(2, {0, 0, 0}, {1, -1, 1}, {10, 10, 1}), InvalidInput);
  EXPECT_THROW(Grid(4, {}, {1, 1, 1}, {4, 4, 4}), InvalidInput);
}

TEST(Grid, NodalGridPutsCentersOnEndpoints) {
  const Grid g = Grid::nodal_line(0.0, 1.0, 10);
  EXPECT_EQ(g.count(0), 11u);
  EXPECT_NEAR(g.spacing(0), 0.1, 1e-15);
  EXPECT_NEAR(g.coordinate(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(g.coordinate(0, 10), 1.0, 1e-15);
}

TEST(Grid, FlattenRoundTrip) {
  const Grid g(3, {0, 0, 0}, {1, 2, 3}, {4, 5, 6});
  for (std::size_t c = 0; c < g.size(); ++c) EXPECT_EQ(g.flatten(g.unflatten(c)), c);
  EXPECT_EQ(g.stride(2), 1u);
  EXPECT_EQ(g.stride(1), 6u);
  EXPECT_EQ(g.stride(0), 30u);
}

TEST(Field, RejectsNonFiniteAndWrongSize) {
  const Grid g = Grid::line(0.0, 1.0, 8);
  EXPECT_THROW(TemperatureField(g, 0.0, std::vector<double>(7, 0.0)), InvalidInput);
  std::vector<double> v(8, 0.0);
  v[3] = std::nan("");
  EXPECT_THROW(TemperatureField(g, 0.0, v), InvalidInput);
}

TEST(DiscreteLaplacian, ExactOnQuadratics) {
  const Grid g = Grid::line(0.0, 1.0, 50);
  const auto f = TemperatureField::sample(g, 0.0, [](const Point& x) { return x[0] * x[0]; });
  const MaskedField lap = discrete_laplacian(f);
  EXPECT_FALSE(lap.is_valid(0));
  EXPECT_FALSE(lap.is_valid(49));
  for (std::size_t c = 1; c + 1 < g.size(); ++c) {
    ASSERT_TRUE(lap.is_valid(c));
    EXPECT_NEAR(lap.field[c], 2.0, 1e-9);
  }
}

TEST(DiscreteLaplacian, ConstantGivesZero) {
  const Grid g(2, {0, 0, 0}, {1, 1, 1}, {8, 9, 1});
  const MaskedField lap = discrete_laplacian(TemperatureField(g, 0.0, 3.5));
  EXPECT_EQ(lap.valid_count(), 6u * 7u);
  EXPECT_EQ(lap.max_abs_valid(), 0.0);
}

TEST(DiscreteLaplacian, SineWithinTaylorBound) {
  const double h = 0.01;
  const Grid g = Grid::nodal_line(0.0, 1.0, 100);
  ASSERT_NEAR(g.spacing(0), h, 1e-15);
  const double pi = std::numbers::pi;
  const auto f =
      TemperatureField::sample(g, 0.0, [pi](const Point& x) { return std::sin(pi * x[0]); });
  const MaskedField lap = discrete_laplacian(f);
  const double bound = std::pow(pi, 4) * h * h / 12.0;
  for (std::size_t c = 1; c + 1 < g.size(); ++c) {
    const double x = g.coordinate(0, c);
    const double exact = -pi * pi * std::sin(pi * x);
    EXPECT_LE(std::abs(lap.field[c] - exact), bound) << "cell " << c;
  }
}

TEST(DiscreteLaplacian, RejectsNonFinite) {
  const Grid g = Grid::line(0.0, 1.0, 8);
  TemperatureField f(g, 0.0, 1.0);
  f[4] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(discrete_laplacian(f), InvalidInput);
}

TEST(DiscreteLaplacian, LinearAndAnnihilatesAffine) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Grid g(3, {0, 0, 0}, {1.0, 0.7, 1.3}, {6, 7, 8});
  std::vector<double> a(g.size()), b(g.size()), mix(g.size());
  const double alpha = 1.7, beta = -0.3;
  for (std::size_t c = 0; c < g.size(); ++c) {
    a[c] = u(rng);
    b[c] = u(rng);
    mix[c] = alpha * a[c] + beta * b[c];
  }
  const auto la = discrete_laplacian(TemperatureField(g, 0.0, a));
  const auto lb = discrete_laplacian(TemperatureField(g, 0.0, b));
  const auto lm = discrete_laplacian(TemperatureField(g, 0.0, mix));
  for (std::size_t c = 0; c < g.size(); ++c) {
    const double expect = alpha * la.field[c] + beta * lb.field[c];
    EXPECT_NEAR(lm.field[c], expect, 1e-10 * (1.0 + std::abs(expect)));
  }
  const auto affine = TemperatureField::sample(
      g, 0.0, [](const Point& x) { return 2.0 - 3.0 * x[0] + 0.5 * x[1] + 4.0 * x[2]; });
  EXPECT_LT(discrete_laplacian(affine).max_abs_valid(), 1e-9);
}

TEST(ParabolicDistance, Examples) {
  const SpaceTimePoint p{{0.1, 0.2, 0.3}, 1.0};
  EXPECT_EQ(parabolic_distance(p, p), 0.0);
  const SpaceTimePoint q{{0.1, 0.2, 0.3}, 5.0};
  EXPECT_DOUBLE_EQ(parabolic_distance(p, q), 2.0);
}

TEST(ParabolicDistance, MatchesClosedFormAndIsSymmetric) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    SpaceTimePoint p{{u(rng), u(rng), u(rng)}, u(rng)};
    SpaceTimePoint q{{u(rng), u(rng), u(rng)}, u(rng)};
    const double dx = p.x[0] - q.x[0], dy = p.x[1] - q.x[1], dz = p.x[2] - q.x[2];
    const double oracle = std::sqrt(dx * dx + dy * dy + dz * dz + std::fabs(p.t - q.t));
    EXPECT_NEAR(parabolic_distance(p, q), oracle, 1e-14 * (1.0 + oracle));
    EXPECT_EQ(parabolic_distance(p, q), parabolic_distance(q, p));
    EXPECT_GT(parabolic_distance(p, q), 0.0);
  }
}

TEST(PositivitySet, Examples) {
  const Grid g = Grid::line(0.0, 1.0, 100);
  const CellMask all(g, true);
  EXPECT_TRUE(positivity_set(TemperatureField(g, 0.0, -1.0), all).empty());
  EXPECT_EQ(positivity_set(TemperatureField(g, 0.0, 1.0), all).count(), 100u);

  const auto f = TemperatureField::sample(g, 0.0, [](const Point& x) { return x[0] - 0.5; });
  const CellMask pos = positivity_set(f, all);
  std::size_t expected = 0;
  for (std::size_t c = 0; c < g.size(); ++c) {
    const bool above = g.coordinate(0, c) > 0.5;
    expected += above ? 1 : 0;
    EXPECT_EQ(pos.test(c), above);
  }
  EXPECT_EQ(expected, 50u);
  EXPECT_EQ(pos.count(), 50u);
}

TEST(PositivitySet, StrictAndRestrictedToRegion) {
  const Grid g = Grid::line(0.0, 1.0, 10);
  const CellMask left = CellMask::from_predicate(g, [](const Point& x) { return x[0] < 0.5; });
  TemperatureField f(g, 0.0, 1.0);
  f[0] = 0.0;
  const CellMask pos = positivity_set(f, left);
  EXPECT_FALSE(pos.test(0));
  EXPECT_EQ(pos.count(), 4u);
}

TEST(NeighborhoodRadius, Examples) {
  const Grid g = Grid::line(0.0, 1.0, 10);
  CellMask b(g), a(g);
  b.set(0);
  b.set(1);
  a.set(1);
  EXPECT_EQ(neighborhood_radius(a, b), 0.0);
  EXPECT_EQ(neighborhood_radius(CellMask(g), b), 0.0);

  CellMask single(g);
  single.set(4);  // center 0.45, nearest B center 0.15
  EXPECT_NEAR(neighborhood_radius(single, b), 0.3, 1e-12);

  EXPECT_THROW(neighborhood_radius(single, CellMask(g)), InvalidInput);
}

TEST(NeighborhoodRadius, MatchesBruteForceOnRandomMasks) {
  std::mt19937_64 rng(2024);
  const Grid g2(2, {0, 0, 0}, {1.0, 1.0, 1}, {20, 20, 1});
  for (int trial = 0; trial < 30; ++trial) {
    const CellMask a = random_mask(g2, rng, 0.3);
    CellMask b = random_mask(g2, rng, 0.05);
    if (b.empty()) b.set(0);
    EXPECT_NEAR(neighborhood_radius(a, b), brute_force_radius(a, b), 1e-12);
  }
  const Grid g3(3, {0, 0, 0}, {1.0, 0.6, 2.0}, {7, 5, 9});
  for (int trial = 0; trial < 20; ++trial) {
    const CellMask a = random_mask(g3, rng, 0.4);
    CellMask b = random_mask(g3, rng, 0.03);
    if (b.empty()) b.set(17);
    EXPECT_NEAR(neighborhood_radius(a, b), brute_force_radius(a, b), 1e-12);
  }
}

TEST(NeighborhoodRadius, EnlargingReferenceNeverIncreasesDelta) {
  std::mt19937_64 rng(99);
  const Grid g(2, {0, 0, 0}, {1.0, 1.0, 1}, {16, 12, 1});
  for (int trial = 0; trial < 25; ++trial) {
    const CellMask a = random_mask(g, rng, 0.5);
    CellMask b = random_mask(g, rng, 0.05);
    if (b.empty()) b.set(5);
    double previous = neighborhood_radius(a, b);
    for (int grow = 0; grow < 5; ++grow) {
      const CellMask extra = random_mask(g, rng, 0.05);
      for (std::size_t c = 0; c < g.size(); ++c)
        if (extra.test(c)) b.set(c);
      const double now = neighborhood_radius(a, b);
      EXPECT_LE(now, previous + 1e-15);
      previous = now;
    }
  }
}
