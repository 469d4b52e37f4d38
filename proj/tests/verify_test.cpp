#include <cmath>
#include <numbers>
#include <random>

#include "gtest/gtest.h"
#include "stefan/similarity.hpp"
#include "stefan/stefan1d.hpp"
#include "stefan/verify.hpp"

using namespace stefan;

namespace {

constexpr double kPi = std::numbers::pi;

Grid unit_box(int dim, std::size_t intervals) {
  Point hi{0, 0, 0};
  Index n{1, 1, 1};
  for (int a = 0; a < dim; ++a) {
    hi[a] = 1.0;
    n[a] = intervals;
  }
  return Grid::nodal(dim, {0, 0, 0}, hi, n);
}

double sine_product(const Point& x, int dim) {
  double p = 1.0;
  for (int a = 0; a < dim; ++a) p *= std::sin(kPi * x[a]);
  return p;
}

/// Explicit Dirichlet solve of the heat equation from a product of sines.
HeatTrajectory discrete_caloric(int dim, std::size_t intervals, double dt, double horizon) {
  const Grid g = unit_box(dim, intervals);
  const auto u0 = TemperatureField::sample(g, 0.0, [dim](const Point& x) { return sine_product(x, dim); });
  return solve_dirichlet(OperatorCoefficients::laplacian(dim), u0, zero_boundary(), horizon, dt);
}

}  // namespace

TEST(Barrier, EqualsTemperatureAtTheVertex) {
  const HeatTrajectory u = discrete_caloric(2, 20, 0.0005, 0.01);
  const std::size_t level = 10;
  const Point xm{0.3, 0.6, 0};
  const BarrierParams p{xm, u[level].time(), 2};
  const HeatTrajectory v = barrier_field(u, p);
  const std::size_t cell = u.grid().flatten({6, 12, 0});
  ASSERT_NEAR(u.grid().center(cell)[0], 0.3, 1e-15);
  EXPECT_NEAR(v[level][cell], u[level][cell], 1e-15);
  EXPECT_EQ(p.constant(), 1.0 / 16.0);
}

TEST(Barrier, ZeroTemperatureGivesThePolynomial) {
  const Grid g = unit_box(3, 6);
  HeatTrajectory u(0.01);
  for (int n = 0; n < 3; ++n) u.push_back(TemperatureField(g, 0.01 * n, 0.0));
  const BarrierParams p{{0.5, 0.5, 0.5}, 0.02, 3};
  const HeatTrajectory v = barrier_field(u, p);
  for (std::size_t n = 0; n < v.size(); ++n) {
    for (std::size_t c = 0; c < g.size(); ++c) {
      const Point x = g.center(c);
      const double r2 = squared_distance(x, p.center, 3);
      EXPECT_DOUBLE_EQ(v[n][c], -(r2 + (0.02 - v[n].time())) / 24.0);
    }
  }
  // Re-evaluation is exact.
  const HeatTrajectory again = barrier_field(u, p);
  for (std::size_t n = 0; n < v.size(); ++n)
    for (std::size_t c = 0; c < g.size(); ++c) EXPECT_EQ(again[n][c], v[n][c]);
  EXPECT_THROW(barrier_field(u, {{0, 0, 0}, 0.5, 3}), InvalidInput);
  EXPECT_THROW(barrier_field(u, {{0, 0, 0}, 0.01, 2}), InvalidInput);
}

TEST(HeatResidual, QuadraticComponentIsExact) {
  for (int n = 1; n <= 3; ++n) {
    const Grid g = unit_box(n, 8);
    HeatTrajectory v(0.01);
    for (int k = 0; k < 3; ++k) {
      v.push_back(TemperatureField::sample(g, 0.01 * k, [n](const Point& x) {
        return -squared_norm(x, n) / (8.0 * n);
      }));
    }
    const ResidualRange r = residual_range(heat_residual_field(v));
    EXPECT_NEAR(r.min, -0.25, 1e-10);
    EXPECT_NEAR(r.max, -0.25, 1e-10);
  }
}

TEST(HeatResidual, CaloricFunctionIsConsistent) {
  // u = exp(-pi^2 t) sin(pi x): the residual is O(h^2 + dt).
  double prev = 0.0;
  for (std::size_t m : {20, 40, 80}) {
    const double h = 1.0 / static_cast<double>(m), dt = h * h / 4;
    const Grid g = unit_box(1, m);
    HeatTrajectory v(dt);
    for (int k = 0; k < 4; ++k) {
      const double t = 0.1 + dt * k;
      v.push_back(TemperatureField::sample(g, t, [t](const Point& x) {
        return std::exp(-kPi * kPi * t) * std::sin(kPi * x[0]);
      }));
    }
    const ResidualRange r = residual_range(heat_residual_field(v));
    const double sup = std::max(std::abs(r.min), std::abs(r.max));
    EXPECT_LE(sup, 10.0 * (h * h + dt) * kPi * kPi * kPi * kPi);
    if (prev > 0.0) {
      EXPECT_NEAR(prev / sup, 4.0, 0.3);
    }
    prev = sup;
  }
}

TEST(HeatResidual, BarrierOverDiscreteCaloricIsConstant) {
  // Delta(c |x|^2) = 2nc and d/dt(-c (t^m - t)) = c, so the residual is
  // 0 - 2nc - c = -(2n + 1)/(8n), exactly up to rounding on a discrete caloric u.
  for (int n = 1; n <= 3; ++n) {
    const double h = n == 3 ? 0.05 : 0.01;
    const double dt = h * h / (2.0 * n) * 0.5;
    const HeatTrajectory u = discrete_caloric(n, static_cast<std::size_t>(std::lround(1 / h)), dt, 10 * dt);
    const HeatTrajectory v = barrier_field(u, {{0.5, 0.5, 0.5}, u.back().time(), n});
    const ResidualRange r = residual_range(heat_residual_field(v));
    const double expected = -(2.0 * n + 1.0) / (8.0 * n);
    EXPECT_NEAR(r.min, expected, 1e-8) << n;
    EXPECT_NEAR(r.max, expected, 1e-8) << n;
    EXPECT_LT(r.max, 0.0);
  }
}

TEST(MaxPrinciple, DecayingSineAndConstant) {
  const HeatTrajectory u = discrete_caloric(1, 50, 0.0001, 0.05);
  const MaxPrincipleReport rep = max_principle_audit(u);
  EXPECT_TRUE(rep.attained_on_boundary);
  EXPECT_EQ(rep.level, 0u);
  EXPECT_NEAR(rep.max_value, 1.0, 1e-12);

  const Grid g = unit_box(2, 10);
  HeatTrajectory c(0.01);
  for (int n = 0; n < 4; ++n) c.push_back(TemperatureField(g, 0.01 * n, 3.0));
  EXPECT_TRUE(max_principle_audit(c).attained_on_boundary);
}

TEST(MaxPrinciple, DetectsInteriorMaximum) {
  const Grid g = unit_box(1, 10);
  HeatTrajectory u(0.1);
  u.push_back(TemperatureField(g, 0.0, 0.0));
  std::vector<double> bump(g.size(), 0.0);
  bump[5] = 1.0;
  u.push_back(TemperatureField(g, 0.1, bump));
  const MaxPrincipleReport rep = max_principle_audit(u);
  EXPECT_FALSE(rep.attained_on_boundary);
  EXPECT_EQ(rep.violation, 1.0);
  EXPECT_EQ(rep.level, 1u);
  EXPECT_EQ(rep.cell, 5u);
}

TEST(MaxPrinciple, RandomDirichletRunsUnderCfl) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::size_t violations = 0;
  for (int run = 0; run < 50; ++run) {
    const int dim = 1 + run % 2;
    const Grid g = unit_box(dim, 16);
    std::vector<double> init(g.size());
    for (double& x : init) x = u01(rng);
    const double a = u01(rng), b = u01(rng), w = 5 * u01(rng);
    const BoundaryData bc = [=](const Point& x, double t) {
      return a + b * std::sin(w * (x[0] + x[1]) + t) * std::sin(w * (x[0] + x[1]) + t);
    };
    const double h = g.spacing(0);
    const double dt = u01(rng) * h * h / (2.0 * dim);
    const HeatTrajectory traj = solve_dirichlet(OperatorCoefficients::laplacian(dim),
                                                TemperatureField(g, 0.0, init), bc, 40 * dt, dt);
    if (!max_principle_audit(traj).attained_on_boundary) ++violations;
  }
  EXPECT_EQ(violations, 0u);
}

TEST(ContinuityMetric, ExactTimeDerivativeAndZeroData) {
  const std::size_t m = 40;
  const double h = 1.0 / m, dt = h * h / 4, t0 = 0.05;
  const Grid g = unit_box(1, m);
  HeatTrajectory u(dt);
  for (int k = 0; k < 5; ++k) {
    const double t = t0 + k * dt;
    u.push_back(TemperatureField::sample(g, t, [t](const Point& x) {
      return std::exp(-kPi * kPi * t) * std::sin(kPi * x[0]);
    }));
  }
  const auto ut0 = TemperatureField::sample(g, t0, [t0](const Point& x) {
    return -kPi * kPi * std::exp(-kPi * kPi * t0) * std::sin(kPi * x[0]);
  });
  const CellMask all(g, true);
  for (const auto& [t, metric] : initial_continuity_metric(u, ut0, all)) {
    EXPECT_LE(metric, 10.0 * (h * h + (t - t0) + dt) * std::pow(kPi, 4));
  }

  HeatTrajectory zero(0.1);
  for (int k = 0; k < 3; ++k) zero.push_back(TemperatureField(g, 0.1 * k, 0.0));
  for (const auto& [t, metric] : initial_continuity_metric(zero, TemperatureField(g, 0, 0.0), all)) {
    EXPECT_EQ(metric, 0.0);
  }
  EXPECT_THROW(initial_continuity_metric(zero, TemperatureField(g, 0, 0.0), CellMask(g)),
               InvalidInput);
}

TEST(DeltaOfT, SupportInsideReference) {
  const Grid g = unit_box(1, 20);
  const CellMask ref = CellMask::from_predicate(g, [](const Point& x) { return x[0] < 0.5; });
  HeatTrajectory u(0.1);
  for (int k = 0; k < 3; ++k) {
    u.push_back(TemperatureField::sample(g, 0.1 * k, [](const Point& x) { return x[0] < 0.3 ? 1.0 : 0.0; }));
  }
  for (double d : delta_of_t(u, ref, {0.0, 0.1, 0.2})) EXPECT_EQ(d, 0.0);
  EXPECT_THROW(delta_of_t(u, CellMask(g), {0.0}), InvalidInput);
  EXPECT_THROW(delta_of_t(u, ref, {0.05}), InvalidInput);
}

TEST(DeltaOfT, SimilarityRunFollowsTheFront) {
  const SimilaritySolution sim(1.0);
  const double t0 = 0.25;
  StefanSpec1D spec;
  spec.b = sim.front(t0);
  spec.t0 = t0;
  spec.T = 0.5;
  spec.f = [](double) { return 1.0; };
  spec.phi = [&](double x) { return sim.temperature(x, t0); };
  spec.resolution.liquid_intervals = 100;
  spec.resolution.snapshots = 10;
  const Stefan1DResult run = solve_stefan(spec);
  const Grid g = Grid::nodal_line(0.0, 1.5, 300);
  const HeatTrajectory phys = to_physical(run, g);
  const CellMask reference = CellMask::from_predicate(g, [&](const Point& x) { return x[0] <= spec.b; });
  const auto deltas = delta_of_t(phys, reference, run.front.times);
  const double h = g.spacing(0);
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    const double expected = std::max(0.0, sim.front(run.front.times[k]) - spec.b);
    EXPECT_NEAR(deltas[k], expected, h) << k;
    EXPECT_GE(deltas[k], 0.0);
    EXPECT_LE(deltas[k], 1.5);
    if (k > 0) {
      EXPECT_GE(deltas[k], deltas[k - 1]);
    }
  }
}
