#include <cmath>
#include <random>

#include "gtest/gtest.h"
#include "stefan/field_io.hpp"
#include "stefan/similarity.hpp"
#include "stefan/stefan1d.hpp"
#include "stefan/stefan3d.hpp"

using namespace stefan;

namespace {

Grid surface_grid(std::size_t n, double len = 1.0) {
  return Grid::nodal(2, {0, 0, 0}, {len, len, 0}, {n, n, 1});
}

std::vector<double> sample_surface(const Grid& g, const SurfaceFunction& fn) {
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < g.count(0); ++i)
    for (std::size_t j = 0; j < g.count(1); ++j)
      v[i * g.count(1) + j] = fn(g.coordinate(0, i), g.coordinate(1, j));
  return v;
}

StefanSpec3D linear_spec(double k1, double c, const SurfaceFunction& rho) {
  StefanSpec3D spec;
  spec.k1 = k1;
  spec.extent = {1.0, 1.0, 1.0};
  spec.intervals = {10, 10, 40};
  spec.rho0 = rho;
  spec.u0 = [c, rho](const Point& p) { return std::max(0.0, c * (rho(p[0], p[1]) - p[2])); };
  spec.f = [c, rho](double) { return c * rho(0.0, 0.0); };
  return spec;
}

StefanSpec3D bump_spec() {
  StefanSpec3D spec;
  spec.extent = {1, 1, 1};
  spec.intervals = {20, 20, 50};
  spec.f = [](double) { return 1.0; };
  spec.rho0 = [](double x, double y) {
    return 0.5 + 0.05 * std::exp(-((x - 0.5) * (x - 0.5) + (y - 0.5) * (y - 0.5)) / 0.02);
  };
  spec.u0 = [rho = spec.rho0](const Point& p) { return 1.0 - p[2] / rho(p[0], p[1]); };
  spec.dt = 5e-5;
  spec.T = 50 * 5e-5;
  spec.snapshots = 5;
  return spec;
}

}  // namespace

TEST(FrontNormals, ConstantAndSlopedFronts) {
  const Grid g = surface_grid(8);
  for (const auto& n : front_normals(g, std::vector<double>(g.size(), 0.3))) {
    EXPECT_EQ(n[0], 0.0);
    EXPECT_EQ(n[1], 0.0);
    EXPECT_EQ(n[2], 1.0);
  }
  const auto sloped = sample_surface(g, [](double x, double) { return x; });
  const double r = 1.0 / std::sqrt(2.0);
  for (const auto& n : front_normals(g, sloped)) {
    EXPECT_NEAR(n[0], -r, 1e-12);
    EXPECT_NEAR(n[1], 0.0, 1e-12);
    EXPECT_NEAR(n[2], r, 1e-12);
  }
}

TEST(FrontNormals, UnitLengthOnRandomSmoothFronts) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Grid g = surface_grid(16);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = u(rng), b = u(rng), c = 3 * u(rng), d = 3 * u(rng);
    const auto rho = sample_surface(g, [&](double x, double y) {
      return 0.5 + a * std::sin(c * x) * std::cos(d * y) + b * x * y;
    });
    for (const auto& n : front_normals(g, rho)) {
      EXPECT_NEAR(std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]), 1.0, 1e-12);
    }
  }
}

TEST(NormalVelocity, LinearProfiles) {
  const double k1 = 0.8, c = 2.0;
  const Stefan3DState flat =
      initial_state_3d(linear_spec(k1, c, [](double, double) { return 0.6; }));
  for (double v : normal_velocity(flat, k1)) EXPECT_NEAR(v, k1 * c, 1e-12);

  StefanSpec3D zero;
  zero.rho0 = [](double, double) { return 0.6; };
  for (double v : normal_velocity(initial_state_3d(zero), 1.0)) EXPECT_EQ(v, 0.0);

  // rho = 0.4 + alpha x, u = c (rho - z): u_x = c alpha, u_z = -c, so
  // V_n = -k1 (c alpha (-alpha) + (-c)) / sqrt(1 + alpha^2) = k1 c sqrt(1 + alpha^2).
  const double alpha = 0.3;
  const Stefan3DState tilted =
      initial_state_3d(linear_spec(k1, c, [alpha](double x, double) { return 0.4 + alpha * x; }));
  const auto grad = front_temperature_gradient(tilted);
  const auto vn = normal_velocity(tilted, k1);
  for (std::size_t col = 0; col < vn.size(); ++col) {
    EXPECT_NEAR(grad[col][0], c * alpha, 1e-10);
    EXPECT_NEAR(grad[col][1], 0.0, 1e-10);
    EXPECT_NEAR(grad[col][2], -c, 1e-10);
    EXPECT_NEAR(vn[col], k1 * c * std::sqrt(1 + alpha * alpha), 1e-10);
  }
}

TEST(NormalVelocity, RejectsThinLiquidLayer) {
  StefanSpec3D spec;
  spec.intervals = {4, 4, 40};
  spec.rho0 = [](double, double) { return 0.5; };
  Stefan3DState s = initial_state_3d(spec);
  s.top[3] = 1;
  EXPECT_THROW(normal_velocity(s, 1.0), InvalidInput);
  spec.rho0 = [](double, double) { return 0.03; };
  EXPECT_THROW(initial_state_3d(spec), NumericalFailure);
}

TEST(EvolveFront, ExactCases) {
  const double dt = 1e-4;
  StefanSpec3D zero;
  zero.rho0 = [](double x, double y) { return 0.5 + 0.1 * x * y; };
  const Stefan3DState z = initial_state_3d(zero);
  const FrontUpdate same = evolve_front(z, 1.0, dt);
  for (std::size_t c = 0; c < same.rho.size(); ++c) EXPECT_EQ(same.rho[c], z.rho[c]);

  const double k1 = 1.5, cc = 0.7;
  const Stefan3DState flat =
      initial_state_3d(linear_spec(k1, cc, [](double, double) { return 0.55; }));
  const FrontUpdate up = evolve_front(flat, k1, dt);
  for (double r : up.rho) EXPECT_NEAR(r, 0.55 + dt * k1 * cc, 1e-12);

  const Stefan3DState tilted =
      initial_state_3d(linear_spec(k1, cc, [](double x, double y) { return 0.4 + 0.2 * x - 0.1 * y; }));
  EXPECT_LE(evolve_front(tilted, k1, dt).consistency, 1e-10);
}

TEST(EvolveFront, FatalWhenFrontLeavesBox) {
  StefanSpec3D spec = linear_spec(1.0, 1.0, [](double, double) { return 0.95; });
  const Stefan3DState s = initial_state_3d(spec);
  EXPECT_THROW(evolve_front(s, 1.0, 0.1), NumericalFailure);
}

TEST(CoupledStep, StationaryWithoutHeat) {
  StefanSpec3D spec;
  spec.rho0 = [](double, double) { return 0.5; };
  spec.T = 0.01;
  const Stefan3DResult r = solve_stefan3d(spec);
  for (const auto& front : r.fronts)
    for (double h : front.values()) EXPECT_EQ(h, 0.5);
  for (double v : r.final_state.u) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(r.diagnostics.min_front_increment, 0.0);
}

TEST(CoupledStep, RejectsUnstableOrTooFastSteps) {
  StefanSpec3D spec = linear_spec(1.0, 1.0, [](double, double) { return 0.5; });
  const Stefan3DState s = initial_state_3d(spec);
  EXPECT_THROW(coupled_step_3d(spec, s, 2.0 * stefan3d_step_limit(s)), StabilityViolation);
  spec.k1 = 1e4;
  EXPECT_THROW(coupled_step_3d(spec, s, 0.5 * stefan3d_step_limit(s)), NumericalFailure);
}

TEST(CoupledStep, FlatFrontReducesToOneDimension) {
  const SimilaritySolution sim(1.0);
  const double t0 = 0.25;
  StefanSpec1D one;
  one.b = sim.front(t0);
  one.t0 = t0;
  one.f = [](double) { return 1.0; };
  one.phi = [&](double x) { return sim.temperature(x, t0); };
  one.resolution.liquid_intervals = 200;

  StefanSpec3D three;
  three.extent = {0.3, 0.3, 1.5};
  three.intervals = {3, 3, 75};
  three.t0 = t0;
  three.T = 1.0;
  three.f = [](double) { return 1.0; };
  three.rho0 = [&](double, double) { return sim.front(t0); };
  three.u0 = [&](const Point& p) { return sim.temperature(p[2], t0); };

  // 100 steps, both solvers sampled at the same times.
  const Stefan3DState s0 = initial_state_3d(three);
  const double dt = 0.9 * stefan3d_step_limit(s0);
  three.dt = dt;
  three.T = t0 + 100 * dt;
  three.snapshots = 100;
  one.T = three.T;
  one.resolution.snapshots = 100;
  const Stefan1DResult r1 = solve_stefan(one);
  const Stefan3DResult r3 = solve_stefan3d(three);
  ASSERT_EQ(r3.fronts.size(), r1.front.size());
  for (std::size_t k = 0; k < r3.fronts.size(); ++k) {
    EXPECT_NEAR(r3.fronts[k].time(), r1.front.times[k], 1e-12);
    for (double h : r3.fronts[k].values()) {
      EXPECT_NEAR(h, r1.front.positions[k], 1e-3 * r1.front.positions[k]);
    }
  }
  EXPECT_LE(r3.diagnostics.max_consistency, 1e-10);
  EXPECT_GE(r3.diagnostics.min_front_increment, -1e-12);
}

TEST(CoupledStep, BumpFlattensAndMatchesRecordedFront) {
  const Stefan3DResult r = solve_stefan3d(bump_spec());
  EXPECT_EQ(r.diagnostics.steps, 50u);
  EXPECT_TRUE(r.diagnostics.lipschitz_non_increasing);
  EXPECT_LT(r.diagnostics.lipschitz.back(), r.diagnostics.lipschitz.front());
  EXPECT_LE(r.diagnostics.max_consistency, 1e-10);
  EXPECT_GE(r.diagnostics.min_front_increment, -1e-12);
  EXPECT_EQ(r.diagnostics.negative_node_steps, 0u);
  for (double h : r.fronts.back().values()) {
    EXPECT_TRUE(std::isfinite(h));
    EXPECT_GT(h, 0.0);
    EXPECT_LT(h, 1.0);
  }
  const TemperatureField golden =
      read_field_csv(std::string(STEFAN_TEST_DATA_DIR) + "/golden/bump_front.csv");
  ASSERT_EQ(golden.values().size(), r.fronts.back().values().size());
  EXPECT_NEAR(golden.time(), r.fronts.back().time(), 1e-15);
  for (std::size_t c = 0; c < golden.values().size(); ++c) {
    EXPECT_NEAR(golden[c], r.fronts.back()[c], 1e-12);
  }
}
