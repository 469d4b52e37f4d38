#include <cmath>
#include <numbers>

#include "gtest/gtest.h"
#include "stefan/similarity.hpp"
#include "stefan/stefan1d.hpp"

using namespace stefan;

namespace {

// Root of lambda e^{lambda^2} erf(lambda) = 1/sqrt(pi), 30-digit mpmath.findroot.
constexpr double kLambdaSt1 = 0.620062633313595495478;

StefanSpec1D similarity_spec(double t0, double T, std::size_t n, double cfl = 0.4) {
  const SimilaritySolution sim(1.0);
  StefanSpec1D spec;
  spec.k1 = 1.0;
  spec.b = sim.front(t0);
  spec.t0 = t0;
  spec.T = T;
  spec.f = [](double) { return 1.0; };
  spec.phi = [sim, t0](double x) { return sim.temperature(x, t0); };
  spec.resolution.liquid_intervals = n;
  spec.resolution.cfl = cfl;
  spec.resolution.snapshots = 10;
  return spec;
}

}  // namespace

TEST(Similarity, GoldenLambda) {
  const SimilaritySolution sim(1.0);
  EXPECT_NEAR(sim.lambda(), kLambdaSt1, 1e-12);
  EXPECT_LE(sim.residual(), 1e-12);
  EXPECT_NEAR(sim.front(1.0), 2.0 * kLambdaSt1, 1e-12);
}

TEST(Similarity, RootContract) {
  for (double st : {1e-6, 1e-3, 0.1, 0.5, 2.0, 5.0}) {
    const SimilaritySolution sim(st);
    EXPECT_LE(sim.residual(), 1e-12) << st;
    EXPECT_LE(std::abs(similarity_transcendental(sim.lambda()) - st / std::sqrt(std::numbers::pi)),
              1e-12);
  }
  EXPECT_LE(SimilaritySolution(1e-6).lambda(), 1e-3);
  EXPECT_THROW(SimilaritySolution(0.0), InvalidInput);
  EXPECT_THROW(SimilaritySolution(-1.0), InvalidInput);
  EXPECT_THROW(SimilaritySolution(1e300), InvalidInput);
}

TEST(Similarity, ProfileSatisfiesTheProblem) {
  const SimilaritySolution sim(1.0);
  const double t = 0.7, d = 1e-4;
  EXPECT_NEAR(sim.temperature(0.0, t), 1.0, 1e-15);
  EXPECT_NEAR(sim.temperature(sim.front(t) * (1 - 1e-15), t), 0.0, 1e-12);
  // s' = -St u_x(s)
  EXPECT_NEAR(sim.front_velocity(t), -sim.gradient(sim.front(t), t), 1e-12);
  const double x = 0.3;
  const double uxx =
      (sim.temperature(x + d, t) - 2 * sim.temperature(x, t) + sim.temperature(x - d, t)) / (d * d);
  const double ut = (sim.temperature(x, t + d) - sim.temperature(x, t - d)) / (2 * d);
  EXPECT_NEAR(uxx, ut, 1e-5);
  EXPECT_NEAR(sim.time_derivative(x, t), ut, 1e-6);
}

TEST(FrontGradient, ExactOnLinearAndQuadratic) {
  const double s = 0.8;
  const std::size_t n = 16;
  const double h = s / n;
  std::vector<double> lin(n + 1), quad(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    const double x = h * static_cast<double>(i);
    lin[i] = s - x;
    quad[i] = (s - x) * (s - x);
  }
  EXPECT_NEAR(gradient_at_right_end(lin, h), -1.0, 1e-12);
  EXPECT_NEAR(gradient_at_right_end(quad, h), 0.0, 1e-12);
  std::vector<double> rev(lin.rbegin(), lin.rend());
  EXPECT_NEAR(gradient_at_left_end(rev, h), 1.0, 1e-12);
  EXPECT_THROW(gradient_at_right_end(std::vector<double>{1, 0.5, 0}, h), InvalidInput);
}

TEST(FrontGradient, SimilarityProfile) {
  const SimilaritySolution sim(1.0);
  const double t = 1.0, s = sim.front(t), h = 1e-3;
  const auto n = static_cast<std::size_t>(std::ceil(s / h));
  std::vector<double> u(n + 1);
  const double hh = s / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) u[i] = sim.temperature(hh * static_cast<double>(i), t);
  u[n] = 0.0;
  EXPECT_NEAR(gradient_at_right_end(u, hh), sim.gradient(s, t), 1e-4);
}

TEST(StepStefan, NothingMelts) {
  StefanSpec1D spec;
  spec.resolution.liquid_intervals = 20;
  const Stefan1DState st = initial_state(spec);
  const Stefan1DState next = step_stefan(spec, st, 1e-4);
  EXPECT_EQ(next.front, spec.b);
  for (double u : next.liquid) EXPECT_EQ(u, 0.0);
}

TEST(StepStefan, VelocityLawOnLinearProfile) {
  StefanSpec1D spec;
  spec.k1 = 0.7;
  spec.b = 0.5;
  const double g = 3.0;
  spec.f = [&](double) { return g * spec.b; };
  spec.phi = [&](double x) { return g * (spec.b - x); };
  spec.resolution.liquid_intervals = 25;
  const Stefan1DState st = initial_state(spec);
  const double dt = 1e-5;
  const Stefan1DState next = step_stefan(spec, st, dt);
  EXPECT_NEAR(front_velocity(spec, st), spec.k1 * g, 1e-12);
  EXPECT_NEAR(next.front - st.front, dt * spec.k1 * g, 1e-12);
  EXPECT_EQ(next.liquid.back(), 0.0);
  EXPECT_EQ(next.liquid.front(), g * spec.b);
}

TEST(StepStefan, SimilarityOneStep) {
  const double t0 = 0.25, dt = 1e-5;
  StefanSpec1D spec = similarity_spec(t0, 1.0, 100);
  const Stefan1DState next = step_stefan(spec, initial_state(spec), dt);
  EXPECT_NEAR(next.front, 2.0 * kLambdaSt1 * std::sqrt(t0 + dt), 1e-7);
}

TEST(StepStefan, RejectsUnstableStepAndLostFront) {
  StefanSpec1D spec = similarity_spec(0.25, 1.0, 100);
  const Stefan1DState st = initial_state(spec);
  const double limit = stefan_step_limit(spec, st);
  EXPECT_THROW(step_stefan(spec, st, 2.0 * limit), StabilityViolation);

  StefanSpec1D freeze;
  freeze.k1 = 1e4;
  freeze.b = 0.01;
  freeze.resolution.liquid_intervals = 3;
  freeze.resolution.solid_intervals = 3;
  SolidPhase solid;
  solid.length = 1.0;
  solid.psi = [](double x) { return -(x - 0.01); };
  solid.g = [](double) { return -0.99; };
  freeze.solid = solid;
  EXPECT_THROW(step_stefan(freeze, initial_state(freeze), 4e-6), NumericalFailure);
}

TEST(StepStefan, TwoPhaseGradientJump) {
  StefanSpec1D spec;
  spec.k1 = 0.5;
  spec.b = 0.4;
  const double a = 2.0, c = 0.5;
  spec.f = [&](double) { return a * spec.b; };
  spec.phi = [&](double x) { return a * (spec.b - x); };
  SolidPhase solid;
  solid.length = 1.0;
  solid.psi = [&](double x) { return -c * (x - spec.b); };
  solid.g = [&](double) { return -c * (1.0 - spec.b); };
  spec.solid = solid;
  spec.resolution.liquid_intervals = 20;
  spec.resolution.solid_intervals = 30;
  const Stefan1DState st = initial_state(spec);
  const FrontGradient grad = front_gradient(spec, st);
  EXPECT_NEAR(grad.liquid, -a, 1e-12);
  ASSERT_TRUE(grad.solid.has_value());
  EXPECT_NEAR(*grad.solid, -c, 1e-12);
  EXPECT_NEAR(front_velocity(spec, st), spec.k1 * (a - c), 1e-12);
}

TEST(SolveStefan, EmptyPhysics) {
  StefanSpec1D spec;
  spec.resolution.liquid_intervals = 20;
  spec.resolution.snapshots = 5;
  const Stefan1DResult r = solve_stefan(spec);
  EXPECT_EQ(r.front.size(), 6u);
  for (double s : r.front.positions) EXPECT_EQ(s, spec.b);
  for (const auto& snap : r.liquid)
    for (double u : snap.values()) EXPECT_EQ(u, 0.0);
  EXPECT_EQ(r.diagnostics.ut_violations, 0u);
  EXPECT_EQ(r.diagnostics.max_principle_violations, 0u);
}

TEST(SolveStefan, TracksSimilarityFront) {
  const SimilaritySolution sim(1.0);
  const Stefan1DResult r = solve_stefan(similarity_spec(0.25, 1.0, 200));
  EXPECT_NEAR(r.front.times.back(), 1.0, 1e-12);
  const double rel = std::abs(r.front.positions.back() - sim.front(1.0)) / sim.front(1.0);
  EXPECT_LE(rel, 0.01);
  for (std::size_t k = 0; k < r.front.size(); ++k) {
    EXPECT_NEAR(r.front.positions[k], sim.front(r.front.times[k]), 1e-3 * sim.front(1.0));
  }
  EXPECT_GE(r.diagnostics.min_front_increment, -1e-12);
  EXPECT_EQ(r.diagnostics.max_principle_violations, 0u);
  EXPECT_EQ(r.diagnostics.ut_violations, 0u);
  for (const auto& snap : r.liquid)
    for (double u : snap.values()) EXPECT_GE(u, 0.0);
}

TEST(SolveStefan, RefinementShrinksFrontError) {
  const SimilaritySolution sim(1.0);
  double prev = 0.0;
  for (std::size_t n : {25, 50, 100}) {
    const Stefan1DResult r = solve_stefan(similarity_spec(0.25, 0.5, n));
    const double err = std::abs(r.front.positions.back() - sim.front(0.5));
    if (prev > 0.0) {
      EXPECT_GE(prev / err, 1.8) << n;
    }
    prev = err;
  }
}

TEST(SolveStefan, DegenerateStartWarmsUp) {
  StefanSpec1D spec;
  spec.b = 0.2;
  spec.T = 0.05;
  spec.f = [](double) { return 1.0; };
  spec.resolution.liquid_intervals = 40;
  spec.resolution.snapshots = 10;
  const Stefan1DResult r = solve_stefan(spec);
  EXPECT_TRUE(r.diagnostics.warm_start);
  EXPECT_GT(r.front.positions.back(), spec.b);
  EXPECT_GE(r.diagnostics.min_front_increment, -1e-12);
  EXPECT_EQ(r.diagnostics.max_principle_violations, 0u);
  for (std::size_t k = 1; k < r.front.size(); ++k) {
    EXPECT_NEAR(r.front.times[k] - r.front.times[k - 1], r.liquid.dt(), 1e-12);
  }
}

TEST(SolveStefan, TwoPhaseWithInertSolidMatchesOnePhase) {
  StefanSpec1D one = similarity_spec(0.25, 0.4, 50);
  StefanSpec1D two = one;
  two.solid = SolidPhase{1.0, 3.0, [](double) { return 0.0; }, [](double) { return 0.0; }};
  two.resolution.solid_intervals = 20;
  two.resolution.dt = solve_stefan(one).diagnostics.dt;
  const Stefan1DResult a = solve_stefan(one), b = solve_stefan(two);
  ASSERT_EQ(a.front.size(), b.front.size());
  for (std::size_t k = 0; k < a.front.size(); ++k) EXPECT_EQ(a.front.positions[k], b.front.positions[k]);
}

TEST(SolveStefan, ColdSolidSlowsMelting) {
  StefanSpec1D one = similarity_spec(0.25, 0.4, 50);
  StefanSpec1D two = one;
  const double b = one.b;
  two.solid = SolidPhase{1.0, 2.0, [b](double x) { return -0.5 * (x - b) / (2.0 - b); },
                         [](double) { return -0.5; }};
  two.resolution.dt = solve_stefan(one).diagnostics.dt;
  const Stefan1DResult a = solve_stefan(one), c = solve_stefan(two);
  EXPECT_LT(c.front.positions.back(), a.front.positions.back());
  EXPECT_EQ(c.diagnostics.max_principle_violations, 0u);
  for (const auto& snap : c.solid)
    for (double w : snap.values()) EXPECT_LE(w, 0.0);
}

TEST(SolveStefan, RejectsInvalidSpecs) {
  StefanSpec1D spec;
  spec.b = -1.0;
  EXPECT_THROW(solve_stefan(spec), InvalidInput);
  spec.b = 1.0;
  spec.phi = [](double) { return 1.0; };
  EXPECT_THROW(solve_stefan(spec), InvalidInput);
  spec.phi = [](double x) { return 1.0 - x; };
  spec.f = [](double) { return -1.0; };
  EXPECT_THROW(solve_stefan(spec), InvalidInput);
  spec.f = [](double) { return 1.0; };
  spec.resolution.liquid_intervals = 2;
  EXPECT_THROW(solve_stefan(spec), InvalidInput);
}

TEST(SolveStefan, PhysicalResampling) {
  const SimilaritySolution sim(1.0);
  const Stefan1DResult r = solve_stefan(similarity_spec(0.25, 0.5, 100));
  const Grid g = Grid::nodal_line(0.0, 1.5, 150);
  const HeatTrajectory phys = to_physical(r, g);
  ASSERT_EQ(phys.size(), r.liquid.size());
  const TemperatureField& last = phys.back();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.coordinate(0, i);
    EXPECT_NEAR(last[i], sim.temperature(x, 0.5), 5e-3) << x;
  }
}
