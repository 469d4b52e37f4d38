#pragma once

// Caloric replacement on discrete parabolic cylinders and the radial average
//   w_R(x0, t0) = (1/R) \int_R^{2R} z_rho(x0, t0) d rho,
// where z_rho is the caloric function matching w on the parabolic boundary of C_rho.
// The replacement is computed by a direct explicit heat solve on the cylinder.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "stefan/error.hpp"
#include "stefan/grid.hpp"
#include "stefan/heat.hpp"

namespace stefan {

using SpaceTimeFunction = std::function<double(const Point& x, double t)>;

/// Cell-level discretization of the spatial ball B_rho(x0) on a grid.
struct BallMask {
  CellMask inside;   // |x - x0| < rho
  CellMask lateral;  // inside cells with a face neighbour outside the ball
};

inline BallMask discretize_ball(const Grid& g, const Point& center, double radius) {
  const double r2 = radius * radius;
  BallMask ball{CellMask::from_predicate(
                    g, [&](const Point& x) { return squared_distance(x, center, g.dim()) < r2; }),
                CellMask(g)};
  for (std::size_t c = 0; c < g.size(); ++c) {
    if (!ball.inside.test(c)) continue;
    const Index idx = g.unflatten(c);
    if (g.is_boundary(idx)) {
      ball.lateral.set(c);
      continue;
    }
    for (int a = 0; a < g.dim(); ++a) {
      const std::size_t s = g.stride(a);
      if (!ball.inside.test(c + s) || !ball.inside.test(c - s)) {
        ball.lateral.set(c);
        break;
      }
    }
  }
  return ball;
}

/// Sampling resolution for cylinder solves.
struct CylinderResolution {
  double spacing = 0.05;
  /// Fraction of the explicit stability limit h^2 / (2n) used for the time step.
  double stability_fraction = 0.5;
};

/// Samples w on a grid around the cylinder whose cell centers include x0 exactly, over
/// time levels t0 - rho^2 = t_0 < ... < t_N = t0.
inline HeatTrajectory sample_cylinder(const SpaceTimeFunction& w, const ParabolicCylinder& cyl,
                                      int dim, const CylinderResolution& res) {
  const double h = res.spacing;
  if (!(h > 0.0)) throw InvalidInput("cylinder sampling spacing must be positive");
  const auto half = static_cast<std::size_t>(std::ceil(cyl.radius / h)) + 1;
  Point lo{}, hi{};
  Index intervals{1, 1, 1};
  for (int a = 0; a < dim; ++a) {
    lo[a] = cyl.center[a] - static_cast<double>(half) * h;
    hi[a] = cyl.center[a] + static_cast<double>(half) * h;
    intervals[a] = 2 * half;
  }
  const Grid grid = Grid::nodal(dim, lo, hi, intervals);
  const double dt_max = res.stability_fraction * h * h / (2.0 * dim);
  const double span = cyl.radius * cyl.radius;
  const auto steps = static_cast<std::size_t>(std::ceil(span / dt_max));
  const double dt = span / static_cast<double>(steps);
  const double t_bottom = cyl.bottom_time();
  if (t_bottom < 0.0) throw InvalidInput("cylinder extends below t = 0");
  HeatTrajectory traj(dt);
  for (std::size_t n = 0; n <= steps; ++n) {
    const double t = (n == steps) ? cyl.top_time : t_bottom + static_cast<double>(n) * dt;
    traj.push_back(TemperatureField::sample(grid, t, [&](const Point& x) { return w(x, t); }));
  }
  return traj;
}

/// Caloric function z on the discrete cylinder with z = w on its discrete parabolic
/// boundary (first time level and lateral cells). Cells outside the ball carry w.
inline HeatTrajectory caloric_replacement(const HeatTrajectory& w, const ParabolicCylinder& cyl) {
  if (w.size() < 2) throw InvalidInput("caloric_replacement needs at least two time levels");
  const Grid& g = w.grid();
  const int n = g.dim();
  for (int a = 0; a < n; ++a) {
    if (2.0 * cyl.radius / g.spacing(a) < 4.0) {
      throw InvalidInput("cylinder of radius " + format_real(cyl.radius) +
                         " is not resolved by 4 cells across on axis " + std::to_string(a));
    }
  }
  const double scale = std::max(1.0, std::abs(cyl.top_time));
  if (std::abs(w.front().time() - cyl.bottom_time()) > 1e-9 * scale ||
      std::abs(w.back().time() - cyl.top_time) > 1e-9 * scale) {
    throw InvalidInput("samples do not span the cylinder's time slab");
  }
  const BallMask ball = discretize_ball(g, cyl.center, cyl.radius);
  double limit = 0.0;
  {
    double inv = 0.0;
    for (int a = 0; a < n; ++a) inv += 2.0 / (g.spacing(a) * g.spacing(a));
    limit = 1.0 / inv;
  }
  detail::check_step(w.dt(), limit);

  std::vector<double> inv_h2(n);
  for (int a = 0; a < n; ++a) inv_h2[a] = 1.0 / (g.spacing(a) * g.spacing(a));

  HeatTrajectory z(w.dt());
  z.push_back(w.front());
  std::vector<double> next(g.size());
  for (std::size_t level = 1; level < w.size(); ++level) {
    const auto prev = z.back().values();
    const auto data = w[level].values();
    for (std::size_t c = 0; c < g.size(); ++c) {
      if (!ball.inside.test(c) || ball.lateral.test(c)) {
        next[c] = data[c];
        continue;
      }
      double lap = 0.0;
      for (int a = 0; a < n; ++a) {
        const std::size_t s = g.stride(a);
        lap += (prev[c + s] - 2.0 * prev[c] + prev[c - s]) * inv_h2[a];
      }
      next[c] = prev[c] + w.dt() * lap;
    }
    z.push_back(TemperatureField(g, w[level].time(), next));
  }
  return z;
}

enum class Ordering { replacement_above, replacement_below, equal, mixed };

inline std::string to_string(Ordering o) {
  switch (o) {
    case Ordering::replacement_above: return "z >= w";
    case Ordering::replacement_below: return "z <= w";
    case Ordering::equal: return "z == w";
    case Ordering::mixed: return "mixed";
  }
  return "unknown";
}

/// Extremes of z - w over the open cylinder (interior ball cells, levels after the first).
struct ReplacementComparison {
  double min_difference = 0.0;
  double max_difference = 0.0;
  Ordering ordering = Ordering::equal;
};

inline ReplacementComparison compare_replacement(const HeatTrajectory& z, const HeatTrajectory& w,
                                                 const ParabolicCylinder& cyl,
                                                 double tolerance = 1e-12) {
  const Grid& g = w.grid();
  const BallMask ball = discretize_ball(g, cyl.center, cyl.radius);
  ReplacementComparison out;
  bool first = true;
  for (std::size_t level = 1; level < w.size(); ++level) {
    for (std::size_t c = 0; c < g.size(); ++c) {
      if (!ball.inside.test(c) || ball.lateral.test(c)) continue;
      const double d = z[level][c] - w[level][c];
      if (first) {
        out.min_difference = out.max_difference = d;
        first = false;
      }
      out.min_difference = std::min(out.min_difference, d);
      out.max_difference = std::max(out.max_difference, d);
    }
  }
  const bool above = out.min_difference >= -tolerance;
  const bool below = out.max_difference <= tolerance;
  if (above && below) {
    out.ordering = Ordering::equal;
  } else if (above) {
    out.ordering = Ordering::replacement_above;
  } else if (below) {
    out.ordering = Ordering::replacement_below;
  } else {
    out.ordering = Ordering::mixed;
  }
  return out;
}

/// Spatial box and earliest time on which a space-time function may be evaluated.
struct SpaceTimeDomain {
  int dim = 1;
  Point lower{};
  Point upper{};
  double t_min = 0.0;

  bool contains(const ParabolicCylinder& cyl) const {
    if (cyl.bottom_time() < t_min - 1e-12) return false;
    for (int a = 0; a < dim; ++a) {
      if (cyl.center[a] - cyl.radius < lower[a] - 1e-12) return false;
      if (cyl.center[a] + cyl.radius > upper[a] + 1e-12) return false;
    }
    return true;
  }
};

/// Value z_rho(x0, t0) of the caloric replacement on C_rho(x0, t0).
inline double replacement_at_center(const SpaceTimeFunction& w, const ParabolicCylinder& cyl,
                                    int dim, const CylinderResolution& res) {
  const HeatTrajectory samples = sample_cylinder(w, cyl, dim, res);
  const HeatTrajectory z = caloric_replacement(samples, cyl);
  const Grid& g = z.grid();
  Index mid{0, 0, 0};
  for (int a = 0; a < dim; ++a) mid[a] = (g.count(a) - 1) / 2;
  return z.back().at(mid);
}

/// w_R(x0, t0) = (1/R) \int_R^{2R} z_rho(x0, t0) d rho with an m-point trapezoid in rho.
inline double radial_average(const SpaceTimeFunction& w, const SpaceTimeDomain& domain,
                             const Point& x0, double t0, double radius, std::size_t m,
                             const CylinderResolution& res = {}) {
  if (!(radius > 0.0)) throw InvalidInput("radial_average: R must be positive");
  if (m < 2) throw InvalidInput("radial_average: need at least 2 quadrature radii");
  if (!domain.contains(ParabolicCylinder(x0, t0, 2.0 * radius))) {
    throw InvalidInput("radial_average: cylinder C_2R does not fit in the domain of w");
  }
  const double step = radius / static_cast<double>(m - 1);
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double rho = radius + static_cast<double>(i) * step;
    const double weight = (i == 0 || i + 1 == m) ? 0.5 : 1.0;
    sum += weight * replacement_at_center(w, ParabolicCylinder(x0, t0, rho), domain.dim, res);
  }
  return sum * step / radius;
}

}  // namespace stefan
