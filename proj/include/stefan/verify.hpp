#pragma once

// Diagnostics from the regularity argument for the Stefan problem: the barrier
// v^m = u - (|x - x^m|^2 + (t^m - t)) / 8n and its heat residual, maximum-principle
// audits, the initial-continuity metric \int |u_t - h| dx, and the front spread
// delta(t) of the positivity set around a reference set G.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "stefan/error.hpp"
#include "stefan/format.hpp"
#include "stefan/grid.hpp"
#include "stefan/heat.hpp"

namespace stefan {

struct BarrierParams {
  Point center{};
  double time = 0.0;
  int dim = 1;

  double constant() const { return 1.0 / (8.0 * dim); }
};

inline double barrier_value(double u, const Point& x, double t, const BarrierParams& p) {
  return u - p.constant() * (squared_distance(x, p.center, p.dim) + (p.time - t));
}

/// v^m sampled on the trajectory's grid and times.
inline HeatTrajectory barrier_field(const HeatTrajectory& u, const BarrierParams& p) {
  if (u.empty()) throw InvalidInput("barrier_field: empty trajectory");
  if (p.dim != u.grid().dim()) throw InvalidInput("barrier_field: dimension mismatch");
  const double slack = 1e-9 * std::max(1.0, std::abs(p.time));
  if (p.time < u.front().time() - slack || p.time > u.back().time() + slack) {
    throw InvalidInput("barrier time t^m = " + format_real(p.time) +
                       " lies outside the trajectory");
  }
  HeatTrajectory v(u.dt());
  const Grid& g = u.grid();
  for (const auto& snap : u) {
    std::vector<double> out(g.size());
    for (std::size_t c = 0; c < g.size(); ++c) {
      out[c] = barrier_value(snap[c], g.center(c), snap.time(), p);
    }
    v.push_back(TemperatureField(g, snap.time(), std::move(out)));
  }
  return v;
}

/// Delta_h v^n - (v^{n+1} - v^n) / dt on interior cells, for n = 0 .. N-2.
inline std::vector<MaskedField> heat_residual_field(const HeatTrajectory& v) {
  if (v.size() < 2) throw InvalidInput("heat_residual_field needs at least 2 time levels");
  std::vector<MaskedField> out;
  const double dt = v.dt();
  for (std::size_t n = 0; n + 1 < v.size(); ++n) {
    MaskedField lap = discrete_laplacian(v[n]);
    std::vector<double> r(v.grid().size(), 0.0);
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (lap.is_valid(c)) r[c] = lap.field[c] - (v[n + 1][c] - v[n][c]) / dt;
    }
    out.push_back({TemperatureField(v.grid(), v[n].time(), std::move(r)), lap.valid});
  }
  return out;
}

/// Extremes of a residual sequence over valid cells.
struct ResidualRange {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

inline ResidualRange residual_range(const std::vector<MaskedField>& r) {
  ResidualRange out{std::numeric_limits<double>::infinity(),
                    -std::numeric_limits<double>::infinity(), 0.0};
  std::size_t count = 0;
  for (const auto& level : r) {
    for (std::size_t c = 0; c < level.valid.size(); ++c) {
      if (!level.is_valid(c)) continue;
      out.min = std::min(out.min, level.field[c]);
      out.max = std::max(out.max, level.field[c]);
      out.mean += level.field[c];
      ++count;
    }
  }
  if (count == 0) throw InvalidInput("residual has no interior cells");
  out.mean /= static_cast<double>(count);
  return out;
}

struct MaxPrincipleReport {
  double max_value = 0.0;
  std::size_t level = 0;
  std::size_t cell = 0;
  /// max over the open region (interior cells after the first level) minus the max over
  /// the parabolic boundary, clipped at 0.
  double violation = 0.0;
  double tolerance = 0.0;
  bool attained_on_boundary = true;
};

/// Cells of `region` on its lateral boundary: grid boundary cells or cells with a face
/// neighbour outside the region.
inline CellMask lateral_boundary(const CellMask& region) {
  const Grid& g = region.grid();
  CellMask out(g);
  for (std::size_t c = 0; c < g.size(); ++c) {
    if (!region.test(c)) continue;
    const Index idx = g.unflatten(c);
    bool edge = g.is_boundary(idx);
    for (int a = 0; a < g.dim() && !edge; ++a) {
      const std::size_t s = g.stride(a);
      edge = !region.test(c + s) || !region.test(c - s);
    }
    if (edge) out.set(c);
  }
  return out;
}

/// Checks that the space-time maximum over `region` is attained on the parabolic boundary
/// (first level together with the lateral boundary), up to 1e-12 * scale.
inline MaxPrincipleReport max_principle_audit(const HeatTrajectory& traj,
                                              const std::optional<CellMask>& region = {}) {
  if (traj.empty()) throw InvalidInput("max_principle_audit: empty trajectory");
  const Grid& g = traj.grid();
  const CellMask inside = region ? *region : CellMask(g, true);
  if (inside.empty()) throw InvalidInput("max_principle_audit: empty region");
  const CellMask lateral = lateral_boundary(inside);
  double boundary_max = -std::numeric_limits<double>::infinity();
  double interior_max = -std::numeric_limits<double>::infinity();
  double scale = 0.0;
  MaxPrincipleReport rep;
  rep.max_value = -std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n < traj.size(); ++n) {
    for (std::size_t c = 0; c < g.size(); ++c) {
      if (!inside.test(c)) continue;
      const double v = traj[n][c];
      scale = std::max(scale, std::abs(v));
      if (v > rep.max_value) {
        rep.max_value = v;
        rep.level = n;
        rep.cell = c;
      }
      if (n == 0 || lateral.test(c)) {
        boundary_max = std::max(boundary_max, v);
      } else {
        interior_max = std::max(interior_max, v);
      }
    }
  }
  rep.tolerance = 1e-12 * std::max(1.0, scale);
  rep.violation = std::max(0.0, interior_max - boundary_max);
  rep.attained_on_boundary = rep.violation <= rep.tolerance;
  return rep;
}

/// m(t_n) = \int_region |u_t(x, t_n) - h(x)| dx with u_t = (u^{n+1} - u^n) / dt and the
/// tensor trapezoid rule in space, for n = 0 .. N-2.
inline std::vector<std::pair<double, double>> initial_continuity_metric(
    const HeatTrajectory& traj, const TemperatureField& h, const CellMask& region) {
  if (traj.size() < 3) throw InvalidInput("initial_continuity_metric needs at least 3 levels");
  const Grid& g = traj.grid();
  if (!(h.grid() == g) || !(region.grid() == g)) {
    throw InvalidInput("initial_continuity_metric: grids differ");
  }
  if (region.empty()) throw InvalidInput("initial_continuity_metric: empty region");
  std::array<std::vector<double>, kMaxDim> w;
  for (int a = 0; a < kMaxDim; ++a) {
    w[a] = a < g.dim() ? detail::trapezoid_weights(g.count(a), g.spacing(a), 0, g.count(a) - 1)
                       : std::vector<double>{1.0};
  }
  std::vector<std::pair<double, double>> out;
  for (std::size_t n = 0; n + 1 < traj.size(); ++n) {
    double m = 0.0;
    for (std::size_t c = 0; c < g.size(); ++c) {
      if (!region.test(c)) continue;
      const Index idx = g.unflatten(c);
      const double ut = (traj[n + 1][c] - traj[n][c]) / traj.dt();
      m += w[0][idx[0]] * w[1][idx[1]] * w[2][idx[2]] * std::abs(ut - h[c]);
    }
    out.emplace_back(traj[n].time(), m);
  }
  return out;
}

/// delta(t): radius of the smallest neighbourhood of G containing {u(., t) > 0}, at each
/// requested time (which must be a snapshot time).
inline std::vector<double> delta_of_t(const HeatTrajectory& traj, const CellMask& reference,
                                      const std::vector<double>& times) {
  if (reference.empty()) throw InvalidInput("delta_of_t: reference set G is empty");
  const CellMask all(traj.grid(), true);
  std::vector<double> out;
  for (double t : times) {
    const auto it = std::find_if(traj.begin(), traj.end(), [&](const TemperatureField& f) {
      return std::abs(f.time() - t) <= 1e-9 * std::max(1.0, std::abs(t));
    });
    if (it == traj.end()) throw InvalidInput("delta_of_t: no snapshot at t = " + format_real(t));
    out.push_back(neighborhood_radius(positivity_set(*it, all), reference));
  }
  return out;
}

struct MaxPrincipleSuite {
  std::size_t runs = 0;
  std::size_t violations = 0;
  /// Largest violation relative to the run's scale.
  double worst = 0.0;
};

/// Randomized explicit Dirichlet runs in 1, 2 and 3 dimensions under the stability
/// limit: random initial data, boundary data and step fraction, each audited.
inline MaxPrincipleSuite max_principle_suite(std::uint64_t seed, std::size_t runs = 50) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  MaxPrincipleSuite out;
  for (std::size_t run = 0; run < runs; ++run) {
    const int dim = 1 + static_cast<int>(run % 3);
    const std::size_t n = dim == 3 ? 8 : 16;
    Point hi{0, 0, 0};
    Index iv{1, 1, 1};
    for (int a = 0; a < dim; ++a) {
      hi[a] = 1.0;
      iv[a] = n;
    }
    const Grid g = Grid::nodal(dim, {0, 0, 0}, hi, iv);
    std::vector<double> init(g.size());
    for (double& x : init) x = u01(rng);
    const double a = u01(rng), b = u01(rng), w = 5.0 * u01(rng);
    const BoundaryData bc = [=](const Point& x, double t) {
      const double s = std::sin(w * (x[0] + x[1] + x[2]) + t);
      return a + b * s * s;
    };
    const double h = g.spacing(0);
    const double dt = (0.05 + 0.95 * u01(rng)) * h * h / (2.0 * dim);
    const HeatTrajectory traj = solve_dirichlet(OperatorCoefficients::laplacian(dim),
                                                TemperatureField(g, 0.0, init), bc, 40 * dt, dt);
    const MaxPrincipleReport rep = max_principle_audit(traj);
    ++out.runs;
    if (!rep.attained_on_boundary) ++out.violations;
    out.worst = std::max(out.worst, rep.violation / std::max(1.0, std::abs(rep.max_value)));
  }
  return out;
}

}  // namespace stefan
