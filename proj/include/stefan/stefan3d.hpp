#pragma once

// One-phase Stefan problem in a box [0, Lx] x [0, Ly] x [0, H] with the free boundary a
// graph z = rho(x, y, t). Liquid lies below the graph, u = f(t) on z = 0, u = 0 on the
// front, insulated side walls. The front moves with
//   V_n = -k1 grad u . n,    n = (-rho_x, -rho_y, 1) / sqrt(1 + rho_x^2 + rho_y^2),
//   rho_t = V_n sqrt(1 + rho_x^2 + rho_y^2) = -k1 (u_z - rho_x u_x - rho_y u_y).
//
// Discretization: nodal grid z_k = k hz. In column (i, j) the nodes 1..K with
// z_K <= rho - hz/2 are unknowns of the explicit heat step. Nodes between z_K and the
// front are slaved to the quadratic through (z_{K-1}, u_{K-1}), (z_K, u_K), (rho, 0);
// the same quadratic supplies ghost values above z_K and the front gradient.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "stefan/error.hpp"
#include "stefan/format.hpp"
#include "stefan/grid.hpp"
#include "stefan/heat.hpp"
#include "stefan/stefan1d.hpp"

namespace stefan {

using SurfaceFunction = std::function<double(double x, double y)>;
using VolumeFunction = std::function<double(const Point& x)>;

struct StefanSpec3D {
  double k1 = 1.0;
  /// Box extents Lx, Ly, H.
  Point extent{1.0, 1.0, 1.0};
  /// Grid intervals per axis; nodes sit at i * L / intervals.
  Index intervals{4, 4, 50};
  double t0 = 0.0;
  double T = 0.1;
  TimeFunction f = [](double) { return 0.0; };
  SurfaceFunction rho0 = [](double, double) { return 0.5; };
  /// Initial liquid temperature; evaluated below the front only.
  VolumeFunction u0 = [](const Point&) { return 0.0; };
  /// Fraction of the explicit limit 1 / (2/hx^2 + 2/hy^2 + 4/hz^2) when dt is 0.
  double cfl = 0.9;
  double dt = 0.0;
  std::size_t snapshots = 10;

  void validate() const {
    if (!(k1 > 0.0) || !std::isfinite(k1)) throw InvalidInput("k1 must be positive");
    for (int a = 0; a < 3; ++a) {
      if (!(extent[a] > 0.0) || !std::isfinite(extent[a])) {
        throw InvalidInput("box extent must be positive on axis " + std::to_string(a));
      }
      if (intervals[a] < 3) {
        throw InvalidInput("need at least 3 intervals on axis " + std::to_string(a));
      }
    }
    if (!(t0 >= 0.0) || !(T > t0)) throw InvalidInput("need 0 <= t0 < T");
    if (!(cfl > 0.0 && cfl <= 1.0)) throw InvalidInput("cfl fraction must lie in (0, 1]");
    if (!(dt >= 0.0)) throw InvalidInput("dt must be >= 0");
    if (snapshots < 1) throw InvalidInput("need at least one snapshot");
  }
};

/// Column-wise discrete state of the 3D problem.
struct Stefan3DState {
  double time = 0.0;
  Grid volume;   // nodal (x, y, z)
  Grid surface;  // nodal (x, y)
  std::vector<double> u;    // on `volume`; 0 at and above the front
  std::vector<double> rho;  // on `surface`
  std::vector<std::size_t> top;  // K per column: last unknown layer

  Stefan3DState(Grid v, Grid s) : volume(std::move(v)), surface(std::move(s)) {}

  std::size_t nx() const { return volume.count(0); }
  std::size_t ny() const { return volume.count(1); }
  std::size_t nz() const { return volume.count(2); }
  double hx() const { return volume.spacing(0); }
  double hy() const { return volume.spacing(1); }
  double hz() const { return volume.spacing(2); }
  double height() const { return hz() * static_cast<double>(nz() - 1); }
  double z(std::size_t k) const { return hz() * static_cast<double>(k); }
  std::size_t column(std::size_t i, std::size_t j) const { return i * ny() + j; }
  std::size_t node(std::size_t i, std::size_t j, std::size_t k) const {
    return (i * ny() + j) * nz() + k;
  }

  /// Nodes strictly below the front.
  std::size_t liquid_count() const {
    std::size_t n = 0;
    for (std::size_t c = 0; c < rho.size(); ++c) {
      for (std::size_t k = 0; k < nz(); ++k) n += z(k) < rho[c] ? 1 : 0;
    }
    return n;
  }
};

namespace detail {

/// Value at z of the quadratic through (z0, u0), (z1, u1), (z2, u2).
inline double lagrange3(double z, double z0, double u0, double z1, double u1, double z2,
                        double u2) {
  return u0 * (z - z1) * (z - z2) / ((z0 - z1) * (z0 - z2)) +
         u1 * (z - z0) * (z - z2) / ((z1 - z0) * (z1 - z2)) +
         u2 * (z - z0) * (z - z1) / ((z2 - z0) * (z2 - z1));
}

inline double lagrange3_derivative(double z, double z0, double u0, double z1, double u1,
                                   double z2, double u2) {
  return u0 * ((z - z1) + (z - z2)) / ((z0 - z1) * (z0 - z2)) +
         u1 * ((z - z0) + (z - z2)) / ((z1 - z0) * (z1 - z2)) +
         u2 * ((z - z0) + (z - z1)) / ((z2 - z0) * (z2 - z1));
}

/// Last unknown layer K of a column: largest k with z_k <= rho - hz/2.
inline std::size_t top_layer(double rho, double hz) {
  const double r = rho / hz - 0.5;
  if (r < 0.0) return 0;
  return static_cast<std::size_t>(std::floor(r + 1e-12));
}

inline std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
  if (i < 0) return static_cast<std::size_t>(-i);
  if (i >= static_cast<std::ptrdiff_t>(n)) return 2 * (n - 1) - static_cast<std::size_t>(i);
  return static_cast<std::size_t>(i);
}

}  // namespace detail

/// Front-respecting profile of column c at height z: quadratic interpolation of the
/// unknowns below z_{K-1}, and the quadratic through the two top unknowns and (rho, 0)
/// above it (extrapolated past rho when needed).
inline double column_value(const Stefan3DState& s, std::size_t i, std::size_t j, double z) {
  const std::size_t c = s.column(i, j);
  const std::size_t top = s.top[c];
  const double hz = s.hz();
  const std::size_t base = s.node(i, j, 0);
  if (z >= s.z(top - 1)) {
    return detail::lagrange3(z, s.z(top - 1), s.u[base + top - 1], s.z(top), s.u[base + top],
                             s.rho[c], 0.0);
  }
  auto k0 = static_cast<std::size_t>(std::max(0.0, std::floor(z / hz)));
  k0 = std::min(k0, top - 2);
  return detail::lagrange3(z, s.z(k0), s.u[base + k0], s.z(k0 + 1), s.u[base + k0 + 1],
                           s.z(k0 + 2), s.u[base + k0 + 2]);
}

/// d rho/dx, d rho/dy per column: central differences, second-order one-sided at edges.
struct SurfaceSlopes {
  std::vector<double> dx;
  std::vector<double> dy;
};

inline double axis_difference(const std::function<double(std::size_t)>& g, std::size_t i,
                              std::size_t n, double h) {
  // One-sided stencils in difference form, so constants give exactly zero.
  if (i == 0) return (4.0 * (g(1) - g(0)) - (g(2) - g(0))) / (2.0 * h);
  if (i + 1 == n) return (4.0 * (g(n - 1) - g(n - 2)) - (g(n - 1) - g(n - 3))) / (2.0 * h);
  return (g(i + 1) - g(i - 1)) / (2.0 * h);
}

inline SurfaceSlopes surface_slopes(const Grid& surface, const std::vector<double>& rho) {
  const std::size_t nx = surface.count(0), ny = surface.count(1);
  SurfaceSlopes out{std::vector<double>(rho.size()), std::vector<double>(rho.size())};
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j < ny; ++j) {
      out.dx[i * ny + j] = axis_difference([&](std::size_t a) { return rho[a * ny + j]; }, i, nx,
                                           surface.spacing(0));
      out.dy[i * ny + j] = axis_difference([&](std::size_t b) { return rho[i * ny + b]; }, j, ny,
                                           surface.spacing(1));
    }
  }
  return out;
}

using Vec3 = std::array<double, 3>;

/// n = (-rho_x, -rho_y, 1) / sqrt(1 + rho_x^2 + rho_y^2) per column.
inline std::vector<Vec3> front_normals(const Grid& surface, const std::vector<double>& rho) {
  const SurfaceSlopes d = surface_slopes(surface, rho);
  std::vector<Vec3> n(rho.size());
  for (std::size_t c = 0; c < rho.size(); ++c) {
    const double inv = 1.0 / std::sqrt(1.0 + d.dx[c] * d.dx[c] + d.dy[c] * d.dy[c]);
    n[c] = {-d.dx[c] * inv, -d.dy[c] * inv, inv};
  }
  return n;
}

/// max over columns of max(|rho_x|, |rho_y|).
inline double lipschitz_constant(const Grid& surface, const std::vector<double>& rho) {
  const SurfaceSlopes d = surface_slopes(surface, rho);
  double l = 0.0;
  for (std::size_t c = 0; c < rho.size(); ++c) {
    l = std::max({l, std::abs(d.dx[c]), std::abs(d.dy[c])});
  }
  return l;
}

/// (u_x, u_y, u_z) on the liquid side of the front at (x_i, y_j, rho_ij).
inline std::vector<Vec3> front_temperature_gradient(const Stefan3DState& s) {
  for (std::size_t c = 0; c < s.rho.size(); ++c) {
    if (s.top[c] < 2) {
      throw InvalidInput("liquid layer under the front is thinner than 3 nodes in column " +
                         std::to_string(c));
    }
  }
  const std::size_t nx = s.nx(), ny = s.ny();
  std::vector<Vec3> g(s.rho.size());
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j < ny; ++j) {
      const std::size_t c = s.column(i, j);
      const double r = s.rho[c];
      const std::size_t top = s.top[c];
      const std::size_t base = s.node(i, j, 0);
      const double uz = detail::lagrange3_derivative(r, s.z(top - 1), s.u[base + top - 1],
                                                     s.z(top), s.u[base + top], r, 0.0);
      const double ux = axis_difference(
          [&](std::size_t a) { return a == i ? 0.0 : column_value(s, a, j, r); }, i, nx, s.hx());
      const double uy = axis_difference(
          [&](std::size_t b) { return b == j ? 0.0 : column_value(s, i, b, r); }, j, ny, s.hy());
      g[c] = {ux, uy, uz};
    }
  }
  return g;
}

/// V_n = -k1 grad u . n per column.
inline std::vector<double> normal_velocity(const Stefan3DState& s, double k1) {
  const auto grad = front_temperature_gradient(s);
  const auto normals = front_normals(s.surface, s.rho);
  std::vector<double> v(s.rho.size());
  for (std::size_t c = 0; c < v.size(); ++c) {
    v[c] = -k1 * (grad[c][0] * normals[c][0] + grad[c][1] * normals[c][1] +
                  grad[c][2] * normals[c][2]);
  }
  return v;
}

struct FrontUpdate {
  std::vector<double> rho;
  /// max over columns of |(rho' - rho) - dt V_n sqrt(1 + rho_x^2 + rho_y^2)|.
  double consistency = 0.0;
};

/// rho' = rho - dt k1 (u_z - rho_x u_x - rho_y u_y).
inline FrontUpdate evolve_front(const Stefan3DState& s, double k1, double dt) {
  const auto grad = front_temperature_gradient(s);
  const SurfaceSlopes d = surface_slopes(s.surface, s.rho);
  const auto vn = normal_velocity(s, k1);
  FrontUpdate out{std::vector<double>(s.rho.size()), 0.0};
  for (std::size_t c = 0; c < s.rho.size(); ++c) {
    const double rate = -k1 * (grad[c][2] - d.dx[c] * grad[c][0] - d.dy[c] * grad[c][1]);
    out.rho[c] = s.rho[c] + dt * rate;
    const double metric = std::sqrt(1.0 + d.dx[c] * d.dx[c] + d.dy[c] * d.dy[c]);
    out.consistency =
        std::max(out.consistency, std::abs((out.rho[c] - s.rho[c]) - dt * vn[c] * metric));
    if (!std::isfinite(out.rho[c]) || out.rho[c] >= s.height() || out.rho[c] <= 0.0) {
      throw NumericalFailure("front left the box: rho = " + format_real(out.rho[c]) +
                             " in column " + std::to_string(c));
    }
  }
  return out;
}

namespace detail {

/// Recomputes K per column and refreshes slaved and solid nodes from the front.
/// Re-evaluates every node above the last unknown layer from the column quadratic.
inline void refresh_slaved(Stefan3DState& s) {
  for (std::size_t i = 0; i < s.nx(); ++i) {
    for (std::size_t j = 0; j < s.ny(); ++j) {
      const std::size_t c = s.column(i, j);
      const std::size_t base = s.node(i, j, 0);
      for (std::size_t k = s.top[c] + 1; k < s.nz(); ++k) {
        const double zk = s.z(k);
        s.u[base + k] = zk < s.rho[c] ? column_value(s, i, j, zk) : 0.0;
      }
    }
  }
}

/// Moves the unknown/slaved split to the current front. Nodes that become unknowns take
/// the value of the front-respecting quadratic built on the previous split.
inline void remask(Stefan3DState& s) {
  refresh_slaved(s);
  for (std::size_t c = 0; c < s.rho.size(); ++c) {
    s.top[c] = top_layer(s.rho[c], s.hz());
    if (s.top[c] < 2) {
      throw NumericalFailure("liquid layer under the front is thinner than 3 nodes in column " +
                             std::to_string(c));
    }
  }
  refresh_slaved(s);
}

}  // namespace detail

inline double stefan3d_step_limit(const Stefan3DState& s) {
  return 1.0 / (2.0 / (s.hx() * s.hx()) + 2.0 / (s.hy() * s.hy()) + 4.0 / (s.hz() * s.hz()));
}

inline Stefan3DState initial_state_3d(const StefanSpec3D& spec) {
  spec.validate();
  Stefan3DState s(Grid::nodal(3, {0, 0, 0}, spec.extent, spec.intervals),
                  Grid::nodal(2, {0, 0, 0}, {spec.extent[0], spec.extent[1], 0},
                              {spec.intervals[0], spec.intervals[1], 1}));
  s.time = spec.t0;
  s.rho.resize(s.surface.size());
  s.top.resize(s.surface.size());
  s.u.assign(s.volume.size(), 0.0);
  for (std::size_t i = 0; i < s.nx(); ++i) {
    for (std::size_t j = 0; j < s.ny(); ++j) {
      const double x = s.hx() * static_cast<double>(i), y = s.hy() * static_cast<double>(j);
      const double r = spec.rho0(x, y);
      if (!std::isfinite(r) || r <= 0.0 || r >= s.height()) {
        throw InvalidInput("initial front must lie inside the box, rho0(" + format_real(x) + ", " +
                           format_real(y) + ") = " + format_real(r));
      }
      s.rho[s.column(i, j)] = r;
      s.top[s.column(i, j)] = std::max<std::size_t>(2, detail::top_layer(r, s.hz()));
      for (std::size_t k = 0; k < s.nz(); ++k) {
        const double zk = s.z(k);
        if (zk >= r) break;
        const double v = k == 0 ? spec.f(spec.t0) : spec.u0({x, y, zk});
        if (!(v >= 0.0) || !std::isfinite(v)) {
          throw InvalidInput("initial temperature must be finite and >= 0");
        }
        s.u[s.node(i, j, k)] = v;
      }
    }
  }
  detail::remask(s);
  return s;
}

struct Step3DReport {
  double consistency = 0.0;
  double min_front_increment = 0.0;
  double max_front_increment = 0.0;
  std::size_t negative_nodes = 0;
  double min_temperature = 0.0;
};

/// Largest front displacement per step, in units of hz.
inline constexpr double kMaxFrontMove = 0.5;

/// Forward Euler for the coupled system: the heat step and the front update both use
/// (u, rho) at time t; the grid is then re-masked at the new front.
inline Stefan3DState coupled_step_3d(const StefanSpec3D& spec, const Stefan3DState& s, double dt,
                                     Step3DReport* report = nullptr) {
  detail::check_step(dt, stefan3d_step_limit(s));
  const FrontUpdate fu = evolve_front(s, spec.k1, dt);
  double min_inc = std::numeric_limits<double>::infinity(), max_inc = 0.0;
  for (std::size_t c = 0; c < fu.rho.size(); ++c) {
    const double inc = fu.rho[c] - s.rho[c];
    min_inc = std::min(min_inc, inc);
    max_inc = std::max(max_inc, std::abs(inc));
  }
  if (max_inc > kMaxFrontMove * s.hz()) {
    throw NumericalFailure("front moved " + format_real(max_inc / s.hz()) +
                           " cells in one step; reduce dt");
  }

  Stefan3DState next = s;
  next.time = s.time + dt;
  const double ihx = 1.0 / (s.hx() * s.hx()), ihy = 1.0 / (s.hy() * s.hy()),
               ihz = 1.0 / (s.hz() * s.hz());
  const double bottom = spec.f(next.time);
  for (std::size_t i = 0; i < s.nx(); ++i) {
    const std::size_t ip = detail::reflect(static_cast<std::ptrdiff_t>(i) + 1, s.nx());
    const std::size_t im = detail::reflect(static_cast<std::ptrdiff_t>(i) - 1, s.nx());
    for (std::size_t j = 0; j < s.ny(); ++j) {
      const std::size_t jp = detail::reflect(static_cast<std::ptrdiff_t>(j) + 1, s.ny());
      const std::size_t jm = detail::reflect(static_cast<std::ptrdiff_t>(j) - 1, s.ny());
      const std::size_t c = s.column(i, j);
      const std::size_t top = s.top[c];
      const std::size_t base = s.node(i, j, 0);
      auto lateral = [&](std::size_t a, std::size_t b, std::size_t k) {
        return k <= s.top[s.column(a, b)] ? s.u[s.node(a, b, k)] : column_value(s, a, b, s.z(k));
      };
      for (std::size_t k = 1; k <= top; ++k) {
        const double uc = s.u[base + k];
        const double up = k < top ? s.u[base + k + 1] : column_value(s, i, j, s.z(k + 1));
        const double lap = (lateral(ip, j, k) - 2.0 * uc + lateral(im, j, k)) * ihx +
                           (lateral(i, jp, k) - 2.0 * uc + lateral(i, jm, k)) * ihy +
                           (up - 2.0 * uc + s.u[base + k - 1]) * ihz;
        next.u[base + k] = uc + dt * lap;
      }
      next.u[base] = bottom;
    }
  }

  const std::size_t before = s.liquid_count();
  next.rho = fu.rho;
  detail::remask(next);
  const std::size_t after = next.liquid_count();
  if (static_cast<double>(after) < 0.8 * static_cast<double>(before)) {
    throw NumericalFailure("re-masking removed more than 20% of the liquid nodes; reduce dt");
  }
  if (report) {
    report->consistency = fu.consistency;
    report->min_front_increment = min_inc;
    report->max_front_increment = max_inc;
    report->negative_nodes = 0;
    report->min_temperature = 0.0;
    for (double v : next.u) {
      report->min_temperature = std::min(report->min_temperature, v);
      if (v < 0.0) ++report->negative_nodes;
    }
  }
  return next;
}

struct Stefan3DDiagnostics {
  std::size_t steps = 0;
  double dt = 0.0;
  double max_consistency = 0.0;
  double min_front_increment = 0.0;
  /// Lipschitz constant of the front at each snapshot.
  std::vector<double> lipschitz;
  bool lipschitz_non_increasing = true;
  std::size_t negative_node_steps = 0;
  double min_temperature = 0.0;
};

struct Stefan3DResult {
  /// Front heights on the (x, y) grid at each snapshot.
  HeatTrajectory fronts;
  /// Mean front height at every step, t0 included.
  std::vector<double> times;
  std::vector<double> mean_heights;
  Stefan3DDiagnostics diagnostics;
  Stefan3DState final_state;
};

/// Called after every stored snapshot with the run so far.
using Stefan3DObserver = std::function<void(const Stefan3DResult&)>;

inline Stefan3DResult solve_stefan3d(const StefanSpec3D& spec,
                                     const Stefan3DObserver& observer = {}) {
  Stefan3DState s = initial_state_3d(spec);
  const double dt_max = spec.dt > 0.0 ? spec.dt : spec.cfl * stefan3d_step_limit(s);
  const double span = spec.T - spec.t0;
  const std::size_t per_snapshot = std::max<std::size_t>(
      1, steps_to_cover(span / static_cast<double>(spec.snapshots), dt_max));
  const std::size_t steps = per_snapshot * spec.snapshots;
  const double dt = span / static_cast<double>(steps);

  Stefan3DResult out{HeatTrajectory(dt * static_cast<double>(per_snapshot)), {}, {}, {}, s};
  out.diagnostics.steps = steps;
  out.diagnostics.dt = dt;
  out.diagnostics.min_front_increment = std::numeric_limits<double>::infinity();
  auto mean = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    return m / static_cast<double>(v.size());
  };
  auto snapshot = [&](const Stefan3DState& st) {
    out.fronts.push_back(TemperatureField(st.surface, st.time, st.rho));
    const double l = lipschitz_constant(st.surface, st.rho);
    if (!out.diagnostics.lipschitz.empty() && l > out.diagnostics.lipschitz.back() + 1e-12) {
      out.diagnostics.lipschitz_non_increasing = false;
    }
    out.diagnostics.lipschitz.push_back(l);
    if (observer) {
      out.final_state = st;
      observer(out);
    }
  };
  snapshot(s);
  out.times.push_back(s.time);
  out.mean_heights.push_back(mean(s.rho));
  for (std::size_t n = 0; n < steps; ++n) {
    Step3DReport rep;
    s = coupled_step_3d(spec, s, dt, &rep);
    s.time = spec.t0 + static_cast<double>(n + 1) * dt;
    out.diagnostics.max_consistency = std::max(out.diagnostics.max_consistency, rep.consistency);
    out.diagnostics.min_front_increment =
        std::min(out.diagnostics.min_front_increment, rep.min_front_increment);
    if (rep.negative_nodes > 0) ++out.diagnostics.negative_node_steps;
    out.diagnostics.min_temperature = std::min(out.diagnostics.min_temperature, rep.min_temperature);
    out.times.push_back(s.time);
    out.mean_heights.push_back(mean(s.rho));
    if ((n + 1) % per_snapshot == 0) snapshot(s);
  }
  out.final_state = s;
  return out;
}

}  // namespace stefan
