#pragma once

// One-dimensional Stefan problem with explicit front tracking.
//
// Liquid occupies 0 < x < s(t) with u_t = kappa u_xx, u(0, t) = f(t), u(s, t) = 0. The
// liquid is mapped to xi = x / s in [0, 1], where
//   U_t = (kappa / s^2) U_xixi + (xi s' / s) U_xi.
// In two-phase mode the solid occupies s < x < L with temperature w <= 0, mapped to
// eta = (x - s) / (L - s):
//   W_t = (kappa_S / (L - s)^2) W_etaeta + (s' (1 - eta) / (L - s)) W_eta,
// and w(L, t) = g(t). The front moves by
//   s' = -k1 u_x(s-)                   (one phase)
//   s' =  k1 (w_x(s+) - u_x(s-))       (two phase)
// and is advanced by forward Euler in lock-step with the field update.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stefan/error.hpp"
#include "stefan/format.hpp"
#include "stefan/grid.hpp"
#include "stefan/heat.hpp"

namespace stefan {

using TimeFunction = std::function<double(double t)>;
using ProfileFunction = std::function<double(double x)>;

struct SolidPhase {
  double kappa = 1.0;
  /// Right end L of the domain; the front stays in (0, L).
  double length = 2.0;
  /// Initial solid temperature on [b, L], psi(b) = 0, psi <= 0.
  ProfileFunction psi = [](double) { return 0.0; };
  /// Temperature at x = L, g <= 0.
  TimeFunction g = [](double) { return 0.0; };
};

struct Stefan1DResolution {
  std::size_t liquid_intervals = 200;
  std::size_t solid_intervals = 100;
  /// Fraction of the explicit diffusion limit used when dt is not given.
  double cfl = 0.4;
  /// Explicit step; 0 selects one from `cfl`.
  double dt = 0.0;
  /// Number of stored snapshots after the initial one.
  std::size_t snapshots = 50;
};

struct StefanSpec1D {
  double k1 = 1.0;
  double kappa = 1.0;
  double b = 1.0;
  double t0 = 0.0;
  double T = 1.0;
  TimeFunction f = [](double) { return 0.0; };
  ProfileFunction phi = [](double) { return 0.0; };
  std::optional<SolidPhase> solid;
  Stefan1DResolution resolution;

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw InvalidInput(std::string(name) + " must be positive and finite, got " +
                           format_real(v));
      }
    };
    positive(k1, "k1");
    positive(kappa, "kappa");
    positive(b, "b");
    if (!(t0 >= 0.0) || !(T > t0) || !std::isfinite(T)) {
      throw InvalidInput("need 0 <= t0 < T, got t0 = " + format_real(t0) + ", T = " +
                         format_real(T));
    }
    if (resolution.liquid_intervals < 3) {
      throw InvalidInput("liquid phase needs at least 3 cells");
    }
    if (!(resolution.cfl > 0.0 && resolution.cfl <= 1.0)) {
      throw InvalidInput("cfl fraction must lie in (0, 1]");
    }
    if (resolution.snapshots < 1) throw InvalidInput("need at least one snapshot");
    if (!(resolution.dt >= 0.0)) throw InvalidInput("dt must be >= 0");
    const double tol = 1e-12;
    if (std::abs(phi(b)) > tol) {
      throw InvalidInput("incompatible initial data: phi(b) = " + format_real(phi(b)));
    }
    for (std::size_t i = 0; i <= 64; ++i) {
      const double x = b * static_cast<double>(i) / 64.0;
      if (!(phi(x) >= -tol)) throw InvalidInput("phi must be >= 0, phi(" + format_real(x) + ") < 0");
      const double t = t0 + (T - t0) * static_cast<double>(i) / 64.0;
      if (!(f(t) >= 0.0)) throw InvalidInput("f must be >= 0, f(" + format_real(t) + ") < 0");
    }
    if (solid) {
      positive(solid->kappa, "solid kappa");
      if (!(solid->length > b)) throw InvalidInput("solid length L must exceed b");
      if (resolution.solid_intervals < 3) throw InvalidInput("solid phase needs at least 3 cells");
      if (std::abs(solid->psi(b)) > tol) {
        throw InvalidInput("incompatible solid data: psi(b) = " + format_real(solid->psi(b)));
      }
      for (std::size_t i = 0; i <= 64; ++i) {
        const double x = b + (solid->length - b) * static_cast<double>(i) / 64.0;
        if (!(solid->psi(x) <= tol)) throw InvalidInput("psi must be <= 0");
        const double t = t0 + (T - t0) * static_cast<double>(i) / 64.0;
        if (!(solid->g(t) <= 0.0)) throw InvalidInput("g must be <= 0");
      }
    }
  }
};

/// Nodal values on the mapped grids plus the front position at one time.
struct Stefan1DState {
  double time = 0.0;
  double front = 0.0;
  std::vector<double> liquid;  // U(xi_i), xi_i = i / N
  std::vector<double> solid;   // W(eta_j), eta_j = j / M; empty in one-phase mode
};

/// d/dx at the last node of `u` by the one-sided stencil (3u_N - 4u_{N-1} + u_{N-2}) / 2h.
inline double gradient_at_right_end(std::span<const double> u, double h) {
  if (u.size() < 4) throw InvalidInput("front gradient needs at least 3 cells in the phase");
  const std::size_t n = u.size() - 1;
  return (3.0 * u[n] - 4.0 * u[n - 1] + u[n - 2]) / (2.0 * h);
}

/// d/dx at the first node of `u` by (-3u_0 + 4u_1 - u_2) / 2h.
inline double gradient_at_left_end(std::span<const double> u, double h) {
  if (u.size() < 4) throw InvalidInput("front gradient needs at least 3 cells in the phase");
  return (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
}

struct FrontGradient {
  double liquid = 0.0;               // u_x(s-)
  std::optional<double> solid;       // w_x(s+)
};

inline FrontGradient front_gradient(const StefanSpec1D& spec, const Stefan1DState& state) {
  const double n = static_cast<double>(state.liquid.size() - 1);
  FrontGradient g;
  g.liquid = gradient_at_right_end(state.liquid, state.front / n);
  if (spec.solid) {
    const double m = static_cast<double>(state.solid.size() - 1);
    g.solid = gradient_at_left_end(state.solid, (spec.solid->length - state.front) / m);
  }
  return g;
}

inline double front_velocity(const StefanSpec1D& spec, const Stefan1DState& state) {
  const FrontGradient g = front_gradient(spec, state);
  if (g.solid) return spec.k1 * (*g.solid - g.liquid);
  return -spec.k1 * g.liquid;
}

/// Largest stable explicit step for the current front position (diffusion limit on each
/// mapped phase grid).
inline double stefan_step_limit(const StefanSpec1D& spec, const Stefan1DState& state) {
  const double hx = state.front / static_cast<double>(state.liquid.size() - 1);
  double limit = hx * hx / (2.0 * spec.kappa);
  if (spec.solid) {
    const double hs =
        (spec.solid->length - state.front) / static_cast<double>(state.solid.size() - 1);
    limit = std::min(limit, hs * hs / (2.0 * spec.solid->kappa));
  }
  return limit;
}

namespace detail {

/// One explicit step of U_t = D U_zz + (a + c z) U_z on nodes z_i = i/N, Dirichlet ends.
inline void advance_mapped(std::span<const double> u, std::span<double> out, double dt,
                           double diffusion, double drift0, double drift1, double left,
                           double right) {
  const std::size_t n = u.size() - 1;
  const double h = 1.0 / static_cast<double>(n);
  for (std::size_t i = 1; i < n; ++i) {
    const double z = static_cast<double>(i) * h;
    const double drift = drift0 + drift1 * z;
    // Monotone central differencing needs cell Peclet number |drift| h / D <= 2.
    out[i] = u[i] + dt * (diffusion * (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h) +
                          drift * (u[i + 1] - u[i - 1]) / (2.0 * h));
  }
  out[0] = left;
  out[n] = right;
}

inline void check_peclet(double drift, double diffusion, std::size_t intervals,
                         const char* phase) {
  const double h = 1.0 / static_cast<double>(intervals);
  if (std::abs(drift) * h > 2.0 * diffusion) {
    throw NumericalFailure(std::string("cell Peclet number above 2 in the ") + phase +
                           " phase; refine the grid");
  }
}

}  // namespace detail

/// Forward-Euler step of the coupled system from `state` to time state.time + dt.
inline Stefan1DState step_stefan(const StefanSpec1D& spec, const Stefan1DState& state, double dt) {
  if (!(dt > 0.0)) throw InvalidInput("step_stefan: dt must be positive");
  detail::check_step(dt, stefan_step_limit(spec, state));
  const double s = state.front;
  const double v = front_velocity(spec, state);
  const double t_next = state.time + dt;

  Stefan1DState next;
  next.time = t_next;
  next.front = s + dt * v;
  if (!(next.front > 0.0) || !std::isfinite(next.front)) {
    throw NumericalFailure("front left the domain: s = " + format_real(next.front) + " at t = " +
                           format_real(t_next));
  }
  if (spec.solid && !(next.front < spec.solid->length)) {
    throw NumericalFailure("front reached the far wall: s = " + format_real(next.front));
  }

  const double dl = spec.kappa / (s * s);
  detail::check_peclet(v / s, dl, state.liquid.size() - 1, "liquid");
  next.liquid.resize(state.liquid.size());
  detail::advance_mapped(state.liquid, next.liquid, dt, dl, 0.0, v / s, spec.f(t_next), 0.0);

  if (spec.solid) {
    const double width = spec.solid->length - s;
    const double ds = spec.solid->kappa / (width * width);
    // s'(1 - eta)/(L - s) = s'/(L - s) - s' eta/(L - s)
    detail::check_peclet(v / width, ds, state.solid.size() - 1, "solid");
    next.solid.resize(state.solid.size());
    detail::advance_mapped(state.solid, next.solid, dt, ds, v / width, -v / width, 0.0,
                           spec.solid->g(t_next));
  }
  return next;
}

/// Initial state sampled from phi (and psi) with u(0) = f(t0).
inline Stefan1DState initial_state(const StefanSpec1D& spec) {
  Stefan1DState st;
  st.time = spec.t0;
  st.front = spec.b;
  const std::size_t n = spec.resolution.liquid_intervals;
  st.liquid.resize(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    st.liquid[i] = spec.phi(spec.b * static_cast<double>(i) / static_cast<double>(n));
  }
  st.liquid[0] = spec.f(spec.t0);
  st.liquid[n] = 0.0;
  if (spec.solid) {
    const std::size_t m = spec.resolution.solid_intervals;
    st.solid.resize(m + 1);
    const double width = spec.solid->length - spec.b;
    for (std::size_t j = 0; j <= m; ++j) {
      st.solid[j] =
          spec.solid->psi(spec.b + width * static_cast<double>(j) / static_cast<double>(m));
    }
    st.solid[0] = 0.0;
    st.solid[m] = spec.solid->g(spec.t0);
  }
  return st;
}

struct FrontTrajectory {
  std::vector<double> times;
  std::vector<double> positions;
  std::vector<double> velocities;

  std::size_t size() const noexcept { return times.size(); }
};

struct Stefan1DDiagnostics {
  std::size_t steps = 0;
  double dt = 0.0;
  bool warm_start = false;
  /// Interior liquid nodes, all steps, where the discrete u_t fell below -ut_tolerance.
  std::size_t ut_violations = 0;
  double ut_tolerance = 0.0;
  double min_ut = 0.0;
  /// Nodes outside the band [min data, max data] by more than 1e-12 * scale.
  std::size_t max_principle_violations = 0;
  double max_principle_excess = 0.0;
  double min_front_increment = 0.0;
  /// (t, \int_0^{min(s, b)} |u_t(x, t) - kappa phi''(x)| dx) over the first steps.
  std::vector<std::pair<double, double>> continuity;
};

struct Stefan1DResult {
  /// Liquid temperature on the mapped grid xi in [0, 1].
  HeatTrajectory liquid;
  /// Solid temperature on the mapped grid eta in [0, 1] (two-phase only).
  HeatTrajectory solid;
  FrontTrajectory front;
  Stefan1DDiagnostics diagnostics;
  Stefan1DState final_state;
};

/// Steps and uniform dt covering [t0, T] with a whole number of steps per snapshot.
inline std::pair<std::size_t, double> stefan_time_grid(const StefanSpec1D& spec) {
  const Stefan1DState st = initial_state(spec);
  const double dt_max = spec.resolution.dt > 0.0
                            ? spec.resolution.dt
                            : spec.resolution.cfl * stefan_step_limit(spec, st);
  const double span = spec.T - spec.t0;
  const std::size_t k = spec.resolution.snapshots;
  const std::size_t per_snapshot =
      std::max<std::size_t>(1, steps_to_cover(span / static_cast<double>(k), dt_max));
  const std::size_t steps = per_snapshot * k;
  return {steps, span / static_cast<double>(steps)};
}

/// Called after every stored snapshot with the run so far.
using Stefan1DObserver = std::function<void(const Stefan1DResult&)>;

inline Stefan1DResult solve_stefan(const StefanSpec1D& spec, const Stefan1DObserver& observer = {}) {
  spec.validate();
  const auto [steps, dt] = stefan_time_grid(spec);
  const std::size_t stride = steps / spec.resolution.snapshots;
  const std::size_t n = spec.resolution.liquid_intervals;
  const double h_xi = 1.0 / static_cast<double>(n);

  Stefan1DState state = initial_state(spec);
  double hi = 0.0, lo = 0.0;
  for (double v : state.liquid) hi = std::max(hi, v);
  for (double v : state.solid) lo = std::min(lo, v);
  const double scale = std::max({1.0, hi, -lo});

  Stefan1DResult out;
  out.diagnostics.steps = steps;
  out.diagnostics.dt = dt;
  out.diagnostics.ut_tolerance = 10.0 * (h_xi * h_xi + dt) * scale;
  out.diagnostics.min_front_increment = std::numeric_limits<double>::infinity();
  out.diagnostics.min_ut = std::numeric_limits<double>::infinity();

  const Grid xi_grid = Grid::nodal_line(0.0, 1.0, n);
  std::optional<Grid> eta_grid;
  if (spec.solid) eta_grid = Grid::nodal_line(0.0, 1.0, spec.resolution.solid_intervals);
  const double snap_dt = dt * static_cast<double>(stride);
  out.liquid = HeatTrajectory(snap_dt);
  if (spec.solid) out.solid = HeatTrajectory(snap_dt);

  auto record = [&](const Stefan1DState& st, double velocity) {
    out.liquid.push_back(TemperatureField(xi_grid, st.time, st.liquid));
    if (spec.solid) out.solid.push_back(TemperatureField(*eta_grid, st.time, st.solid));
    out.front.times.push_back(st.time);
    out.front.positions.push_back(st.front);
    out.front.velocities.push_back(velocity);
    if (observer) observer(out);
  };
  record(state, front_velocity(spec, state));

  // kappa phi'' at the initial liquid nodes, the limit of u_t as t -> t0.
  const double hx0 = spec.b * h_xi;
  std::vector<double> initial_heat(n + 1, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    const double x = static_cast<double>(i) * hx0;
    initial_heat[i] = spec.kappa * (spec.phi(x + hx0) - 2.0 * spec.phi(x) + spec.phi(x - hx0)) /
                      (hx0 * hx0);
  }
  constexpr std::size_t kContinuitySteps = 10;

  double phi_max = 0.0;
  for (std::size_t i = 1; i <= n; ++i) phi_max = std::max(phi_max, state.liquid[i]);
  const bool degenerate = phi_max == 0.0 && spec.f(spec.t0) > 0.0;
  out.diagnostics.warm_start = degenerate;
  double data_max = hi, data_min = lo;

  for (std::size_t step = 0; step < steps; ++step) {
    const Stefan1DState prev = state;
    const double t_target = spec.t0 + static_cast<double>(step + 1) * dt;
    if (step == 0 && degenerate) {
      // Warm-up through the boundary layer: 5 steps of dt/10, then one of dt/2.
      for (int k = 0; k < 5; ++k) state = step_stefan(spec, state, 0.1 * dt);
      state = step_stefan(spec, state, t_target - state.time);
    } else {
      state = step_stefan(spec, state, dt);
    }
    state.time = t_target;
    const double v = front_velocity(spec, state);

    data_max = std::max(data_max, spec.f(state.time));
    if (spec.solid) data_min = std::min(data_min, spec.solid->g(state.time));
    const double slack = 1e-12 * scale;
    for (double u : state.liquid) {
      const double excess = std::max(u - data_max, -u);
      if (excess > slack) {
        ++out.diagnostics.max_principle_violations;
        out.diagnostics.max_principle_excess = std::max(out.diagnostics.max_principle_excess, excess);
      }
    }
    for (double w : state.solid) {
      const double excess = std::max(w, data_min - w);
      if (excess > slack) {
        ++out.diagnostics.max_principle_violations;
        out.diagnostics.max_principle_excess = std::max(out.diagnostics.max_principle_excess, excess);
      }
    }
    out.diagnostics.min_front_increment =
        std::min(out.diagnostics.min_front_increment, state.front - prev.front);

    if (!(step == 0 && degenerate)) {
      // u_t at fixed x: U_t - (xi s'/s) U_xi.
      const double s = prev.front;
      const double v_prev = front_velocity(spec, prev);
      std::vector<double> ut(n + 1, 0.0);
      for (std::size_t i = 1; i < n; ++i) {
        const double xi = static_cast<double>(i) * h_xi;
        const double u_xi = (prev.liquid[i + 1] - prev.liquid[i - 1]) / (2.0 * h_xi);
        ut[i] = (state.liquid[i] - prev.liquid[i]) / dt - xi * v_prev / s * u_xi;
        out.diagnostics.min_ut = std::min(out.diagnostics.min_ut, ut[i]);
        if (ut[i] < -out.diagnostics.ut_tolerance) ++out.diagnostics.ut_violations;
      }
      if (out.diagnostics.continuity.size() < kContinuitySteps) {
        // Trapezoid over nodes of the current liquid lying in [0, b].
        const double hx = s * h_xi;
        double m = 0.0;
        for (std::size_t i = 1; i < n; ++i) {
          const double x = static_cast<double>(i) * hx;
          if (x > spec.b) break;
          const double h0 = initial_heat[std::min<std::size_t>(n, static_cast<std::size_t>(
                                                                       std::lround(x / hx0)))];
          m += hx * std::abs(ut[i] - h0);
        }
        out.diagnostics.continuity.emplace_back(prev.time, m);
      }
    }
    if ((step + 1) % stride == 0) record(state, v);
  }
  if (out.diagnostics.min_ut == std::numeric_limits<double>::infinity()) out.diagnostics.min_ut = 0.0;
  out.final_state = state;
  return out;
}

/// Liquid temperature of a mapped snapshot resampled onto physical positions; 0 beyond s.
inline double liquid_temperature_at(std::span<const double> mapped, double front, double x) {
  // Grid centers at the left wall can land a rounding error below 0.
  if (x < -1e-12 * front || x >= front) return 0.0;
  x = std::max(x, 0.0);
  const double n = static_cast<double>(mapped.size() - 1);
  const double pos = x / front * n;
  const auto i = std::min(static_cast<std::size_t>(pos), mapped.size() - 2);
  const double w = pos - static_cast<double>(i);
  return (1.0 - w) * mapped[i] + w * mapped[i + 1];
}

/// Liquid snapshots of a run resampled onto a fixed physical 1D grid.
inline HeatTrajectory to_physical(const Stefan1DResult& run, const Grid& grid) {
  if (grid.dim() != 1) throw InvalidInput("to_physical needs a 1D grid");
  HeatTrajectory traj(run.liquid.dt());
  for (std::size_t k = 0; k < run.liquid.size(); ++k) {
    const auto mapped = run.liquid[k].values();
    const double s = run.front.positions[k];
    traj.push_back(TemperatureField::sample(grid, run.liquid[k].time(), [&](const Point& x) {
      return liquid_temperature_at(mapped, s, x[0]);
    }));
  }
  return traj;
}

}  // namespace stefan
