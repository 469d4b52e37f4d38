#pragma once

// Explicit finite-difference solution of L u = u_t for the second-order operator
//   L f = sum_jk a_jk d2f/dx_j dx_k + sum_j b_j df/dx_j + c f
// plus the heat-kernel representation and the discrete conservation residual.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stefan/error.hpp"
#include "stefan/grid.hpp"

namespace stefan {

using Matrix3 = std::array<std::array<double, kMaxDim>, kMaxDim>;

/// Eigenvalues (ascending) of the leading n x n block of a symmetric matrix, n <= 3.
inline std::array<double, kMaxDim> symmetric_eigenvalues(const Matrix3& m, int n) {
  std::array<double, kMaxDim> ev{0.0, 0.0, 0.0};
  if (n == 1) {
    ev[0] = m[0][0];
    return ev;
  }
  if (n == 2) {
    const double mean = 0.5 * (m[0][0] + m[1][1]);
    const double half_diff = 0.5 * (m[0][0] - m[1][1]);
    const double r = std::hypot(half_diff, m[0][1]);
    ev[0] = mean - r;
    ev[1] = mean + r;
    return ev;
  }
  // Trigonometric solution of the characteristic cubic.
  const double p1 = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
  const double q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
  if (p1 == 0.0) {
    ev = {m[0][0], m[1][1], m[2][2]};
    std::sort(ev.begin(), ev.end());
    return ev;
  }
  const double p2 = (m[0][0] - q) * (m[0][0] - q) + (m[1][1] - q) * (m[1][1] - q) +
                    (m[2][2] - q) * (m[2][2] - q) + 2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);
  Matrix3 b{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) b[i][j] = (m[i][j] - (i == j ? q : 0.0)) / p;
  const double det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) -
                     b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0]) +
                     b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
  const double r = std::clamp(det / 2.0, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  const double hi = q + 2.0 * p * std::cos(phi);
  const double lo = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
  ev = {lo, 3.0 * q - hi - lo, hi};
  return ev;
}

/// Coefficient functions of L, evaluated at (x, t).
struct OperatorCoefficients {
  using SecondOrder = std::function<double(int j, int k, const Point& x, double t)>;
  using FirstOrder = std::function<double(int j, const Point& x, double t)>;
  using ZerothOrder = std::function<double(const Point& x, double t)>;

  int dim = 1;
  SecondOrder a;
  FirstOrder b;   // empty means 0
  ZerothOrder c;  // empty means 0
  /// Coefficients do not depend on (x, t); sampling happens once per grid.
  bool constant = false;

  static OperatorCoefficients laplacian(int dim, double diffusivity = 1.0) {
    OperatorCoefficients op;
    op.dim = dim;
    op.a = [diffusivity](int j, int k, const Point&, double) { return j == k ? diffusivity : 0.0; };
    op.constant = true;
    return op;
  }

  static OperatorCoefficients constant_coefficients(int dim, const Matrix3& a,
                                                    const Point& b = {}, double c = 0.0) {
    OperatorCoefficients op;
    op.dim = dim;
    op.a = [a](int j, int k, const Point&, double) { return a[j][k]; };
    op.b = [b](int j, const Point&, double) { return b[j]; };
    op.c = [c](const Point&, double) { return c; };
    op.constant = true;
    return op;
  }
};

/// Coefficients frozen at cell centers for one time level.
struct SampledCoefficients {
  int dim = 1;
  std::vector<Matrix3> a;  // one per cell, or one entry when constant
  std::vector<Point> b;
  std::vector<double> c;
  bool has_first_order = false;
  bool has_mixed = false;
  double max_eigenvalue = 0.0;

  const Matrix3& a_at(std::size_t cell) const { return a.size() == 1 ? a[0] : a[cell]; }
  const Point& b_at(std::size_t cell) const { return b.size() == 1 ? b[0] : b[cell]; }
  double c_at(std::size_t cell) const { return c.size() == 1 ? c[0] : c[cell]; }
};

/// Samples and validates the coefficients on the interior of `grid` at time t.
/// Rejects asymmetric, indefinite or non-finite second-order coefficients.
inline SampledCoefficients sample_coefficients(const OperatorCoefficients& op, const Grid& grid,
                                               double t) {
  if (op.dim != grid.dim()) throw InvalidInput("operator dimension does not match grid");
  if (!op.a) throw InvalidInput("operator has no second-order coefficients");
  const int n = grid.dim();
  SampledCoefficients s;
  s.dim = n;
  std::vector<std::size_t> cells;
  if (op.constant) {
    cells.push_back(0);
  } else {
    cells.resize(grid.size());
    for (std::size_t cidx = 0; cidx < grid.size(); ++cidx) cells[cidx] = cidx;
  }
  s.a.resize(cells.size());
  s.b.resize(cells.size());
  s.c.resize(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Point x = grid.center(cells[i]);
    Matrix3 m{};
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) m[j][k] = op.a(j, k, x, t);
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        if (!std::isfinite(m[j][k])) throw InvalidInput("non-finite diffusion coefficient");
        const double scale = std::max({1.0, std::abs(m[j][k]), std::abs(m[k][j])});
        if (std::abs(m[j][k] - m[k][j]) > 1e-12 * scale) {
          throw InvalidInput("diffusion matrix is not symmetric");
        }
        if (j != k && m[j][k] != 0.0) s.has_mixed = true;
      }
    }
    const auto ev = symmetric_eigenvalues(m, n);
    if (!(ev[0] > 0.0)) {
      throw InvalidInput("diffusion matrix is not positive definite at cell " +
                         std::to_string(cells[i]) + " (smallest eigenvalue " +
                         format_real(ev[0]) + ")");
    }
    s.max_eigenvalue = std::max(s.max_eigenvalue, ev[n - 1]);
    s.a[i] = m;
    Point bv{};
    if (op.b) {
      for (int j = 0; j < n; ++j) {
        bv[j] = op.b(j, x, t);
        if (!std::isfinite(bv[j])) throw InvalidInput("non-finite advection coefficient");
        if (bv[j] != 0.0) s.has_first_order = true;
      }
    }
    s.b[i] = bv;
    s.c[i] = op.c ? op.c(x, t) : 0.0;
    if (!std::isfinite(s.c[i])) throw InvalidInput("non-finite reaction coefficient");
  }
  return s;
}

/// L f on interior cells from pre-sampled coefficients.
inline MaskedField apply_sampled(const SampledCoefficients& s, const TemperatureField& f) {
  const Grid& g = f.grid();
  const int n = g.dim();
  std::vector<double> out(g.size(), 0.0);
  std::vector<std::uint8_t> valid(g.size(), 0);
  std::array<double, kMaxDim> h{};
  for (int a = 0; a < n; ++a) h[a] = g.spacing(a);
  const auto v = f.values();
  for (std::size_t cell = 0; cell < g.size(); ++cell) {
    const Index idx = g.unflatten(cell);
    if (g.is_boundary(idx)) continue;
    const Matrix3& a = s.a_at(cell);
    double acc = 0.0;
    for (int j = 0; j < n; ++j) {
      const std::size_t sj = g.stride(j);
      acc += a[j][j] * (v[cell + sj] - 2.0 * v[cell] + v[cell - sj]) / (h[j] * h[j]);
    }
    if (s.has_mixed) {
      for (int j = 0; j < n; ++j) {
        for (int k = j + 1; k < n; ++k) {
          const std::size_t sj = g.stride(j), sk = g.stride(k);
          const double cross = (v[cell + sj + sk] + v[cell - sj - sk] - v[cell + sj - sk] -
                                v[cell - sj + sk]) /
                               (4.0 * h[j] * h[k]);
          acc += 2.0 * a[j][k] * cross;
        }
      }
    }
    if (s.has_first_order) {
      const Point& b = s.b_at(cell);
      for (int j = 0; j < n; ++j) {
        const std::size_t sj = g.stride(j);
        acc += b[j] * (v[cell + sj] - v[cell - sj]) / (2.0 * h[j]);
      }
    }
    acc += s.c_at(cell) * v[cell];
    out[cell] = acc;
    valid[cell] = 1;
  }
  return MaskedField{TemperatureField(g, f.time(), std::move(out)), std::move(valid)};
}

/// L f with second-order central differences; boundary cells invalid.
inline MaskedField apply_operator(const OperatorCoefficients& op, const TemperatureField& f) {
  f.require_finite("apply_operator");
  return apply_sampled(sample_coefficients(op, f.grid(), f.time()), f);
}

/// dt <= h_min^2 / (2 n a_max), a_max the largest eigenvalue of a over the grid.
inline double stability_limit(const SampledCoefficients& s, const Grid& g) {
  const double h = g.min_spacing();
  return h * h / (2.0 * g.dim() * s.max_eigenvalue);
}

inline double stability_limit(const OperatorCoefficients& op, const Grid& g, double t = 0.0) {
  return stability_limit(sample_coefficients(op, g, t), g);
}

/// Dirichlet data: the value imposed on a boundary cell center x at time t.
using BoundaryData = std::function<double(const Point& x, double t)>;

inline BoundaryData zero_boundary() {
  return [](const Point&, double) { return 0.0; };
}

namespace detail {

inline TemperatureField explicit_update(const SampledCoefficients& s, const TemperatureField& u,
                                        double dt, const BoundaryData& boundary) {
  const Grid& g = u.grid();
  const MaskedField lu = apply_sampled(s, u);
  const double t_new = u.time() + dt;
  std::vector<double> next(g.size());
  for (std::size_t c = 0; c < g.size(); ++c) {
    if (lu.is_valid(c)) {
      next[c] = u[c] + dt * lu.field[c];
    } else {
      next[c] = boundary(g.center(c), t_new);
    }
  }
  TemperatureField out(g, t_new, std::move(next));
  return out;
}

inline void check_step(double dt, double limit) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidInput("time step must be positive");
  if (dt > limit * (1.0 + 1e-12)) throw StabilityViolation(dt, limit);
}

}  // namespace detail

/// One forward-Euler step u' = u + dt L u on the interior, boundary cells from `boundary`.
inline TemperatureField step_explicit(const OperatorCoefficients& op, const TemperatureField& u,
                                      double dt, const BoundaryData& boundary) {
  u.require_finite("step_explicit");
  const SampledCoefficients s = sample_coefficients(op, u.grid(), u.time());
  detail::check_step(dt, stability_limit(s, u.grid()));
  return detail::explicit_update(s, u, dt, boundary);
}

/// Snapshots u(., t0), u(., t0 + dt), ... sharing one grid and a uniform step.
class HeatTrajectory {
 public:
  HeatTrajectory() = default;
  explicit HeatTrajectory(double dt) : dt_(dt) {
    if (!(dt > 0.0)) throw InvalidInput("trajectory step must be positive");
  }

  void push_back(TemperatureField snapshot) {
    if (!snapshots_.empty()) {
      const TemperatureField& last = snapshots_.back();
      if (!(snapshot.grid() == last.grid())) {
        throw InvalidInput("trajectory snapshots must share one grid");
      }
      const double gap = snapshot.time() - last.time();
      if (!(gap > 0.0)) throw InvalidInput("trajectory times must increase strictly");
      if (std::abs(gap - dt_) > 1e-9 * std::max(1.0, std::abs(snapshot.time()))) {
        throw InvalidInput("trajectory step is not uniform");
      }
    }
    snapshots_.push_back(std::move(snapshot));
  }

  double dt() const noexcept { return dt_; }
  std::size_t size() const noexcept { return snapshots_.size(); }
  bool empty() const noexcept { return snapshots_.empty(); }
  const TemperatureField& operator[](std::size_t i) const { return snapshots_[i]; }
  const TemperatureField& front() const { return snapshots_.front(); }
  const TemperatureField& back() const { return snapshots_.back(); }
  const Grid& grid() const { return snapshots_.front().grid(); }
  auto begin() const { return snapshots_.begin(); }
  auto end() const { return snapshots_.end(); }

 private:
  double dt_ = 1.0;
  std::vector<TemperatureField> snapshots_;
};

/// Number of explicit steps needed to cover a horizon T with step dt.
inline std::size_t steps_to_cover(double horizon, double dt) {
  const double ratio = horizon / dt;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) <= 1e-9 * std::max(1.0, ratio)) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(rounded));
  }
  return static_cast<std::size_t>(std::ceil(ratio));
}

/// Repeated step_explicit from `initial` over [t0, t0 + ceil(T/dt) dt].
inline HeatTrajectory solve_dirichlet(const OperatorCoefficients& op,
                                      const TemperatureField& initial,
                                      const BoundaryData& boundary, double horizon, double dt) {
  if (!(horizon > 0.0)) throw InvalidInput("solve_dirichlet: horizon must be positive");
  initial.require_finite("solve_dirichlet");
  const std::size_t steps = steps_to_cover(horizon, dt);
  HeatTrajectory traj(dt);
  traj.push_back(initial);
  std::optional<SampledCoefficients> frozen;
  if (op.constant) {
    frozen = sample_coefficients(op, initial.grid(), initial.time());
    detail::check_step(dt, stability_limit(*frozen, initial.grid()));
  }
  for (std::size_t n = 0; n < steps; ++n) {
    const TemperatureField& u = traj.back();
    if (frozen) {
      TemperatureField next = detail::explicit_update(*frozen, u, dt, boundary);
      // Keep the time grid exact: t_n = t_0 + n dt.
      next.set_time(initial.time() + static_cast<double>(n + 1) * dt);
      traj.push_back(std::move(next));
    } else {
      TemperatureField next = step_explicit(op, u, dt, boundary);
      next.set_time(initial.time() + static_cast<double>(n + 1) * dt);
      traj.push_back(std::move(next));
    }
  }
  return traj;
}

namespace detail {

/// Composite trapezoid weights along one axis of cell centers [first, last].
inline std::vector<double> trapezoid_weights(std::size_t count, double h, std::size_t first,
                                             std::size_t last) {
  std::vector<double> w(count, 0.0);
  for (std::size_t i = first; i <= last; ++i) w[i] = h;
  w[first] *= 0.5;
  w[last] *= 0.5;
  return w;
}

}  // namespace detail

/// (4 pi t)^{-n/2} \int phi(xi) exp(-|x - xi|^2 / 4t) d xi by tensor-product trapezoid
/// quadrature over the cell centers of phi's grid.
inline double heat_kernel_solution(const TemperatureField& phi, const Point& x, double t) {
  if (!(t > 0.0) || !std::isfinite(t)) throw InvalidInput("heat_kernel_solution: t must be > 0");
  const Grid& g = phi.grid();
  const int n = g.dim();
  std::array<std::vector<double>, kMaxDim> factor;
  for (int a = 0; a < kMaxDim; ++a) {
    if (a >= n) {
      factor[a] = {1.0};
      continue;
    }
    const std::size_t count = g.count(a);
    auto w = detail::trapezoid_weights(count, g.spacing(a), 0, count - 1);
    factor[a].resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      const double d = x[a] - g.coordinate(a, i);
      factor[a][i] = w[i] * std::exp(-d * d / (4.0 * t));
    }
  }
  const auto v = phi.values();
  double sum = 0.0;
  for (std::size_t i = 0; i < g.count(0); ++i) {
    double si = 0.0;
    for (std::size_t j = 0; j < g.count(1); ++j) {
      double sj = 0.0;
      const std::size_t base = (i * g.count(1) + j) * g.count(2);
      for (std::size_t k = 0; k < g.count(2); ++k) sj += factor[2][k] * v[base + k];
      si += factor[1][j] * sj;
    }
    sum += factor[0][i] * si;
  }
  return sum * std::pow(4.0 * std::numbers::pi * t, -0.5 * n);
}

/// Trapezoid integral of a masked quantity over interior cells (indices 1..N-2 per axis).
inline double integrate_interior(const Grid& g, std::span<const double> values) {
  std::array<std::vector<double>, kMaxDim> w;
  for (int a = 0; a < kMaxDim; ++a) {
    if (a >= g.dim()) {
      w[a] = {1.0};
    } else {
      w[a] = detail::trapezoid_weights(g.count(a), g.spacing(a), 1, g.count(a) - 2);
    }
  }
  double sum = 0.0;
  for (std::size_t c = 0; c < g.size(); ++c) {
    const Index idx = g.unflatten(c);
    const double weight = w[0][idx[0]] * w[1][idx[1]] * w[2][idx[2]];
    if (weight != 0.0) sum += weight * values[c];
  }
  return sum;
}

/// R = \int_Omega \int_0^T (u_t - Laplacian u) dt dx over the interior, with u_t a forward
/// difference on each step interval and the Laplacian integrated by the trapezoid rule in
/// time and space. For an exact caloric trajectory R = 0; for the explicit scheme it
/// measures the time-discretization defect, O(h^2 + dt).
inline double conservation_residual(const HeatTrajectory& traj) {
  if (traj.size() < 2) throw InvalidInput("conservation_residual needs at least 2 snapshots");
  const Grid& g = traj.grid();
  const double dt = traj.dt();
  const MaskedField lap0 = discrete_laplacian(traj[0]);
  std::vector<double> lap_prev(lap0.field.values().begin(), lap0.field.values().end());
  std::vector<double> integrand(g.size());
  double residual = 0.0;
  for (std::size_t n = 0; n + 1 < traj.size(); ++n) {
    const MaskedField lap_next = discrete_laplacian(traj[n + 1]);
    const auto u0 = traj[n].values();
    const auto u1 = traj[n + 1].values();
    const auto l1 = lap_next.field.values();
    for (std::size_t c = 0; c < g.size(); ++c) {
      integrand[c] = (u1[c] - u0[c]) - 0.5 * dt * (lap_prev[c] + l1[c]);
    }
    residual += integrate_interior(g, integrand);
    lap_prev.assign(l1.begin(), l1.end());
  }
  return residual;
}

}  // namespace stefan
