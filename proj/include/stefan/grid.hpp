#pragma once

// Structured grids, scalar fields on them, parabolic geometry, and the discrete
// operators every solver in the toolkit is built from.
//
// Layout: cell-centered, row-major with the last active axis fastest. Axes that a
// grid does not use have count 1 and are ignored by every operator.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "stefan/error.hpp"

namespace stefan {

inline constexpr int kMaxDim = 3;

using Point = std::array<double, kMaxDim>;
using Index = std::array<std::size_t, kMaxDim>;

class Grid {
 public:
  Grid(int dim, Point origin, Point extent, Index counts)
      : dim_(dim), origin_(origin), extent_(extent), counts_(counts) {
    if (dim < 1 || dim > kMaxDim) {
      throw InvalidInput("grid dimension must be 1, 2 or 3, got " + std::to_string(dim));
    }
    for (int a = 0; a < kMaxDim; ++a) {
      if (a < dim) {
        if (counts_[a] < 4) {
          throw InvalidInput("grid axis " + std::to_string(a) + " needs at least 4 cells");
        }
        if (!(extent_[a] > 0.0) || !std::isfinite(extent_[a]) || !std::isfinite(origin_[a])) {
          throw InvalidInput("grid axis " + std::to_string(a) + " needs a finite positive extent");
        }
      } else {
        origin_[a] = 0.0;
        extent_[a] = 1.0;
        counts_[a] = 1;
      }
    }
  }

  /// 1D box [lo, lo + extent] split into `count` cells.
  static Grid line(double lo, double extent, std::size_t count) {
    return Grid(1, {lo, 0, 0}, {extent, 1, 1}, {count, 1, 1});
  }

  /// Grid whose cell centers sit exactly on lo + i*(hi-lo)/intervals, i = 0..intervals.
  /// The outermost cell layer then coincides with the physical boundary, which is the
  /// natural setting for Dirichlet data.
  static Grid nodal(int dim, Point lo, Point hi, Index intervals) {
    Point origin{}, extent{};
    Index counts{1, 1, 1};
    for (int a = 0; a < dim; ++a) {
      if (intervals[a] < 3 || !(hi[a] > lo[a])) {
        throw InvalidInput("nodal grid axis " + std::to_string(a) +
                           " needs hi > lo and at least 3 intervals");
      }
      const double h = (hi[a] - lo[a]) / static_cast<double>(intervals[a]);
      origin[a] = lo[a] - 0.5 * h;
      extent[a] = hi[a] - lo[a] + h;
      counts[a] = intervals[a] + 1;
    }
    return Grid(dim, origin, extent, counts);
  }

  static Grid nodal_line(double lo, double hi, std::size_t intervals) {
    return nodal(1, {lo, 0, 0}, {hi, 0, 0}, {intervals, 1, 1});
  }

  int dim() const noexcept { return dim_; }
  double origin(int axis) const { return origin_[axis]; }
  double extent(int axis) const { return extent_[axis]; }
  std::size_t count(int axis) const { return counts_[axis]; }
  const Index& counts() const noexcept { return counts_; }
  double spacing(int axis) const { return extent_[axis] / static_cast<double>(counts_[axis]); }

  double min_spacing() const {
    double h = spacing(0);
    for (int a = 1; a < dim_; ++a) h = std::min(h, spacing(a));
    return h;
  }

  /// Volume element h_0 * ... * h_{dim-1}.
  double cell_volume() const {
    double v = 1.0;
    for (int a = 0; a < dim_; ++a) v *= spacing(a);
    return v;
  }

  std::size_t size() const noexcept { return counts_[0] * counts_[1] * counts_[2]; }

  std::size_t flatten(const Index& idx) const noexcept {
    return (idx[0] * counts_[1] + idx[1]) * counts_[2] + idx[2];
  }

  Index unflatten(std::size_t flat) const noexcept {
    Index idx{};
    idx[2] = flat % counts_[2];
    flat /= counts_[2];
    idx[1] = flat % counts_[1];
    idx[0] = flat / counts_[1];
    return idx;
  }

  /// Row-major stride of an axis in the flat layout.
  std::size_t stride(int axis) const noexcept {
    if (axis == 2) return 1;
    if (axis == 1) return counts_[2];
    return counts_[1] * counts_[2];
  }

  double coordinate(int axis, std::size_t i) const {
    return origin_[axis] + (static_cast<double>(i) + 0.5) * spacing(axis);
  }

  Point center(const Index& idx) const {
    Point p{};
    for (int a = 0; a < dim_; ++a) p[a] = coordinate(a, idx[a]);
    return p;
  }

  Point center(std::size_t flat) const { return center(unflatten(flat)); }

  /// True for cells in the outermost layer of any active axis.
  bool is_boundary(const Index& idx) const noexcept {
    for (int a = 0; a < dim_; ++a) {
      if (idx[a] == 0 || idx[a] + 1 == counts_[a]) return true;
    }
    return false;
  }

  bool is_boundary(std::size_t flat) const noexcept { return is_boundary(unflatten(flat)); }

  /// Physical bounds of the box [origin, origin + extent].
  double lower(int axis) const { return origin_[axis]; }
  double upper(int axis) const { return origin_[axis] + extent_[axis]; }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.dim_ == b.dim_ && a.origin_ == b.origin_ && a.extent_ == b.extent_ &&
           a.counts_ == b.counts_;
  }

 private:
  int dim_;
  Point origin_;
  Point extent_;
  Index counts_;
};

inline double squared_norm(const Point& p, int dim) {
  double s = 0.0;
  for (int a = 0; a < dim; ++a) s += p[a] * p[a];
  return s;
}

inline double squared_distance(const Point& p, const Point& q, int dim) {
  double s = 0.0;
  for (int a = 0; a < dim; ++a) s += (p[a] - q[a]) * (p[a] - q[a]);
  return s;
}

/// Scalar samples of temperature at one time level, one value per cell.
class TemperatureField {
 public:
  TemperatureField(Grid grid, double time, std::vector<double> values)
      : grid_(std::move(grid)), time_(time), values_(std::move(values)) {
    if (values_.size() != grid_.size()) {
      throw InvalidInput("field has " + std::to_string(values_.size()) + " values, grid has " +
                         std::to_string(grid_.size()) + " cells");
    }
    if (!std::isfinite(time_) || time_ < 0.0) {
      throw InvalidInput("field time must be finite and non-negative");
    }
    require_finite("field construction");
  }

  TemperatureField(Grid grid, double time, double fill)
      : TemperatureField(grid, time, std::vector<double>(grid.size(), fill)) {}

  template <typename Fn>
  static TemperatureField sample(const Grid& grid, double time, Fn&& fn) {
    std::vector<double> values(grid.size());
    for (std::size_t c = 0; c < values.size(); ++c) values[c] = fn(grid.center(c));
    return TemperatureField(grid, time, std::move(values));
  }

  const Grid& grid() const noexcept { return grid_; }
  double time() const noexcept { return time_; }
  void set_time(double t) { time_ = t; }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  double operator[](std::size_t c) const { return values_[c]; }
  double& operator[](std::size_t c) { return values_[c]; }
  double at(const Index& idx) const { return values_[grid_.flatten(idx)]; }

  /// Throws when any sample is NaN or infinite. `context` names the caller.
  void require_finite(const std::string& context) const {
    for (std::size_t c = 0; c < values_.size(); ++c) {
      if (!std::isfinite(values_[c])) {
        throw InvalidInput(context + ": non-finite value at cell " + std::to_string(c));
      }
    }
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  Grid grid_;
  double time_;
  std::vector<double> values_;
};

/// A field whose cells may be flagged invalid (e.g. where a stencil does not fit).
/// Invalid cells hold 0.
struct MaskedField {
  TemperatureField field;
  std::vector<std::uint8_t> valid;

  bool is_valid(std::size_t c) const { return valid[c] != 0; }

  std::size_t valid_count() const {
    return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
  }

  /// Max |value| over valid cells.
  double max_abs_valid() const {
    double m = 0.0;
    for (std::size_t c = 0; c < valid.size(); ++c) {
      if (valid[c]) m = std::max(m, std::abs(field[c]));
    }
    return m;
  }
};

/// Boolean selection of cells on a grid.
class CellMask {
 public:
  explicit CellMask(Grid grid, bool fill = false)
      : grid_(std::move(grid)), bits_(grid_.size(), fill ? 1 : 0) {}

  template <typename Pred>
  static CellMask from_predicate(const Grid& grid, Pred&& pred) {
    CellMask m(grid);
    for (std::size_t c = 0; c < grid.size(); ++c) m.bits_[c] = pred(grid.center(c)) ? 1 : 0;
    return m;
  }

  const Grid& grid() const noexcept { return grid_; }
  bool test(std::size_t c) const { return bits_[c] != 0; }
  void set(std::size_t c, bool v = true) { bits_[c] = v ? 1 : 0; }
  std::size_t size() const noexcept { return bits_.size(); }

  std::size_t count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }
  bool empty() const { return count() == 0; }

  friend bool operator==(const CellMask& a, const CellMask& b) {
    return a.grid_ == b.grid_ && a.bits_ == b.bits_;
  }

 private:
  Grid grid_;
  std::vector<std::uint8_t> bits_;
};

/// C_rho(x0, t0) = { |x - x0| < rho, t0 - rho^2 < t < t0 }.
struct ParabolicCylinder {
  Point center{};
  double top_time = 0.0;
  double radius = 1.0;

  ParabolicCylinder(Point c, double t0, double rho) : center(c), top_time(t0), radius(rho) {
    if (!(rho > 0.0)) throw InvalidInput("cylinder radius must be positive");
  }

  double bottom_time() const { return top_time - radius * radius; }
};

struct SpaceTimePoint {
  Point x{};
  double t = 0.0;
};

/// d((x,t),(x0,t0)) = (|x-x0|^2 + |t-t0|)^{1/2}.
inline double parabolic_distance(const SpaceTimePoint& p, const SpaceTimePoint& q,
                                 int dim = kMaxDim) {
  return std::sqrt(squared_distance(p.x, q.x, dim) + std::abs(p.t - q.t));
}

/// Central second-difference Laplacian on interior cells; boundary cells are invalid.
inline MaskedField discrete_laplacian(const TemperatureField& f) {
  f.require_finite("discrete_laplacian");
  const Grid& g = f.grid();
  std::vector<double> out(g.size(), 0.0);
  std::vector<std::uint8_t> valid(g.size(), 0);
  std::array<double, kMaxDim> inv_h2{};
  for (int a = 0; a < g.dim(); ++a) inv_h2[a] = 1.0 / (g.spacing(a) * g.spacing(a));

  const auto v = f.values();
  for (std::size_t c = 0; c < g.size(); ++c) {
    const Index idx = g.unflatten(c);
    if (g.is_boundary(idx)) continue;
    double lap = 0.0;
    for (int a = 0; a < g.dim(); ++a) {
      const std::size_t s = g.stride(a);
      lap += (v[c + s] - 2.0 * v[c] + v[c - s]) * inv_h2[a];
    }
    out[c] = lap;
    valid[c] = 1;
  }
  return MaskedField{TemperatureField(g, f.time(), std::move(out)), std::move(valid)};
}

/// Cells inside `region` where f > 0 strictly.
inline CellMask positivity_set(const TemperatureField& f, const CellMask& region) {
  if (!(region.grid() == f.grid())) throw InvalidInput("positivity_set: mask grid mismatch");
  CellMask out(f.grid());
  for (std::size_t c = 0; c < f.grid().size(); ++c) {
    if (region.test(c) && f[c] > 0.0) out.set(c);
  }
  return out;
}

namespace detail {

// One pass of the exact squared Euclidean distance transform (Felzenszwalb &
// Huttenlocher lower envelope of parabolas) along a line of n samples with spacing h.
inline void distance_transform_line(std::span<const double> in, std::span<double> out, double h) {
  const std::size_t n = in.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> vertex(n);
  std::vector<double> boundary(n + 1);
  std::size_t k = 0;
  bool any = false;
  for (std::size_t q = 0; q < n; ++q) {
    if (in[q] == inf) continue;
    if (!any) {
      vertex[0] = q;
      boundary[0] = -inf;
      boundary[1] = inf;
      any = true;
      continue;
    }
    const double xq = static_cast<double>(q) * h;
    while (true) {
      const std::size_t p = vertex[k];
      const double xp = static_cast<double>(p) * h;
      const double s = ((in[q] + xq * xq) - (in[p] + xp * xp)) / (2.0 * (xq - xp));
      if (s <= boundary[k]) {
        if (k == 0) {
          vertex[0] = q;
          boundary[0] = -inf;
          boundary[1] = inf;
          break;
        }
        --k;
        continue;
      }
      ++k;
      vertex[k] = q;
      boundary[k] = s;
      boundary[k + 1] = inf;
      break;
    }
  }
  if (!any) {
    std::fill(out.begin(), out.end(), inf);
    return;
  }
  k = 0;
  for (std::size_t q = 0; q < n; ++q) {
    const double xq = static_cast<double>(q) * h;
    while (boundary[k + 1] < xq) ++k;
    const double xp = static_cast<double>(vertex[k]) * h;
    out[q] = (xq - xp) * (xq - xp) + in[vertex[k]];
  }
}

}  // namespace detail

/// Squared Euclidean distance from every cell center to the nearest cell of `target`.
/// Infinity everywhere when the target is empty.
inline std::vector<double> squared_distance_to(const CellMask& target) {
  const Grid& g = target.grid();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> d(g.size());
  for (std::size_t c = 0; c < g.size(); ++c) d[c] = target.test(c) ? 0.0 : inf;

  for (int axis = 0; axis < g.dim(); ++axis) {
    const std::size_t n = g.count(axis);
    const std::size_t stride = g.stride(axis);
    std::vector<double> line(n), result(n);
    for (std::size_t c = 0; c < g.size(); ++c) {
      if (g.unflatten(c)[axis] != 0) continue;
      for (std::size_t i = 0; i < n; ++i) line[i] = d[c + i * stride];
      detail::distance_transform_line(line, result, g.spacing(axis));
      for (std::size_t i = 0; i < n; ++i) d[c + i * stride] = result[i];
    }
  }
  return d;
}

/// delta = max_{a in A} min_{b in B} |a - b| over cell centers; 0 when A is empty.
inline double neighborhood_radius(const CellMask& a, const CellMask& b) {
  if (!(a.grid() == b.grid())) throw InvalidInput("neighborhood_radius: mask grid mismatch");
  if (a.empty()) return 0.0;
  if (b.empty()) throw InvalidInput("neighborhood_radius: reference set is empty, delta undefined");
  const std::vector<double> d2 = squared_distance_to(b);
  double worst = 0.0;
  for (std::size_t c = 0; c < d2.size(); ++c) {
    if (a.test(c)) worst = std::max(worst, d2[c]);
  }
  return std::sqrt(worst);
}

}  // namespace stefan
