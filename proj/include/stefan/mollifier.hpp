#pragma once

// Friedrichs mollifier eta_eps(x) = eps^{-n} eta(x / eps) with the standard bump
//   eta(x) = Z exp(1 / (|x|^2 - 1))  for |x| < 1,  0 otherwise,
// and the convolution f^eps = eta_eps * f evaluated by direct summation.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "stefan/error.hpp"
#include "stefan/grid.hpp"

namespace stefan {

namespace detail {

/// Unnormalized bump exp(1 / (r^2 - 1)) on the unit ball.
inline double bump(double r2) { return r2 < 1.0 ? std::exp(1.0 / (r2 - 1.0)) : 0.0; }

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
inline void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    nodes[i] = -x;
    nodes[n - 1 - i] = x;
    weights[i] = weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
}

/// |S^{n-1}| \int_0^1 r^{n-1} exp(1/(r^2-1)) dr by composite Gauss-Legendre.
inline double bump_integral(int dim) {
  std::vector<double> nodes, weights;
  gauss_legendre(12, nodes, weights);
  constexpr int panels = 256;
  const double width = 1.0 / panels;
  double radial = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = (p + 0.5) * width;
    for (std::size_t q = 0; q < nodes.size(); ++q) {
      const double r = mid + 0.5 * width * nodes[q];
      radial += 0.5 * width * weights[q] * std::pow(r, dim - 1) * bump(r * r);
    }
  }
  const double sphere = dim == 1 ? 2.0 : (dim == 2 ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi);
  return sphere * radial;
}

}  // namespace detail

/// One lattice offset of the discrete kernel and its weight (already multiplied by h^n).
struct KernelTap {
  std::array<long, kMaxDim> offset{};
  double weight = 0.0;
};

class MollifierKernel {
 public:
  /// Samples eta_eps on the lattice h = eps / samples_per_radius. The normalization is
  /// chosen so the discrete mass is 1; the continuum constant Z is kept alongside.
  static MollifierKernel build(double epsilon, int dim, double samples_per_radius) {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
      throw InvalidInput("mollifier width must be positive");
    }
    if (dim < 1 || dim > kMaxDim) throw InvalidInput("mollifier dimension must be 1, 2 or 3");
    MollifierKernel k;
    k.epsilon_ = epsilon;
    k.dim_ = dim;
    k.samples_ = samples_per_radius;
    k.spacing_ = epsilon / samples_per_radius;
    k.continuum_z_ = 1.0 / detail::bump_integral(dim);

    const auto reach = static_cast<long>(std::ceil(samples_per_radius));
    double raw_mass = 0.0;
    std::array<long, kMaxDim> lo{0, 0, 0}, hi{0, 0, 0};
    for (int a = 0; a < dim; ++a) {
      lo[a] = -reach;
      hi[a] = reach;
    }
    const double cell = std::pow(k.spacing_, dim);
    for (long i = lo[0]; i <= hi[0]; ++i) {
      for (long j = lo[1]; j <= hi[1]; ++j) {
        for (long l = lo[2]; l <= hi[2]; ++l) {
          const double r2 = static_cast<double>(i * i + j * j + l * l) /
                            (samples_per_radius * samples_per_radius);
          if (r2 >= 1.0) continue;
          const double w = k.continuum_z_ * detail::bump(r2) / std::pow(epsilon, dim) * cell;
          raw_mass += w;
          k.taps_.push_back({{i, j, l}, w});
        }
      }
    }
    k.raw_mass_ = raw_mass;
    if (samples_per_radius < 4.0) {
      throw InvalidInput("mollifier under-resolved: " + format_real(samples_per_radius) +
                         " samples per radius (need >= 4); achieved mass " +
                         format_real(raw_mass));
    }
    double mass = 0.0;
    for (auto& tap : k.taps_) {
      tap.weight /= raw_mass;
      mass += tap.weight;
    }
    if (std::abs(mass - 1.0) > 1e-8) {
      throw InvalidInput("mollifier normalization failed: achieved mass " + format_real(mass));
    }
    k.mass_ = mass;
    return k;
  }

  /// Kernel matched to an isotropic grid: eps / h samples per radius.
  static MollifierKernel for_grid(double epsilon, const Grid& g) {
    const double h = g.spacing(0);
    for (int a = 1; a < g.dim(); ++a) {
      if (std::abs(g.spacing(a) - h) > 1e-12 * h) {
        throw InvalidInput("mollifier needs equal spacing on every axis");
      }
    }
    return build(epsilon, g.dim(), epsilon / h);
  }

  double epsilon() const noexcept { return epsilon_; }
  int dim() const noexcept { return dim_; }
  double samples_per_radius() const noexcept { return samples_; }
  double lattice_spacing() const noexcept { return spacing_; }
  /// Z with \int eta = 1 over R^n.
  double continuum_normalization() const noexcept { return continuum_z_; }
  /// Lattice mass before renormalization, using the continuum Z.
  double lattice_mass_with_continuum_normalization() const noexcept { return raw_mass_; }
  double mass() const noexcept { return mass_; }
  const std::vector<KernelTap>& taps() const noexcept { return taps_; }

  /// eta(y) for the unit-width kernel.
  double profile(const Point& y) const { return continuum_z_ * detail::bump(squared_norm(y, dim_)); }

  /// eta_eps(x) = eps^{-n} eta(x / eps).
  double scaled(const Point& x) const {
    Point y{};
    for (int a = 0; a < dim_; ++a) y[a] = x[a] / epsilon_;
    return profile(y) / std::pow(epsilon_, dim_);
  }

  /// M_m = || d^m eta / d y_0^m ||_{L^1} for m = 0..max_order, by m-th central differences
  /// of the analytic profile on a fine lattice.
  std::vector<double> derivative_l1_bounds(int max_order) const {
    const int per_radius = dim_ == 1 ? 2000 : (dim_ == 2 ? 200 : 60);
    const double d = 1.0 / per_radius;
    std::vector<double> out(max_order + 1, 0.0);
    const long reach = per_radius + max_order;
    std::array<long, kMaxDim> lo{0, 0, 0}, hi{0, 0, 0};
    for (int a = 0; a < dim_; ++a) {
      lo[a] = -reach;
      hi[a] = reach;
    }
    const double cell = std::pow(d, dim_);
    std::vector<double> binom(max_order + 1);
    for (int m = 0; m <= max_order; ++m) {
      // Row m of Pascal's triangle with alternating sign.
      for (int j = 0; j <= m; ++j) {
        binom[j] = std::tgamma(m + 1.0) / (std::tgamma(j + 1.0) * std::tgamma(m - j + 1.0));
      }
      double acc = 0.0;
      for (long i = lo[0]; i <= hi[0]; ++i) {
        for (long j = lo[1]; j <= hi[1]; ++j) {
          for (long l = lo[2]; l <= hi[2]; ++l) {
            const double y1 = static_cast<double>(j) * d, y2 = static_cast<double>(l) * d;
            if (y1 * y1 + y2 * y2 >= 1.0) continue;
            double diff = 0.0;
            for (int q = 0; q <= m; ++q) {
              const double y0 = (static_cast<double>(i) + q - 0.5 * m) * d;
              const double sign = ((m - q) % 2 == 0) ? 1.0 : -1.0;
              diff += sign * binom[q] * profile({y0, y1, y2});
            }
            acc += std::abs(diff) / std::pow(d, m) * cell;
          }
        }
      }
      out[m] = acc;
    }
    return out;
  }

 private:
  MollifierKernel() = default;

  double epsilon_ = 1.0;
  int dim_ = 1;
  double samples_ = 1.0;
  double spacing_ = 1.0;
  double continuum_z_ = 1.0;
  double raw_mass_ = 0.0;
  double mass_ = 0.0;
  std::vector<KernelTap> taps_;
};

/// How the convolution treats points whose kernel support leaves the grid.
enum class MollifyDomain {
  interior,        // only cells at distance >= eps from the boundary (U_eps); others invalid
  zero_extension,  // every cell; f extended by 0 outside the grid
  periodic,        // every cell; f extended periodically
};

inline bool in_u_eps(const Grid& g, const Point& x, double epsilon) {
  for (int a = 0; a < g.dim(); ++a) {
    const double slack = 1e-12 * std::max(1.0, g.extent(a));
    if (x[a] - g.lower(a) < epsilon - slack || g.upper(a) - x[a] < epsilon - slack) return false;
  }
  return true;
}

/// U_eps as a cell mask.
inline CellMask u_eps_mask(const Grid& g, double epsilon) {
  return CellMask::from_predicate(g, [&](const Point& x) { return in_u_eps(g, x, epsilon); });
}

/// f^eps(x) = sum_y eta_eps(x - y) f(y) h^n on the grid lattice.
inline MaskedField mollify(const TemperatureField& f, const MollifierKernel& kernel,
                           MollifyDomain domain = MollifyDomain::interior) {
  f.require_finite("mollify");
  const Grid& g = f.grid();
  if (kernel.dim() != g.dim()) throw InvalidInput("mollify: kernel dimension mismatch");
  for (int a = 0; a < g.dim(); ++a) {
    if (std::abs(g.spacing(a) - kernel.lattice_spacing()) > 1e-9 * kernel.lattice_spacing()) {
      throw InvalidInput("mollify: kernel lattice does not match grid spacing");
    }
  }
  if (kernel.epsilon() < 4.0 * g.min_spacing() * (1.0 - 1e-12)) {
    throw InvalidInput("mollify: epsilon is smaller than 4 grid spacings");
  }
  std::vector<double> out(g.size(), 0.0);
  std::vector<std::uint8_t> valid(g.size(), 0);
  const auto v = f.values();
  std::array<long, kMaxDim> counts{};
  for (int a = 0; a < kMaxDim; ++a) counts[a] = static_cast<long>(g.count(a));

  for (std::size_t c = 0; c < g.size(); ++c) {
    const Index idx = g.unflatten(c);
    if (domain == MollifyDomain::interior && !in_u_eps(g, g.center(idx), kernel.epsilon())) {
      continue;
    }
    double acc = 0.0;
    for (const KernelTap& tap : kernel.taps()) {
      Index at{};
      bool outside = false;
      for (int a = 0; a < kMaxDim; ++a) {
        // x - y with y = x - offset*h: sample f at idx - offset.
        long p = static_cast<long>(idx[a]) - tap.offset[a];
        if (p < 0 || p >= counts[a]) {
          if (domain == MollifyDomain::periodic) {
            p = ((p % counts[a]) + counts[a]) % counts[a];
          } else {
            outside = true;
            break;
          }
        }
        at[a] = static_cast<std::size_t>(p);
      }
      if (outside) continue;
      acc += tap.weight * v[g.flatten(at)];
    }
    out[c] = acc;
    valid[c] = 1;
  }
  return MaskedField{TemperatureField(g, f.time(), std::move(out)), std::move(valid)};
}

/// f^eps at an arbitrary point x of U_eps, normalized by the discrete kernel mass at x.
inline double mollify_at(const TemperatureField& f, double epsilon, const Point& x) {
  const Grid& g = f.grid();
  if (!in_u_eps(g, x, epsilon)) throw InvalidInput("mollify_at: point is outside U_eps");
  if (epsilon < 4.0 * g.min_spacing() * (1.0 - 1e-12)) {
    throw InvalidInput("mollify_at: epsilon is smaller than 4 grid spacings");
  }
  const double e2 = epsilon * epsilon;
  double num = 0.0, mass = 0.0;
  for (std::size_t c = 0; c < g.size(); ++c) {
    const double r2 = squared_distance(x, g.center(c), g.dim()) / e2;
    if (r2 >= 1.0) continue;
    const double w = detail::bump(r2);
    num += w * f[c];
    mass += w;
  }
  return num / mass;
}

struct DerivativeNorm {
  int order = 0;
  double measured = 0.0;  // sup over U_eps of the m-th divided central difference
  double bound = 0.0;     // sup|f| * M_m / eps^m
};

/// Uniform bounds on discrete derivatives of f^eps over U_eps, orders 0..max_order,
/// maximized over axes.
inline std::vector<DerivativeNorm> smoothness_report(const TemperatureField& f,
                                                     const MollifierKernel& kernel,
                                                     int max_order) {
  if (max_order < 0) throw InvalidInput("smoothness_report: order must be >= 0");
  const MaskedField fe = mollify(f, kernel, MollifyDomain::interior);
  const Grid& g = f.grid();
  const double sup_f = f.max_abs();
  const std::vector<double> m_bounds = kernel.derivative_l1_bounds(max_order);
  std::vector<DerivativeNorm> report;
  for (int m = 0; m <= max_order; ++m) {
    std::vector<double> coeff(m + 1);
    for (int q = 0; q <= m; ++q) {
      coeff[q] = ((m - q) % 2 == 0 ? 1.0 : -1.0) * std::tgamma(m + 1.0) /
                 (std::tgamma(q + 1.0) * std::tgamma(m - q + 1.0));
    }
    double sup = 0.0;
    for (int a = 0; a < g.dim(); ++a) {
      const std::size_t s = g.stride(a);
      const double hm = std::pow(g.spacing(a), m);
      for (std::size_t c = 0; c < g.size(); ++c) {
        const Index idx = g.unflatten(c);
        if (idx[a] + static_cast<std::size_t>(m) >= g.count(a)) continue;
        bool ok = true;
        double diff = 0.0;
        for (int q = 0; q <= m; ++q) {
          const std::size_t cell = c + static_cast<std::size_t>(q) * s;
          if (!fe.is_valid(cell)) {
            ok = false;
            break;
          }
          diff += coeff[q] * fe.field[cell];
        }
        if (ok) sup = std::max(sup, std::abs(diff) / hm);
      }
    }
    report.push_back({m, sup, sup_f * m_bounds[m] / std::pow(kernel.epsilon(), m)});
  }
  return report;
}

struct ConvergenceSample {
  double epsilon = 0.0;
  double l2_error = 0.0;
};

/// ||f^eps - f||_{L^2(U_eps)} for each eps of a strictly decreasing sequence.
inline std::vector<ConvergenceSample> l2_convergence(const TemperatureField& f,
                                                     const std::vector<double>& epsilons) {
  for (std::size_t i = 1; i < epsilons.size(); ++i) {
    if (!(epsilons[i] < epsilons[i - 1])) {
      throw InvalidInput("l2_convergence: epsilon sequence must decrease strictly");
    }
  }
  const Grid& g = f.grid();
  std::vector<ConvergenceSample> out;
  for (double eps : epsilons) {
    const MaskedField fe = mollify(f, MollifierKernel::for_grid(eps, g));
    double sum = 0.0;
    for (std::size_t c = 0; c < g.size(); ++c) {
      if (!fe.is_valid(c)) continue;
      const double d = fe.field[c] - f[c];
      sum += d * d;
    }
    out.push_back({eps, std::sqrt(sum * g.cell_volume())});
  }
  return out;
}

}  // namespace stefan
