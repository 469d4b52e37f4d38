#pragma once

// Neumann similarity solution of the one-phase Stefan problem
//   u_t = u_xx on 0 < x < s(t),  u(0, t) = 1,  u(s, t) = 0,  s' = -St u_x(s, t),
// with s(t) = 2 lambda sqrt(t) and lambda e^{lambda^2} erf(lambda) = St / sqrt(pi).

#include <cmath>
#include <numbers>

#include "stefan/error.hpp"
#include "stefan/format.hpp"

namespace stefan {

/// g(lambda) = lambda e^{lambda^2} erf(lambda), strictly increasing on (0, inf).
inline double similarity_transcendental(double lambda) {
  return lambda * std::exp(lambda * lambda) * std::erf(lambda);
}

class SimilaritySolution {
 public:
  static constexpr double kLower = 1e-8;
  static constexpr double kUpper = 10.0;

  explicit SimilaritySolution(double stefan_number) : st_(stefan_number) {
    if (!(stefan_number > 0.0) || !std::isfinite(stefan_number)) {
      throw InvalidInput("Stefan number must be positive, got " + format_real(stefan_number));
    }
    const double target = stefan_number / std::sqrt(std::numbers::pi);
    double lo = kLower, hi = kUpper;
    if (!(similarity_transcendental(lo) < target && similarity_transcendental(hi) > target)) {
      throw InvalidInput("Stefan number " + format_real(stefan_number) +
                         " has no root in the bracket [1e-8, 10]");
    }
    // Bisect to machine resolution; the interval width passes 1e-12 long before that.
    while (true) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      (similarity_transcendental(mid) < target ? lo : hi) = mid;
    }
    const double rlo = std::abs(similarity_transcendental(lo) - target);
    const double rhi = std::abs(similarity_transcendental(hi) - target);
    lambda_ = rlo <= rhi ? lo : hi;
    residual_ = std::min(rlo, rhi);
  }

  double stefan_number() const noexcept { return st_; }
  double lambda() const noexcept { return lambda_; }
  /// |g(lambda) - St/sqrt(pi)| at the returned root.
  double residual() const noexcept { return residual_; }

  double front(double t) const { return 2.0 * lambda_ * std::sqrt(t); }
  double front_velocity(double t) const { return lambda_ / std::sqrt(t); }

  /// u(x, t) = 1 - erf(x / 2 sqrt t) / erf(lambda) inside the liquid, 0 beyond the front.
  double temperature(double x, double t) const {
    if (x >= front(t)) return 0.0;
    return 1.0 - std::erf(x / (2.0 * std::sqrt(t))) / std::erf(lambda_);
  }

  double gradient(double x, double t) const {
    if (x > front(t)) return 0.0;
    return -std::exp(-x * x / (4.0 * t)) / (std::sqrt(std::numbers::pi * t) * std::erf(lambda_));
  }

  /// u_t = u_xx inside the liquid.
  double time_derivative(double x, double t) const {
    if (x >= front(t)) return 0.0;
    return x * std::exp(-x * x / (4.0 * t)) /
           (2.0 * std::sqrt(std::numbers::pi) * std::pow(t, 1.5) * std::erf(lambda_));
  }

 private:
  double st_;
  double lambda_ = 0.0;
  double residual_ = 0.0;
};

}  // namespace stefan
