#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

#include "ssmspike/core/errors.hpp"
#include "ssmspike/core/types.hpp"

namespace ssmspike {

/// Surrogate configuration shared by the spiking and reset Heavisides.
struct SurrogateConfig {
  double half_width = 0.5;
  /// Replace every Heaviside by its boxcar integral (a clamped ramp) in the
  /// forward pass. Used for finite-difference checks of the BPTT sweep.
  bool smooth = false;

  void validate() const {
    if (!(half_width > 0.0)) throw ConfigError("surrogate half-width must be > 0");
  }
};

/// 1 iff x > theta.
inline double heaviside(double x, double theta) { return x > theta ? 1.0 : 0.0; }

/// 1 iff x >= theta. The reset condition uses the closed comparison.
inline double heaviside_closed(double x, double theta) { return x >= theta ? 1.0 : 0.0; }

inline double boxcar_surrogate(double x, double theta, double w) {
  if (!(w > 0.0)) throw ConfigError("boxcar half-width must be > 0");
  return std::abs(x - theta) <= w ? 1.0 / (2.0 * w) : 0.0;
}

/// Unchecked variant for inner loops (width validated once by SurrogateConfig).
inline double boxcar_unchecked(double x, double theta, double w) noexcept {
  return std::abs(x - theta) <= w ? 0.5 / w : 0.0;
}

/// Integral of the boxcar: 0 below theta-w, 1 above theta+w, linear between.
inline double soft_step(double x, double theta, double w) noexcept {
  const double r = (x - theta + w) / (2.0 * w);
  return r <= 0.0 ? 0.0 : (r >= 1.0 ? 1.0 : r);
}

inline double signed_spike(double x, double theta) {
  if (x > theta) return 1.0;
  if (x < -theta) return -1.0;
  return 0.0;
}

inline double signed_spike_surrogate(double x, double theta, double w) noexcept {
  return boxcar_unchecked(x, theta, w) + boxcar_unchecked(x, -theta, w);
}

inline double soft_signed_spike(double x, double theta, double w) noexcept {
  return soft_step(x, theta, w) - soft_step(-x, theta, w);
}

inline double gelu(double x) noexcept { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

inline double gelu_grad(double x) noexcept {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

/// Spiking nonlinearity with threshold 1 and its backward derivative.
struct ActivationFn {
  Activation kind = Activation::nonsigned;
  SurrogateConfig surrogate{};

  double forward(double z) const noexcept {
    switch (kind) {
      case Activation::nonsigned:
        return surrogate.smooth ? soft_step(z, 1.0, surrogate.half_width) : heaviside(z, 1.0);
      case Activation::signed_spike:
        return surrogate.smooth ? soft_signed_spike(z, 1.0, surrogate.half_width) : signed_spike(z, 1.0);
      case Activation::gelu:
        return gelu(z);
    }
    return 0.0;
  }

  double backward(double z) const noexcept {
    switch (kind) {
      case Activation::nonsigned: return boxcar_unchecked(z, 1.0, surrogate.half_width);
      case Activation::signed_spike: return signed_spike_surrogate(z, 1.0, surrogate.half_width);
      case Activation::gelu: return gelu_grad(z);
    }
    return 0.0;
  }
};

inline double l2_norm(std::span<const Complex> y) {
  double sq = 0.0;
  for (const auto& v : y) sq += v.real() * v.real() + v.imag() * v.imag();
  return std::sqrt(sq);
}

inline double l2_norm(std::span<const double> y) {
  double sq = 0.0;
  for (double v : y) sq += v * v;
  return std::sqrt(sq);
}

/// Central differences, one coordinate at a time. Throws NumericError if f
/// returns a non-finite value at any probe.
inline std::vector<double> finite_difference_grad(const std::function<double(std::span<const double>)>& f,
                                                  std::span<const double> x, double eps) {
  if (!(eps > 0.0)) throw ConfigError("finite difference step must be > 0");
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> grad(x.size(), 0.0);
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double orig = probe[k];
    probe[k] = orig + eps;
    const double up = f(probe);
    probe[k] = orig - eps;
    const double down = f(probe);
    probe[k] = orig;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw NumericError("finite_difference_grad: non-finite function value at coordinate " + std::to_string(k));
    grad[k] = (up - down) / (2.0 * eps);
  }
  return grad;
}

}  // namespace ssmspike
