#pragma once

#include <cmath>
#include <limits>
#include <algorithm>
#include <numbers>
#include <random>
#include <span>
#include <utility>

#include "ssmspike/core/errors.hpp"
#include "ssmspike/core/types.hpp"
#include "ssmspike/neurons/ssm_neuron.hpp"

namespace ssmspike::init {

struct InitConfig {
  int n = 8;
  double delta_min = 1e-3;
  double delta_max = 1e-1;
  std::uint64_t seed = 0;
  Regime regime = Regime::stable;

  void validate() const {
    if (n < 1) throw ConfigError("state dimension must be >= 1");
    if (!(delta_min > 0.0) || !(delta_min <= delta_max)) throw ConfigError("need 0 < delta_min <= delta_max");
  }
};

/// Bilinear (Tustin) map of a continuous eigenvalue with step delta.
inline Complex bilinear(Complex lambda, double delta) {
  const Complex half = 0.5 * delta * lambda;
  return (1.0 + half) / (1.0 - half);
}

/// Continuous S4D-Lin eigenvalue for index k: -1/2 + i*pi*k.
inline Complex s4d_lin_continuous(int k) { return {-0.5, std::numbers::pi * k}; }

/// Log-uniform draw in [lo, hi].
inline double log_uniform(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

/// Discrete eigenvalues of one neuron: one delta per neuron, shared by its n
/// eigenvalues; no conjugate pairs.
inline ComplexVector s4d_lin_init(const InitConfig& cfg, Rng& rng) {
  cfg.validate();
  const double delta = log_uniform(rng, cfg.delta_min, cfg.delta_max);
  ComplexVector out(static_cast<std::size_t>(cfg.n));
  for (int k = 0; k < cfg.n; ++k) out[static_cast<std::size_t>(k)] = bilinear(s4d_lin_continuous(k), delta);
  return out;
}

inline ComplexVector s4d_lin_init(const InitConfig& cfg) {
  Rng rng(cfg.seed);
  return s4d_lin_init(cfg, rng);
}

/// Scales every second eigenvalue (positions 1, 3, 5, ...) by `factor`.
inline ComplexVector destabilize(ComplexVector lambda, double factor = 1.5) {
  for (std::size_t m = 1; m < lambda.size(); m += 2) lambda[m] *= factor;
  return lambda;
}

/// Rescales entries with modulus > 1 onto the unit circle, keeping the phase.
/// The result never exceeds 1 after rounding.
inline void clip_eigenvalues_inplace(std::span<Complex> lambda) {
  for (auto& l : lambda) {
    if (std::abs(l) <= 1.0) continue;
    l = std::polar(1.0, std::arg(l));
    while (std::abs(l) > 1.0) l *= 1.0 - std::numeric_limits<double>::epsilon();
  }
}

inline ComplexVector clip_eigenvalues(ComplexVector lambda) {
  clip_eigenvalues_inplace(lambda);
  return lambda;
}

inline double max_modulus(std::span<const Complex> lambda) {
  double m = 0.0;
  for (const auto& l : lambda) m = std::max(m, std::abs(l));
  return m;
}

/// C with i.i.d. standard-normal real and imaginary parts (row-major
/// n_out x n); c_bias all zeros.
inline std::pair<ComplexVector, ComplexVector> init_projection(int n, int n_out, Rng& rng) {
  if (n < 1 || n_out < 1) throw ConfigError("projection dimensions must be >= 1");
  std::normal_distribution<double> normal(0.0, 1.0);
  ComplexVector c(static_cast<std::size_t>(n) * static_cast<std::size_t>(n_out));
  for (auto& x : c) {
    const double re = normal(rng);
    const double im = normal(rng);
    x = {re, im};
  }
  return {std::move(c), ComplexVector(static_cast<std::size_t>(n_out))};
}

inline std::pair<ComplexVector, ComplexVector> init_projection(int n, int n_out, std::uint64_t seed) {
  Rng rng(seed);
  return init_projection(n, n_out, rng);
}

struct LayerInit {
  double delta_min = 1e-3;
  double delta_max = 1e-1;
  double destabilize_factor = 1.5;
  Complex rho{0.5, 0.0};
  double r_bias = 0.0;
};

/// Fills every neuron of a layer: S4D-Lin eigenvalues (destabilized in the
/// unstable regime), Gaussian C, zero c_bias, B = 1, and the reset constants.
inline void initialize_layer(SsmNeuronLayerParams& p, const LayerInit& li, Rng& rng) {
  const auto& cfg = p.config;
  p = SsmNeuronLayerParams(cfg, p.name);
  const auto n = static_cast<std::size_t>(cfg.n), no = static_cast<std::size_t>(cfg.n_out);
  InitConfig ic{cfg.n, li.delta_min, li.delta_max, 0, cfg.regime};
  for (std::size_t j = 0; j < static_cast<std::size_t>(cfg.h); ++j) {
    auto lam = s4d_lin_init(ic, rng);
    if (cfg.regime == Regime::unstable) lam = destabilize(std::move(lam), li.destabilize_factor);
    std::copy(lam.begin(), lam.end(), p.lambda.begin() + static_cast<std::ptrdiff_t>(j * n));
    auto [c, cb] = init_projection(cfg.n, cfg.n_out, rng);
    std::copy(c.begin(), c.end(), p.c.begin() + static_cast<std::ptrdiff_t>(j * no * n));
    std::copy(cb.begin(), cb.end(), p.c_bias.begin() + static_cast<std::ptrdiff_t>(j * no));
  }
  std::fill(p.rho.begin(), p.rho.end(), li.rho);
  std::fill(p.r_bias.begin(), p.r_bias.end(), li.r_bias);
}

}  // namespace ssmspike::init
