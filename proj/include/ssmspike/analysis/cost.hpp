#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <vector>

#include "ssmspike/neurons/ssm_neuron.hpp"

namespace ssmspike::analysis {

/// Real-valued parameters of one neuron: Lambda, B, C, c_bias, rho, r_bias.
/// B is included even though it stays fixed at ones during training.
inline std::size_t count_params(int n, int n_out) {
  if (n < 1 || n_out < 1) throw ConfigError("count_params: n and n_out must be >= 1");
  return static_cast<std::size_t>(2 * n_out + 3) * static_cast<std::size_t>(n + 1);
}

struct ResetMacs {
  std::size_t condition = 0;  // m_rc
  std::size_t action = 0;     // m_ra
  std::size_t total = 0;      // m_r
};

/// One MAC is one real multiply or one real add; the square root of the
/// norm is not counted.
inline ResetMacs count_reset_macs(int n, int n_out) {
  if (n < 1 || n_out < 1) throw ConfigError("count_reset_macs: n and n_out must be >= 1");
  const auto rc = static_cast<std::size_t>(4 * n_out + 1);
  const auto ra = static_cast<std::size_t>(6 * n);
  return {rc, ra, rc + ra};
}

/// Real scalars stored per neuron of a layer, shared reset parameters excluded.
inline std::size_t neuron_scalar_count(const SsmNeuronLayerParams& p) {
  const auto& c = p.config;
  const auto n = static_cast<std::size_t>(c.n), no = static_cast<std::size_t>(c.n_out);
  const std::size_t per_neuron_reset = c.shared_reset_params ? 0 : 3;
  return 2 * n + n + 2 * n * no + 2 * no + per_neuron_reset;
}

// ---------------------------------------------------------------------------
// Operation counting.

struct OpCounter {
  std::size_t mul = 0;
  std::size_t add = 0;
  std::size_t total() const noexcept { return mul + add; }
};

namespace detail {
inline thread_local OpCounter* active_counter = nullptr;
}

/// Installs a counter for the current thread while in scope.
class CountingScope {
 public:
  explicit CountingScope(OpCounter& c) : prev_(detail::active_counter) { detail::active_counter = &c; }
  CountingScope(const CountingScope&) = delete;
  CountingScope& operator=(const CountingScope&) = delete;
  ~CountingScope() { detail::active_counter = prev_; }

 private:
  OpCounter* prev_;
};

/// Double that tallies every multiply and add/subtract into the active
/// OpCounter. Constructing from a constant is free.
struct Counted {
  double v = 0.0;
  Counted() = default;
  explicit Counted(double x) : v(x) {}

  friend Counted operator*(const Counted& a, const Counted& b) {
    if (detail::active_counter) ++detail::active_counter->mul;
    return Counted(a.v * b.v);
  }
  friend Counted operator+(const Counted& a, const Counted& b) {
    if (detail::active_counter) ++detail::active_counter->add;
    return Counted(a.v + b.v);
  }
  friend Counted operator-(const Counted& a, const Counted& b) {
    if (detail::active_counter) ++detail::active_counter->add;
    return Counted(a.v - b.v);
  }
  friend Counted sqrt(const Counted& a) { return Counted(std::sqrt(a.v)); }
};

struct InstrumentedReset {
  OpCounter condition;
  OpCounter action;
  std::size_t neurons_reset = 0;
  /// Largest deviation between the counted and the reference arithmetic.
  double max_deviation = 0.0;
};

/// Runs the reset condition and, where it fires, the reset action of every
/// neuron of one layer step through the counting scalar. `v_next` is the
/// post-transition state (h*n entries) and `y` the neuron outputs (h*n_out).
inline InstrumentedReset instrumented_reset_macs(const SsmNeuronLayerParams& p, std::span<const Complex> y,
                                                 std::span<const Complex> v_next) {
  const auto& cfg = p.config;
  const auto h = static_cast<std::size_t>(cfg.h), n = static_cast<std::size_t>(cfg.n),
             no = static_cast<std::size_t>(cfg.n_out);
  if (y.size() != h * no || v_next.size() != h * n) throw ConfigError("instrumented_reset_macs: shape mismatch");
  if (cfg.reset_norm != ResetNorm::complex_output)
    throw ConfigError("instrumented_reset_macs: only the complex-output norm is counted");
  InstrumentedReset out;
  std::vector<Counted> yc(2 * no), vc(2 * n);
  for (std::size_t j = 0; j < h; ++j) {
    for (std::size_t k = 0; k < no; ++k) {
      yc[2 * k] = Counted(y[j * no + k].real());
      yc[2 * k + 1] = Counted(y[j * no + k].imag());
    }
    const std::size_t ri = p.reset_index(j);
    Counted cond;
    {
      CountingScope scope(out.condition);
      cond = reset_condition_value<Counted>(yc.data(), no, Counted(p.r_bias[ri]));
    }
    const double ref = reset_condition_value<double>(reinterpret_cast<const double*>(y.data() + j * no), no, p.r_bias[ri]);
    out.max_deviation = std::max(out.max_deviation, std::abs(cond.v - ref));
    if (!(cond.v >= 1.0)) continue;
    ++out.neurons_reset;
    for (std::size_t m = 0; m < n; ++m) {
      vc[2 * m] = Counted(v_next[j * n + m].real());
      vc[2 * m + 1] = Counted(v_next[j * n + m].imag());
    }
    {
      CountingScope scope(out.action);
      reset_action_inplace<Counted>(Counted(p.rho[ri].real()), Counted(p.rho[ri].imag()), vc.data(), n);
    }
    for (std::size_t m = 0; m < n; ++m) {
      const Complex ref_v = p.rho[ri] * v_next[j * n + m];
      out.max_deviation = std::max(out.max_deviation, std::abs(Complex{vc[2 * m].v, vc[2 * m + 1].v} - ref_v));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

struct CostReport {
  int n = 0, n_out = 0, h = 0;
  std::size_t params_per_neuron = 0;
  std::size_t params_per_layer = 0;
  ResetMacs reset;
  std::size_t reset_macs_per_layer = 0;
  /// Multiply-accumulate pairs per step for one dense hidden-to-hidden
  /// junction (h targets reading h*n_out channels).
  std::size_t synaptic_macs_per_step = 0;
};

inline CostReport cost_report(int n, int n_out, int h) {
  if (h < 1) throw ConfigError("cost_report: h must be >= 1");
  CostReport r;
  r.n = n;
  r.n_out = n_out;
  r.h = h;
  r.params_per_neuron = count_params(n, n_out);
  r.params_per_layer = r.params_per_neuron * static_cast<std::size_t>(h);
  r.reset = count_reset_macs(n, n_out);
  r.reset_macs_per_layer = r.reset.total * static_cast<std::size_t>(h);
  r.synaptic_macs_per_step = static_cast<std::size_t>(h) * static_cast<std::size_t>(h) * static_cast<std::size_t>(n_out);
  return r;
}

inline constexpr const char* kCostHeader =
    "n,n_out,h,params_per_neuron,params_per_layer,m_rc,m_ra,m_r,m_r_per_layer,synaptic_macs_per_step";

inline void write_cost_csv(std::ostream& os, const CostReport& r) {
  os << kCostHeader << '\n'
     << r.n << ',' << r.n_out << ',' << r.h << ',' << r.params_per_neuron << ',' << r.params_per_layer << ','
     << r.reset.condition << ',' << r.reset.action << ',' << r.reset.total << ',' << r.reset_macs_per_layer << ','
     << r.synaptic_macs_per_step << '\n';
}

}  // namespace ssmspike::analysis
