#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ssmspike/core/errors.hpp"
#include "ssmspike/core/scalar.hpp"
#include "ssmspike/core/types.hpp"

namespace ssmspike {

/// Which vector the reset-condition norm is taken over.
enum class ResetNorm {
  complex_output,   // ||y||_2 over the complex outputs (sum of squared moduli)
  real_projection,  // ||Re y + Im y||_2, the quantity fed to the spiking function
};

struct SsmLayerConfig {
  int h = 1;      // neurons in the layer
  int n = 1;      // state dimension per neuron
  int n_out = 1;  // output channels per neuron
  Activation activation = Activation::nonsigned;
  Regime regime = Regime::stable;
  bool reset_enabled = true;
  /// One rho / r_bias for the whole layer instead of one per neuron.
  bool shared_reset_params = false;
  ResetNorm reset_norm = ResetNorm::complex_output;
  SurrogateConfig surrogate{};
  /// Per-component modulus bound on the state, unstable regime only.
  double state_clip = 1000.0;

  void validate() const {
    if (h < 1 || n < 1 || n_out < 1) throw ConfigError("SSM layer dimensions must be >= 1");
    if (!(state_clip > 0.0)) throw ConfigError("state clip must be > 0");
    surrogate.validate();
  }

  bool clips_state() const noexcept { return regime == Regime::unstable; }
};

/// Parameters of one hidden layer of h multiple-output SSM neurons.
///
/// Layout (neuron j):
///   lambda[j*n + m]                 diagonal of the state transition
///   b[j*n + m]                      input vector, fixed to ones
///   c[(j*n_out + k)*n + m]          output projection, row k
///   c_bias[j*n_out + k]
///   rho[j] / r_bias[j]              (index 0 when shared)
struct SsmNeuronLayerParams {
  SsmLayerConfig config;
  std::string name = "hidden";
  ComplexVector lambda;
  std::vector<double> b;
  ComplexVector c;
  ComplexVector c_bias;
  ComplexVector rho;
  std::vector<double> r_bias;

  SsmNeuronLayerParams() = default;

  explicit SsmNeuronLayerParams(const SsmLayerConfig& cfg, std::string layer_name = "hidden")
      : config(cfg), name(std::move(layer_name)) {
    cfg.validate();
    const auto h = static_cast<std::size_t>(cfg.h), n = static_cast<std::size_t>(cfg.n),
               no = static_cast<std::size_t>(cfg.n_out);
    lambda.assign(h * n, Complex{});
    b.assign(h * n, 1.0);
    c.assign(h * no * n, Complex{});
    c_bias.assign(h * no, Complex{});
    const std::size_t reset_slots = cfg.shared_reset_params ? 1 : h;
    rho.assign(reset_slots, Complex{0.5, 0.0});
    r_bias.assign(reset_slots, 0.0);
  }

  std::size_t reset_index(std::size_t j) const noexcept { return config.shared_reset_params ? 0 : j; }

  void validate() const {
    config.validate();
    const auto h = static_cast<std::size_t>(config.h), n = static_cast<std::size_t>(config.n),
               no = static_cast<std::size_t>(config.n_out);
    const std::size_t slots = config.shared_reset_params ? 1 : h;
    if (lambda.size() != h * n || b.size() != h * n || c.size() != h * no * n || c_bias.size() != h * no ||
        rho.size() != slots || r_bias.size() != slots)
      throw ConfigError("layer '" + name + "': parameter shapes do not match its configuration");
  }
};

/// Read-only view of one neuron inside a layer.
struct NeuronView {
  std::size_t n = 0;
  std::size_t n_out = 0;
  const Complex* lambda = nullptr;
  const double* b = nullptr;
  const Complex* c = nullptr;  // n_out x n, row-major
  const Complex* c_bias = nullptr;
  Complex rho{};
  double r_bias = 0.0;
};

inline NeuronView neuron_view(const SsmNeuronLayerParams& p, std::size_t j) {
  const auto n = static_cast<std::size_t>(p.config.n), no = static_cast<std::size_t>(p.config.n_out);
  return NeuronView{n,
                    no,
                    p.lambda.data() + j * n,
                    p.b.data() + j * n,
                    p.c.data() + j * no * n,
                    p.c_bias.data() + j * no,
                    p.rho[p.reset_index(j)],
                    p.r_bias[p.reset_index(j)]};
}

// ---------------------------------------------------------------------------
// Arithmetic kernels, generic over the scalar type so the MAC counter can run
// the exact code path. Complex vectors are passed interleaved (re, im).

/// (1/n_out) * ||y||_2 + r_bias, with y given as n_out interleaved pairs.
template <class T>
T reset_condition_value(const T* y, std::size_t n_out, const T& r_bias) {
  using std::sqrt;
  T sq = y[0] * y[0] + y[1] * y[1];
  for (std::size_t k = 1; k < n_out; ++k) sq = sq + (y[2 * k] * y[2 * k] + y[2 * k + 1] * y[2 * k + 1]);
  const T inv = T(1.0 / static_cast<double>(n_out));
  return sqrt(sq) * inv + r_bias;
}

/// v_k <- rho * v_k for n interleaved complex entries.
template <class T>
void reset_action_inplace(const T& rho_re, const T& rho_im, T* v, std::size_t n) {
  for (std::size_t m = 0; m < n; ++m) {
    const T re = v[2 * m], im = v[2 * m + 1];
    v[2 * m] = rho_re * re - rho_im * im;
    v[2 * m + 1] = rho_re * im + rho_im * re;
  }
}

// ---------------------------------------------------------------------------
// Per-neuron operations on std::complex storage.

/// v' = diag(lambda) v + b * i.
inline ComplexVector state_transition(const NeuronView& nv, std::span<const Complex> v, double i) {
  if (v.size() != nv.n) throw ConfigError("state_transition: state dimension mismatch");
  if (!std::isfinite(i)) throw NumericError("state_transition: non-finite input");
  ComplexVector out(nv.n);
  for (std::size_t m = 0; m < nv.n; ++m) out[m] = nv.lambda[m] * v[m] + nv.b[m] * i;
  return out;
}

struct Projection {
  ComplexVector y;
  std::vector<double> z;  // Re y + Im y
};

inline Projection output_projection(const NeuronView& nv, std::span<const Complex> v) {
  if (v.size() != nv.n) throw ConfigError("output_projection: state dimension mismatch");
  Projection p{ComplexVector(nv.n_out), std::vector<double>(nv.n_out)};
  for (std::size_t k = 0; k < nv.n_out; ++k) {
    Complex acc = nv.c_bias[k];
    for (std::size_t m = 0; m < nv.n; ++m) acc += nv.c[k * nv.n + m] * v[m];
    p.y[k] = acc;
    p.z[k] = acc.real() + acc.imag();
  }
  return p;
}

inline std::vector<double> spike(std::span<const double> z, const ActivationFn& fn) {
  std::vector<double> s(z.size());
  std::transform(z.begin(), z.end(), s.begin(), [&](double v) { return fn.forward(v); });
  return s;
}

inline double reset_condition_value(const NeuronView& nv, std::span<const Complex> y) {
  if (y.size() != nv.n_out || nv.n_out == 0) throw ConfigError("reset_condition: output dimension mismatch");
  return reset_condition_value(reinterpret_cast<const double*>(y.data()), nv.n_out, nv.r_bias);
}

/// True iff (1/n_out) ||y||_2 + r_bias >= 1.
inline bool reset_condition(const NeuronView& nv, std::span<const Complex> y) {
  return reset_condition_value(nv, y) >= 1.0;
}

inline ComplexVector reset_action(Complex rho, std::span<const Complex> v) {
  ComplexVector out(v.begin(), v.end());
  reset_action_inplace(rho.real(), rho.imag(), reinterpret_cast<double*>(out.data()), out.size());
  return out;
}

// ---------------------------------------------------------------------------
// Fused step used by both the single-sequence API and the batched tape op.

namespace detail {

inline double abs_sq(Complex a) { return a.real() * a.real() + a.imag() * a.imag(); }

/// Everything a forward step produces for one neuron.
struct NeuronStepOut {
  double cond = 0.0;   // reset-condition value (before the >= 1 test)
  double reset = 0.0;  // 1/0, or the soft-step value in smooth mode
  bool clipped = false;
};

/// Computes y/z/spikes from v, then v_next (transition, optional reset, clip).
/// `y`, `z`, `s` have n_out entries; `v_next` has n.
inline NeuronStepOut neuron_forward(const SsmLayerConfig& cfg, const ActivationFn& act, const NeuronView& nv,
                                    const Complex* v, double i, Complex* y, double* z, double* s,
                                    Complex* v_next) {
  const std::size_t n = nv.n, no = nv.n_out;
  for (std::size_t k = 0; k < no; ++k) {
    Complex acc = nv.c_bias[k];
    const Complex* row = nv.c + k * n;
    for (std::size_t m = 0; m < n; ++m) acc += row[m] * v[m];
    y[k] = acc;
    z[k] = acc.real() + acc.imag();
    s[k] = act.forward(z[k]);
  }
  for (std::size_t m = 0; m < n; ++m) v_next[m] = nv.lambda[m] * v[m] + nv.b[m] * i;

  NeuronStepOut out;
  if (cfg.reset_enabled) {
    if (cfg.reset_norm == ResetNorm::complex_output) {
      out.cond = reset_condition_value(reinterpret_cast<const double*>(y), no, nv.r_bias);
    } else {
      out.cond = l2_norm(std::span<const double>(z, no)) / static_cast<double>(no) + nv.r_bias;
    }
    if (cfg.surrogate.smooth) {
      out.reset = soft_step(out.cond, 1.0, cfg.surrogate.half_width);
      const Complex gain = (1.0 - out.reset) + out.reset * nv.rho;
      for (std::size_t m = 0; m < n; ++m) v_next[m] *= gain;
    } else if (out.cond >= 1.0) {
      out.reset = 1.0;
      reset_action_inplace(nv.rho.real(), nv.rho.imag(), reinterpret_cast<double*>(v_next), n);
    }
  }
  if (cfg.clips_state()) {
    const double bound_sq = cfg.state_clip * cfg.state_clip;
    for (std::size_t m = 0; m < n; ++m) {
      const double sq = abs_sq(v_next[m]);
      if (sq > bound_sq) {
        v_next[m] *= cfg.state_clip / std::sqrt(sq);
        out.clipped = true;
      }
    }
  }
  return out;
}

/// Gradient accumulators for one neuron (reset slots may be shared).
struct NeuronGradSink {
  Complex* lambda = nullptr;
  Complex* c = nullptr;
  Complex* c_bias = nullptr;
  Complex* rho = nullptr;
  double* r_bias = nullptr;
};

/// Scratch buffers reused across steps (sizes n / n_out).
struct NeuronScratch {
  ComplexVector u, w, y, gy, gu;
  std::vector<double> z;

  void resize(std::size_t n, std::size_t no) {
    u.resize(n);
    w.resize(n);
    gu.resize(n);
    y.resize(no);
    gy.resize(no);
    z.resize(no);
  }
};

/// Reverse of `neuron_forward` for one step.
///
/// Complex gradients use the convention g = dL/dRe + i dL/dIm, so for
/// w = a * u the input gradient is g_w * conj(a).
///
/// In:  v (state at t), i (input at t), gs (dL/ds_t), gv (dL/dv_{t+1}).
/// Out: gv overwritten with dL/dv_t, returns dL/di_t. Returns the number of
/// reset-condition surrogate windows hit through `window_hits`.
inline double neuron_backward(const SsmLayerConfig& cfg, const ActivationFn& act, const NeuronView& nv,
                              const Complex* v, double i, const double* gs, Complex* gv, NeuronGradSink sink,
                              NeuronScratch& sc, std::size_t* window_hits) {
  const std::size_t n = nv.n, no = nv.n_out;
  const double hw = cfg.surrogate.half_width;

  for (std::size_t k = 0; k < no; ++k) {
    Complex acc = nv.c_bias[k];
    const Complex* row = nv.c + k * n;
    for (std::size_t m = 0; m < n; ++m) acc += row[m] * v[m];
    sc.y[k] = acc;
    sc.z[k] = acc.real() + acc.imag();
  }
  for (std::size_t m = 0; m < n; ++m) sc.u[m] = nv.lambda[m] * v[m] + nv.b[m] * i;

  // Same arithmetic as the forward pass, so threshold decisions agree.
  double cond = 0.0, r = 0.0, ynorm = 0.0;
  std::copy(sc.u.begin(), sc.u.begin() + static_cast<std::ptrdiff_t>(n), sc.w.begin());
  if (cfg.reset_enabled) {
    if (cfg.reset_norm == ResetNorm::complex_output) {
      cond = reset_condition_value(reinterpret_cast<const double*>(sc.y.data()), no, nv.r_bias);
      ynorm = l2_norm(std::span<const Complex>(sc.y.data(), no));
    } else {
      ynorm = l2_norm(std::span<const double>(sc.z.data(), no));
      cond = ynorm / static_cast<double>(no) + nv.r_bias;
    }
    if (cfg.surrogate.smooth) {
      r = soft_step(cond, 1.0, hw);
      const Complex g = (1.0 - r) + r * nv.rho;
      for (std::size_t m = 0; m < n; ++m) sc.w[m] *= g;
    } else if (cond >= 1.0) {
      r = 1.0;
      reset_action_inplace(nv.rho.real(), nv.rho.imag(), reinterpret_cast<double*>(sc.w.data()), n);
    }
  }
  const Complex gain = cfg.reset_enabled ? (1.0 - r) + r * nv.rho : Complex{1.0, 0.0};

  // Saturated components pass no gradient.
  if (cfg.clips_state()) {
    const double bound_sq = cfg.state_clip * cfg.state_clip;
    for (std::size_t m = 0; m < n; ++m)
      if (abs_sq(sc.w[m]) > bound_sq) gv[m] = Complex{};
  }

  // Through the reset multiplexer: value path and the condition surrogate.
  double g_cond = 0.0;
  if (cfg.reset_enabled) {
    Complex g_rho{};
    double g_r = 0.0;
    for (std::size_t m = 0; m < n; ++m) {
      g_rho += gv[m] * std::conj(sc.u[m]);
      const Complex dw_dr = (nv.rho - 1.0) * sc.u[m];
      g_r += (gv[m] * std::conj(dw_dr)).real();
    }
    *sink.rho += r * g_rho;
    const double sg = boxcar_unchecked(cond, 1.0, hw);
    if (sg != 0.0 && window_hits) ++*window_hits;
    g_cond = g_r * sg;
    *sink.r_bias += g_cond;
  }
  const Complex conj_gain = std::conj(gain);
  for (std::size_t m = 0; m < n; ++m) sc.gu[m] = gv[m] * conj_gain;

  // Output gradient: spiking function plus the norm in the condition.
  for (std::size_t k = 0; k < no; ++k) {
    const double gz = gs[k] * act.backward(sc.z[k]);
    sc.gy[k] = Complex{gz, gz};
  }
  if (g_cond != 0.0 && ynorm > 0.0) {
    const double coef = g_cond / (static_cast<double>(no) * ynorm);
    if (cfg.reset_norm == ResetNorm::complex_output) {
      for (std::size_t k = 0; k < no; ++k) sc.gy[k] += coef * sc.y[k];
    } else {
      for (std::size_t k = 0; k < no; ++k) sc.gy[k] += Complex{coef * sc.z[k], coef * sc.z[k]};
    }
  }

  // y = C v + c_bias
  for (std::size_t m = 0; m < n; ++m) gv[m] = Complex{};
  for (std::size_t k = 0; k < no; ++k) {
    const Complex g = sc.gy[k];
    sink.c_bias[k] += g;
    const Complex* row = nv.c + k * n;
    Complex* grow = sink.c + k * n;
    for (std::size_t m = 0; m < n; ++m) {
      grow[m] += g * std::conj(v[m]);
      gv[m] += g * std::conj(row[m]);
    }
  }
  // u = lambda v + b i
  double gi = 0.0;
  for (std::size_t m = 0; m < n; ++m) {
    sink.lambda[m] += sc.gu[m] * std::conj(v[m]);
    gv[m] += sc.gu[m] * std::conj(nv.lambda[m]);
    gi += nv.b[m] * sc.gu[m].real();
  }
  return gi;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Single-sequence API.

struct LayerState {
  std::size_t h = 0, n = 0;
  ComplexVector v;  // h x n
  std::size_t t = 0;

  static LayerState zeros(const SsmLayerConfig& cfg) {
    const auto h = static_cast<std::size_t>(cfg.h), n = static_cast<std::size_t>(cfg.n);
    return LayerState{h, n, ComplexVector(h * n), 0};
  }
};

struct StepRecord {
  ComplexVector y;              // h x n_out
  std::vector<double> z;        // h x n_out
  std::vector<double> spikes;   // h x n_out
  std::vector<double> cond;     // h
  std::vector<uint8_t> reset;   // h
  std::vector<uint8_t> clipped; // h
};

/// Advances every neuron of the layer by one step. Throws NumericError
/// naming the layer and timestep if the new state is not finite.
inline StepRecord layer_step(const SsmNeuronLayerParams& p, LayerState& state, std::span<const double> inputs) {
  const auto& cfg = p.config;
  const auto h = static_cast<std::size_t>(cfg.h), n = static_cast<std::size_t>(cfg.n),
             no = static_cast<std::size_t>(cfg.n_out);
  if (inputs.size() != h) throw ConfigError("layer_step: expected one input per neuron");
  if (state.v.size() != h * n) throw ConfigError("layer_step: state shape mismatch");
  const ActivationFn act{cfg.activation, cfg.surrogate};
  StepRecord rec{ComplexVector(h * no), std::vector<double>(h * no), std::vector<double>(h * no),
                 std::vector<double>(h), std::vector<uint8_t>(h), std::vector<uint8_t>(h)};
  ComplexVector next(h * n);
  for (std::size_t j = 0; j < h; ++j) {
    const auto nv = neuron_view(p, j);
    const auto o = detail::neuron_forward(cfg, act, nv, state.v.data() + j * n, inputs[j], rec.y.data() + j * no,
                                          rec.z.data() + j * no, rec.spikes.data() + j * no, next.data() + j * n);
    rec.cond[j] = o.cond;
    rec.reset[j] = o.reset > 0.5;
    rec.clipped[j] = o.clipped;
  }
  for (const auto& x : next)
    if (!std::isfinite(x.real()) || !std::isfinite(x.imag()))
      throw NumericError("layer '" + p.name + "': non-finite state at timestep " + std::to_string(state.t));
  state.v = std::move(next);
  ++state.t;
  return rec;
}

struct Trajectory {
  std::vector<ComplexVector> states;  // T + 1 entries, states[0] is the initial state
  std::vector<StepRecord> steps;      // T entries
};

/// Unrolls `layer_step` over a T x h input sequence.
inline Trajectory sequence_forward(const SsmNeuronLayerParams& p, const Matrix& inputs,
                                   std::optional<ComplexVector> initial_state = std::nullopt) {
  if (inputs.rows() < 1) throw ConfigError("sequence_forward: need at least one timestep");
  if (inputs.cols() != p.config.h) throw ConfigError("sequence_forward: input width must equal h");
  LayerState state = LayerState::zeros(p.config);
  if (initial_state) {
    if (initial_state->size() != state.v.size()) throw ConfigError("sequence_forward: initial state shape mismatch");
    state.v = *initial_state;
  }
  Trajectory tr;
  tr.states.reserve(static_cast<std::size_t>(inputs.rows()) + 1);
  tr.states.push_back(state.v);
  std::vector<double> row(static_cast<std::size_t>(p.config.h));
  for (Eigen::Index t = 0; t < inputs.rows(); ++t) {
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = inputs(t, static_cast<Eigen::Index>(j));
    tr.steps.push_back(layer_step(p, state, row));
    tr.states.push_back(state.v);
  }
  return tr;
}

}  // namespace ssmspike
