#pragma once

#include <atomic>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ssmspike/core/ops.hpp"
#include "ssmspike/core/parallel.hpp"
#include "ssmspike/core/tape.hpp"
#include "ssmspike/neurons/ssm_neuron.hpp"

namespace ssmspike::nn {

using Var = Tape::Var;

// ---------------------------------------------------------------------------
// Batch normalization over all rows (batch and time jointly) per channel.

struct BatchNormState {
  Matrix gamma;  // 1 x channels
  Matrix beta;   // 1 x channels
  Eigen::RowVectorXd running_mean;
  Eigen::RowVectorXd running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  static BatchNormState identity(Eigen::Index channels) {
    return BatchNormState{Matrix::Ones(1, channels), Matrix::Zero(1, channels),
                          Eigen::RowVectorXd::Zero(channels), Eigen::RowVectorXd::Ones(channels)};
  }
  Eigen::Index channels() const { return gamma.cols(); }
};

/// Train mode normalizes with the batch statistics and updates the running
/// estimates (unbiased variance); eval mode uses the running estimates.
inline Var batch_norm(Tape& t, Var x, Var gamma, Var beta, BatchNormState& st, bool train) {
  const Matrix& xv = t.value(x);
  const Eigen::Index rows = xv.rows(), ch = xv.cols();
  if (ch != st.channels()) throw ConfigError("batch_norm: channel count mismatch");
  const Eigen::RowVectorXd& g = t.value(gamma).row(0);
  const Eigen::RowVectorXd& bta = t.value(beta).row(0);

  if (!train) {
    Eigen::RowVectorXd inv = (st.running_var.array() + st.eps).rsqrt().matrix();
    Matrix out = ((xv.rowwise() - st.running_mean).array().rowwise() * (inv.array() * g.array())).matrix();
    out.rowwise() += bta;
    Eigen::RowVectorXd scale_v = (inv.array() * g.array()).matrix();
    Matrix xhat = ((xv.rowwise() - st.running_mean).array().rowwise() * inv.array()).matrix();
    return t.record(std::move(out), {x, gamma, beta},
                    [x, gamma, beta, scale_v, xhat](Tape& tp, const Matrix& go) {
                      if (tp.needs_grad(x)) tp.grad_buffer(x) += (go.array().rowwise() * scale_v.array()).matrix();
                      tp.accumulate(gamma, go.cwiseProduct(xhat).colwise().sum());
                      tp.accumulate(beta, go.colwise().sum());
                    },
                    "batch_norm_eval");
  }

  if (rows < 1) throw ConfigError("batch_norm: empty batch");
  const double nr = static_cast<double>(rows);
  Eigen::RowVectorXd mu = xv.colwise().mean();
  Matrix centered = xv.rowwise() - mu;
  Eigen::RowVectorXd var = centered.array().square().colwise().sum().matrix() / nr;
  Eigen::RowVectorXd inv = (var.array() + st.eps).rsqrt().matrix();
  Matrix xhat = (centered.array().rowwise() * inv.array()).matrix();
  Matrix out = (xhat.array().rowwise() * g.array()).matrix();
  out.rowwise() += bta;

  const double unbiased = rows > 1 ? nr / (nr - 1.0) : 1.0;
  st.running_mean = (1.0 - st.momentum) * st.running_mean + st.momentum * mu;
  st.running_var = (1.0 - st.momentum) * st.running_var + st.momentum * (var * unbiased);

  auto saved = std::make_shared<Matrix>(t.requires_grad() ? std::move(xhat) : Matrix());
  return t.record(std::move(out), {x, gamma, beta},
                  [x, gamma, beta, saved, inv, nr](Tape& tp, const Matrix& go) {
                    const Matrix& xh = *saved;
                    const Eigen::RowVectorXd gam = tp.value(gamma).row(0);
                    tp.accumulate(gamma, go.cwiseProduct(xh).colwise().sum());
                    tp.accumulate(beta, go.colwise().sum());
                    if (!tp.needs_grad(x)) return;
                    Matrix dxhat = (go.array().rowwise() * gam.array()).matrix();
                    Eigen::RowVectorXd sum_d = dxhat.colwise().sum();
                    Eigen::RowVectorXd sum_dx = dxhat.cwiseProduct(xh).colwise().sum();
                    Matrix dx = (dxhat * nr).rowwise() - sum_d;
                    dx -= (xh.array().rowwise() * sum_dx.array()).matrix();
                    dx = (dx.array().rowwise() * (inv.array() / nr)).matrix();
                    tp.grad_buffer(x) += dx;
                  },
                  "batch_norm");
}

// ---------------------------------------------------------------------------
// Fused multiple-output SSM layer over a whole sequence batch.

/// Per-call counters filled by `ssm_layer`.
struct LayerStats {
  std::size_t resets = 0;
  std::size_t clipped_steps = 0;
  /// Reset-condition evaluations that fell inside the surrogate window during
  /// the backward sweep.
  std::size_t reset_window_hits = 0;
};

/// Gradient sinks for one layer; these are tape parameter leaves holding the
/// complex parameters as interleaved (re, im) rows.
struct LayerParamVars {
  Var lambda, c, c_bias, rho, r_bias;
};

inline Matrix interleaved_row(std::span<const Complex> v) {
  Matrix m(1, static_cast<Eigen::Index>(2 * v.size()));
  for (std::size_t k = 0; k < v.size(); ++k) {
    m(0, static_cast<Eigen::Index>(2 * k)) = v[k].real();
    m(0, static_cast<Eigen::Index>(2 * k + 1)) = v[k].imag();
  }
  return m;
}

inline LayerParamVars layer_param_vars(Tape& t, const SsmNeuronLayerParams& p) {
  Matrix rb(1, static_cast<Eigen::Index>(p.r_bias.size()));
  for (std::size_t k = 0; k < p.r_bias.size(); ++k) rb(0, static_cast<Eigen::Index>(k)) = p.r_bias[k];
  return {t.parameter(interleaved_row(p.lambda), p.name + ".lambda"), t.parameter(interleaved_row(p.c), p.name + ".c"),
          t.parameter(interleaved_row(p.c_bias), p.name + ".c_bias"), t.parameter(interleaved_row(p.rho), p.name + ".rho"),
          t.parameter(std::move(rb), p.name + ".r_bias")};
}

/// Runs the layer over `currents` (rows t*batch + b, one column per neuron)
/// and returns the activations (rows t*batch + b, column j*n_out + k).
///
/// The backward closure performs the reverse sweep over time for every
/// neuron; `p` must stay alive and unchanged until `Tape::backward` returns.
/// Work is split across neurons, so results do not depend on `threads`.
inline Var ssm_layer(Tape& t, Var currents, const LayerParamVars& pv, const SsmNeuronLayerParams& p,
                     std::size_t steps, std::size_t batch, int threads = 1, LayerStats* stats = nullptr) {
  p.validate();
  const auto& cfg = p.config;
  const auto h = static_cast<std::size_t>(cfg.h), n = static_cast<std::size_t>(cfg.n),
             no = static_cast<std::size_t>(cfg.n_out);
  const Matrix& cur = t.value(currents);
  if (static_cast<std::size_t>(cur.rows()) != steps * batch || static_cast<std::size_t>(cur.cols()) != h)
    throw ConfigError("ssm_layer '" + p.name + "': currents must be (steps*batch) x h");
  const ActivationFn act{cfg.activation, cfg.surrogate};
  const bool keep = t.requires_grad();
  const int workers = cfg.shared_reset_params ? 1 : threads;

  Matrix out(static_cast<Eigen::Index>(steps * batch), static_cast<Eigen::Index>(h * no));
  // states[((t*batch + b)*h + j)*n + m] = v_t for (b, j)
  auto states = std::make_shared<ComplexVector>(keep ? steps * batch * h * n : 0);
  std::atomic<std::size_t> resets{0}, clipped{0};
  std::atomic<bool> bad{false};
  std::atomic<std::size_t> bad_step{0};

  parallel_for(h, workers, [&](std::size_t j0, std::size_t j1) {
    const std::size_t width = j1 - j0;
    ComplexVector v(batch * width * n), next(n), y(no);
    std::vector<double> z(no), s(no);
    std::size_t local_resets = 0, local_clipped = 0;
    for (std::size_t ts = 0; ts < steps && !bad; ++ts) {
      for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t row = ts * batch + b;
        const auto r = static_cast<Eigen::Index>(row);
        for (std::size_t j = j0; j < j1; ++j) {
          Complex* vj = v.data() + (b * width + (j - j0)) * n;
          if (keep) std::copy(vj, vj + n, states->begin() + static_cast<std::ptrdiff_t>((row * h + j) * n));
          const auto o = detail::neuron_forward(cfg, act, neuron_view(p, j), vj, cur(r, static_cast<Eigen::Index>(j)),
                                                y.data(), z.data(), s.data(), next.data());
          local_resets += o.reset > 0.5;
          local_clipped += o.clipped;
          for (std::size_t k = 0; k < no; ++k) out(r, static_cast<Eigen::Index>(j * no + k)) = s[k];
          for (std::size_t m = 0; m < n; ++m) {
            if (!std::isfinite(next[m].real()) || !std::isfinite(next[m].imag())) {
              if (!bad.exchange(true)) bad_step = ts;
            }
            vj[m] = next[m];
          }
        }
      }
    }
    resets += local_resets;
    clipped += local_clipped;
  });
  if (bad) throw NumericError("layer '" + p.name + "': non-finite state at timestep " + std::to_string(bad_step.load()));
  if (stats) {
    stats->resets += resets;
    stats->clipped_steps += clipped;
  }

  const SsmNeuronLayerParams* pp = &p;
  return t.record(
      std::move(out), {currents, pv.lambda, pv.c, pv.c_bias, pv.rho, pv.r_bias},
      [currents, pv, pp, states, steps, batch, workers, act, stats](Tape& tp, const Matrix& go) {
        const auto& cfgb = pp->config;
        const auto hb = static_cast<std::size_t>(cfgb.h), nb = static_cast<std::size_t>(cfgb.n),
                   nob = static_cast<std::size_t>(cfgb.n_out);
        const Matrix& curb = tp.value(currents);
        Matrix gcur = Matrix::Zero(curb.rows(), curb.cols());
        ComplexVector g_lambda(pp->lambda.size()), g_c(pp->c.size()), g_cb(pp->c_bias.size()), g_rho(pp->rho.size());
        std::vector<double> g_rb(pp->r_bias.size(), 0.0);
        std::atomic<std::size_t> hits{0};

        parallel_for(hb, workers, [&](std::size_t j0, std::size_t j1) {
          const std::size_t width = j1 - j0;
          detail::NeuronScratch sc;
          sc.resize(nb, nob);
          ComplexVector gv(batch * width * nb);
          std::vector<double> gs(nob);
          std::size_t local_hits = 0;
          for (std::size_t ts = steps; ts-- > 0;) {
            for (std::size_t b = 0; b < batch; ++b) {
              const std::size_t row = ts * batch + b;
              const auto r = static_cast<Eigen::Index>(row);
              for (std::size_t j = j0; j < j1; ++j) {
                const std::size_t ri = pp->reset_index(j);
                detail::NeuronGradSink sink{g_lambda.data() + j * nb, g_c.data() + j * nob * nb,
                                            g_cb.data() + j * nob, g_rho.data() + ri, g_rb.data() + ri};
                for (std::size_t k = 0; k < nob; ++k) gs[k] = go(r, static_cast<Eigen::Index>(j * nob + k));
                const Complex* v = states->data() + (row * hb + j) * nb;
                gcur(r, static_cast<Eigen::Index>(j)) =
                    detail::neuron_backward(cfgb, act, neuron_view(*pp, j), v, curb(r, static_cast<Eigen::Index>(j)),
                                            gs.data(), gv.data() + (b * width + (j - j0)) * nb, sink, sc, &local_hits);
              }
            }
          }
          hits += local_hits;
        });
        if (stats) stats->reset_window_hits += hits;
        tp.accumulate(currents, gcur);
        tp.accumulate(pv.lambda, interleaved_row(g_lambda));
        tp.accumulate(pv.c, interleaved_row(g_c));
        tp.accumulate(pv.c_bias, interleaved_row(g_cb));
        tp.accumulate(pv.rho, interleaved_row(g_rho));
        Matrix rb(1, static_cast<Eigen::Index>(g_rb.size()));
        for (std::size_t k = 0; k < g_rb.size(); ++k) rb(0, static_cast<Eigen::Index>(k)) = g_rb[k];
        tp.accumulate(pv.r_bias, rb);
      },
      "ssm_layer:" + p.name);
}

// ---------------------------------------------------------------------------

/// Sums rows t*batch + b over t < lengths[b]: (steps*batch) x c -> batch x c.
inline Var time_sum(Tape& t, Var x, std::size_t steps, std::size_t batch, std::span<const std::size_t> lengths) {
  const Matrix& xv = t.value(x);
  if (static_cast<std::size_t>(xv.rows()) != steps * batch || lengths.size() != batch)
    throw ConfigError("time_sum: shape mismatch");
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(batch), xv.cols());
  for (std::size_t ts = 0; ts < steps; ++ts)
    for (std::size_t b = 0; b < batch; ++b)
      if (ts < lengths[b]) out.row(static_cast<Eigen::Index>(b)) += xv.row(static_cast<Eigen::Index>(ts * batch + b));
  std::vector<std::size_t> len(lengths.begin(), lengths.end());
  return t.record(std::move(out), {x}, [x, steps, batch, len](Tape& tp, const Matrix& go) {
    if (!tp.needs_grad(x)) return;
    Matrix& gx = tp.grad_buffer(x);
    for (std::size_t ts = 0; ts < steps; ++ts)
      for (std::size_t b = 0; b < batch; ++b)
        if (ts < len[b]) gx.row(static_cast<Eigen::Index>(ts * batch + b)) += go.row(static_cast<Eigen::Index>(b));
  }, "time_sum");
}

}  // namespace ssmspike::nn
