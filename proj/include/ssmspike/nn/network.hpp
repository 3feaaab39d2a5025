#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ssmspike/core/ops.hpp"
#include "ssmspike/neurons/init.hpp"
#include "ssmspike/nn/layers.hpp"

namespace ssmspike::nn {

/// Optimizer parameter groups; each has its own learning rate and decay.
enum class ParamGroup { ssm, other, rho, r_bias, fixed };

inline const char* to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::ssm: return "ssm";
    case ParamGroup::other: return "other";
    case ParamGroup::rho: return "rho";
    case ParamGroup::r_bias: return "r_bias";
    case ParamGroup::fixed: return "fixed";
  }
  return "?";
}

struct NetworkConfig {
  int c_in = 1;
  int c_out = 2;
  int num_hidden_layers = 2;
  int h = 32;
  int n = 4;
  int n_out = 4;
  Activation activation = Activation::nonsigned;
  Regime regime = Regime::stable;
  bool reset_enabled = true;
  double dropout = 0.0;
  bool batch_norm = true;
  bool shared_reset_params = false;
  ResetNorm reset_norm = ResetNorm::complex_output;
  SurrogateConfig surrogate{};
  double state_clip = 1000.0;
  double delta_min = 1e-3;
  double delta_max = 1e-1;
  Complex rho_init{0.5, 0.0};
  double r_bias_init = 0.0;

  void validate() const {
    if (c_in < 1 || c_out < 1 || num_hidden_layers < 1 || h < 1 || n < 1 || n_out < 1)
      throw ConfigError("network: all counts must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("network: dropout must be in [0, 1)");
    if (!(delta_min > 0.0 && delta_min <= delta_max)) throw ConfigError("network: need 0 < delta_min <= delta_max");
    surrogate.validate();
  }

  SsmLayerConfig layer_config() const {
    SsmLayerConfig lc;
    lc.h = h;
    lc.n = n;
    lc.n_out = n_out;
    lc.activation = activation;
    lc.regime = regime;
    lc.reset_enabled = reset_enabled;
    lc.shared_reset_params = shared_reset_params;
    lc.reset_norm = reset_norm;
    lc.surrogate = surrogate;
    lc.state_clip = state_clip;
    return lc;
  }
};

/// Real parameter tensor with its gradient buffer.
struct Dense {
  std::string name;
  Matrix value;
  Matrix grad;
};

struct LayerGrads {
  ComplexVector lambda, c, c_bias, rho;
  std::vector<double> r_bias;
};

/// A flat view of one parameter tensor, used by the optimizer and checkpoints.
/// Complex tensors appear as their interleaved (re, im) doubles.
struct ParamSlot {
  std::string name;
  ParamGroup group;
  std::span<double> value;
  std::span<double> grad;
  bool is_complex = false;
  /// Index of the hidden layer whose eigenvalues this slot holds, else -1.
  int lambda_layer = -1;
};

/// Which output channels of every neuron to silence at evaluation time.
struct ChannelDrop {
  enum class Which { first, last };
  Which which = Which::first;
  int count = 0;
};

/// Input-layer synapses -> [batch norm -> SSM layer -> dropout] x L -> readout
/// synapses -> batch norm. Synaptic weights are stored as (outputs x inputs);
/// the inter-layer matrix for h neurons with n_out channels each is
/// h x (h*n_out), read column j*n_out + k for channel k of neuron j.
class Network {
 public:
  NetworkConfig config;
  Dense w_in;                  // h x c_in
  std::vector<Dense> w_hidden; // (L-1) of h x (h*n_out)
  Dense w_out;                 // c_out x (h*n_out)
  std::vector<Dense> bn_gamma, bn_beta;  // L + 1 junctions
  std::vector<BatchNormState> bn;
  std::vector<SsmNeuronLayerParams> layers;
  std::vector<LayerGrads> layer_grads;

  Network() = default;

  std::size_t steps_channels() const { return static_cast<std::size_t>(config.h * config.n_out); }

  /// All parameters. The fixed input vectors B are listed in group `fixed`.
  std::vector<ParamSlot> parameters() {
    std::vector<ParamSlot> out;
    auto dense = [&](Dense& d) {
      out.push_back({d.name, ParamGroup::other, {d.value.data(), static_cast<std::size_t>(d.value.size())},
                     {d.grad.data(), static_cast<std::size_t>(d.grad.size())}, false, -1});
    };
    dense(w_in);
    for (auto& w : w_hidden) dense(w);
    dense(w_out);
    if (config.batch_norm) {
      for (std::size_t k = 0; k < bn.size(); ++k) {
        dense(bn_gamma[k]);
        dense(bn_beta[k]);
      }
    }
    auto cspan = [](ComplexVector& v) { return std::span<double>(reinterpret_cast<double*>(v.data()), 2 * v.size()); };
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto& p = layers[l];
      auto& g = layer_grads[l];
      out.push_back({p.name + ".lambda", ParamGroup::ssm, cspan(p.lambda), cspan(g.lambda), true, static_cast<int>(l)});
      out.push_back({p.name + ".b", ParamGroup::fixed, {p.b.data(), p.b.size()}, {}, false, -1});
      out.push_back({p.name + ".c", ParamGroup::ssm, cspan(p.c), cspan(g.c), true, -1});
      out.push_back({p.name + ".c_bias", ParamGroup::ssm, cspan(p.c_bias), cspan(g.c_bias), true, -1});
      if (config.reset_enabled) {
        out.push_back({p.name + ".rho", ParamGroup::rho, cspan(p.rho), cspan(g.rho), true, -1});
        out.push_back({p.name + ".r_bias", ParamGroup::r_bias, {p.r_bias.data(), p.r_bias.size()},
                       {g.r_bias.data(), g.r_bias.size()}, false, -1});
      }
    }
    return out;
  }

  /// Number of real scalars the optimizer updates (B excluded).
  std::size_t trainable_count() {
    std::size_t total = 0;
    for (const auto& s : parameters())
      if (s.group != ParamGroup::fixed) total += s.value.size();
    return total;
  }

  void zero_grad() {
    w_in.grad.setZero();
    for (auto& w : w_hidden) w.grad.setZero();
    w_out.grad.setZero();
    for (auto& g : bn_gamma) g.grad.setZero();
    for (auto& b : bn_beta) b.grad.setZero();
    for (auto& g : layer_grads) {
      std::fill(g.lambda.begin(), g.lambda.end(), Complex{});
      std::fill(g.c.begin(), g.c.end(), Complex{});
      std::fill(g.c_bias.begin(), g.c_bias.end(), Complex{});
      std::fill(g.rho.begin(), g.rho.end(), Complex{});
      std::fill(g.r_bias.begin(), g.r_bias.end(), 0.0);
    }
  }

  /// Re-creates gradient buffers after the parameter shapes changed.
  void reset_grad_buffers() {
    auto shape = [](Dense& d) { d.grad = Matrix::Zero(d.value.rows(), d.value.cols()); };
    shape(w_in);
    for (auto& w : w_hidden) shape(w);
    shape(w_out);
    for (auto& g : bn_gamma) shape(g);
    for (auto& b : bn_beta) shape(b);
    layer_grads.assign(layers.size(), {});
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto& p = layers[l];
      layer_grads[l] = {ComplexVector(p.lambda.size()), ComplexVector(p.c.size()), ComplexVector(p.c_bias.size()),
                        ComplexVector(p.rho.size()), std::vector<double>(p.r_bias.size())};
    }
  }
};

inline Matrix uniform_fan_in(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(cols));
  std::uniform_real_distribution<double> u(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

/// Builds and initializes a network deterministically from `seed`.
inline Network build_network(const NetworkConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  Network net;
  net.config = cfg;
  const Eigen::Index h = cfg.h, hc = static_cast<Eigen::Index>(cfg.h) * cfg.n_out;
  net.w_in = {"w_in", uniform_fan_in(h, cfg.c_in, rng), {}};
  for (int l = 1; l < cfg.num_hidden_layers; ++l)
    net.w_hidden.push_back({"w_hidden" + std::to_string(l), uniform_fan_in(h, hc, rng), {}});
  net.w_out = {"w_out", uniform_fan_in(cfg.c_out, hc, rng), {}};

  for (int l = 0; l <= cfg.num_hidden_layers; ++l) {
    const Eigen::Index ch = l < cfg.num_hidden_layers ? h : cfg.c_out;
    net.bn.push_back(BatchNormState::identity(ch));
    net.bn_gamma.push_back({"bn" + std::to_string(l) + ".gamma", Matrix::Ones(1, ch), {}});
    net.bn_beta.push_back({"bn" + std::to_string(l) + ".beta", Matrix::Zero(1, ch), {}});
  }

  init::LayerInit li{cfg.delta_min, cfg.delta_max, 1.5, cfg.rho_init, cfg.r_bias_init};
  for (int l = 0; l < cfg.num_hidden_layers; ++l) {
    SsmNeuronLayerParams p(cfg.layer_config(), "hidden" + std::to_string(l + 1));
    init::initialize_layer(p, li, rng);
    net.layers.push_back(std::move(p));
  }
  net.reset_grad_buffers();
  return net;
}

// ---------------------------------------------------------------------------

/// A padded batch: rows t*batch + b, zero beyond each sample's length.
struct Batch {
  std::size_t steps = 0;
  std::size_t size = 0;
  Matrix inputs;  // (steps*size) x c_in
  std::vector<int> labels;
  std::vector<std::size_t> lengths;
};

struct ForwardOptions {
  bool train = false;
  int threads = 1;
  std::optional<ChannelDrop> drop;
  Rng* dropout_rng = nullptr;
  bool requires_grad = false;
};

struct ForwardResult {
  Tape tape;
  Var logits;       // (steps*batch) x c_out, per-step readout
  Var accumulated;  // batch x c_out, summed over valid steps
  std::vector<Var> spikes;  // per hidden layer, (steps*batch) x (h*n_out)
  std::vector<LayerStats> stats;

  // Parameter leaves, in the same order as Network members.
  Var w_in;
  std::vector<Var> w_hidden;
  Var w_out;
  std::vector<Var> gamma, beta;
  std::vector<LayerParamVars> layer_vars;
};

inline Matrix channel_keep_mask(const NetworkConfig& cfg, const ChannelDrop& d, Eigen::Index rows) {
  if (d.count < 0 || d.count > cfg.n_out) throw ConfigError("drop_channels: count must be in [0, n_out]");
  Matrix m = Matrix::Ones(rows, static_cast<Eigen::Index>(cfg.h) * cfg.n_out);
  for (int j = 0; j < cfg.h; ++j) {
    for (int q = 0; q < d.count; ++q) {
      const int k = d.which == ChannelDrop::Which::first ? q : cfg.n_out - 1 - q;
      m.col(static_cast<Eigen::Index>(j) * cfg.n_out + k).setZero();
    }
  }
  return m;
}

/// One pass over a batch. With `requires_grad`, the returned tape can be
/// differentiated and `collect_gradients` copies the result into `net`.
inline ForwardResult forward(Network& net, const Batch& batch, const ForwardOptions& opt = {}) {
  const auto& cfg = net.config;
  if (batch.inputs.cols() != cfg.c_in) throw ConfigError("forward: input width does not match c_in");
  if (static_cast<std::size_t>(batch.inputs.rows()) != batch.steps * batch.size)
    throw ConfigError("forward: batch rows must equal steps * size");
  if (!batch.inputs.allFinite()) throw NumericError("forward: non-finite input batch");

  ForwardResult r{Tape(opt.requires_grad), {}, {}, {}, {}, {}, {}, {}, {}, {}, {}};
  Tape& t = r.tape;
  const Eigen::Index rows = batch.inputs.rows();
  std::optional<Matrix> keep_mask;
  if (opt.drop && opt.drop->count > 0) keep_mask = channel_keep_mask(cfg, *opt.drop, rows);

  r.w_in = t.parameter(net.w_in.value, "w_in");
  for (auto& w : net.w_hidden) r.w_hidden.push_back(t.parameter(w.value, w.name));
  r.w_out = t.parameter(net.w_out.value, "w_out");
  for (std::size_t k = 0; k < net.bn.size(); ++k) {
    r.gamma.push_back(t.parameter(net.bn_gamma[k].value, net.bn_gamma[k].name));
    r.beta.push_back(t.parameter(net.bn_beta[k].value, net.bn_beta[k].name));
  }
  r.stats.assign(net.layers.size(), {});

  auto norm = [&](Var x, std::size_t k) {
    return cfg.batch_norm ? batch_norm(t, x, r.gamma[k], r.beta[k], net.bn[k], opt.train) : x;
  };
  auto check = [&](Var x, const std::string& where) {
    if (!t.value(x).allFinite()) throw NumericError("forward: non-finite activations in " + where);
  };

  Var x = t.constant(batch.inputs);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    Var w = l == 0 ? r.w_in : r.w_hidden[l - 1];
    Var cur = norm(ops::linear(t, x, w), l);
    check(cur, net.layers[l].name + " input currents");
    r.layer_vars.push_back(layer_param_vars(t, net.layers[l]));
    Var s = ssm_layer(t, cur, r.layer_vars.back(), net.layers[l], batch.steps, batch.size, opt.threads, &r.stats[l]);
    if (keep_mask) s = ops::mask(t, s, *keep_mask);
    r.spikes.push_back(s);
    if (opt.train && cfg.dropout > 0.0) {
      if (!opt.dropout_rng) throw ConfigError("forward: dropout in train mode needs an RNG");
      std::bernoulli_distribution keep(1.0 - cfg.dropout);
      Matrix m(rows, t.value(s).cols());
      const double scale = 1.0 / (1.0 - cfg.dropout);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = keep(*opt.dropout_rng) ? scale : 0.0;
      s = ops::mask(t, s, m);
    }
    x = s;
  }
  r.logits = norm(ops::linear(t, x, r.w_out), net.layers.size());
  check(r.logits, "readout");
  r.accumulated = time_sum(t, r.logits, batch.steps, batch.size, batch.lengths);
  return r;
}

/// Adds the tape gradients of every parameter leaf into `net`'s buffers.
inline void collect_gradients(Network& net, ForwardResult& r) {
  Tape& t = r.tape;
  net.w_in.grad += t.grad(r.w_in);
  for (std::size_t k = 0; k < net.w_hidden.size(); ++k) net.w_hidden[k].grad += t.grad(r.w_hidden[k]);
  net.w_out.grad += t.grad(r.w_out);
  for (std::size_t k = 0; k < net.bn.size(); ++k) {
    net.bn_gamma[k].grad += t.grad(r.gamma[k]);
    net.bn_beta[k].grad += t.grad(r.beta[k]);
  }
  auto add_complex = [&](ComplexVector& dst, Var v) {
    const Matrix g = t.grad(v);
    for (std::size_t k = 0; k < dst.size(); ++k)
      dst[k] += Complex{g(0, static_cast<Eigen::Index>(2 * k)), g(0, static_cast<Eigen::Index>(2 * k + 1))};
  };
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto& g = net.layer_grads[l];
    const auto& lv = r.layer_vars[l];
    add_complex(g.lambda, lv.lambda);
    add_complex(g.c, lv.c);
    add_complex(g.c_bias, lv.c_bias);
    add_complex(g.rho, lv.rho);
    const Matrix rb = t.grad(lv.r_bias);
    for (std::size_t k = 0; k < g.r_bias.size(); ++k) g.r_bias[k] += rb(0, static_cast<Eigen::Index>(k));
  }
}

/// Argmax per row, ties resolved toward the lowest class index.
inline std::vector<int> rate_decode(const Matrix& accumulated) {
  std::vector<int> out(static_cast<std::size_t>(accumulated.rows()));
  for (Eigen::Index b = 0; b < accumulated.rows(); ++b) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < accumulated.cols(); ++c)
      if (accumulated(b, c) > accumulated(b, best)) best = c;
    out[static_cast<std::size_t>(b)] = static_cast<int>(best);
  }
  return out;
}

/// Accumulates a (steps*batch) x c per-step readout over all steps and decodes.
inline std::vector<int> rate_decode(const Matrix& logits_over_time, std::size_t steps, std::size_t batch) {
  if (steps < 1) throw ConfigError("rate_decode: need at least one timestep");
  Matrix acc = Matrix::Zero(static_cast<Eigen::Index>(batch), logits_over_time.cols());
  for (std::size_t t = 0; t < steps; ++t) acc += logits_over_time.middleRows(static_cast<Eigen::Index>(t * batch), static_cast<Eigen::Index>(batch));
  return rate_decode(acc);
}

}  // namespace ssmspike::nn
