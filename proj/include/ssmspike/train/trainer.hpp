#pragma once

#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "ssmspike/data/dataset.hpp"
#include "ssmspike/nn/checkpoint.hpp"
#include "ssmspike/train/evaluate.hpp"
#include "ssmspike/train/loss.hpp"
#include "ssmspike/train/optim.hpp"

namespace ssmspike::train {

/// Non-finite loss, activation, or gradient during training.
class DivergenceError : public NumericError {
 public:
  using NumericError::NumericError;
};

struct StepInfo {
  std::size_t step = 0;  // 1-based optimizer step
  int epoch = 0;         // 1-based
  double loss = 0.0;
  double lr_scale = 1.0;
  /// Largest eigenvalue modulus over all hidden layers after the step.
  double max_modulus = 0.0;
  std::size_t reset_window_hits = 0;
  double reset_grad_norm = 0.0;  // over rho and r_bias
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double wall_time = 0.0;
  std::vector<double> spike_rate;  // mean per hidden layer; empty for GELU
};

struct FitConfig {
  int epochs = 1;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  int threads = 1;
  ParamGroups groups{};
  double grad_clip = 1e5;
  bool cosine = true;
  std::size_t eval_batch_size = 256;
  /// When set: metrics.csv, timing.csv and best/final checkpoints go here.
  std::optional<std::filesystem::path> output_dir;
  std::function<void(const StepInfo&)> on_step;
  std::function<void(const EpochMetrics&)> on_epoch;

  void validate() const {
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (batch_size < 1 || eval_batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    if (!(grad_clip > 0.0)) throw ConfigError("gradient clip bound must be > 0");
    groups.validate();
  }
};

struct FitResult {
  std::vector<EpochMetrics> metrics;
  double best_test_acc = 0.0;
  int best_epoch = 0;
  std::size_t steps = 0;
  /// Optimizer steps after which a stable-regime eigenvalue exceeded modulus 1.
  std::size_t eigen_violations = 0;
};

/// Shortest decimal that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string metrics_header(std::size_t spiking_layers) {
  std::string h = "epoch,train_loss,train_acc,test_acc";
  for (std::size_t l = 0; l < spiking_layers; ++l) h += ",spike_rate_l" + std::to_string(l + 1);
  return h;
}

inline std::string metrics_row(const EpochMetrics& m) {
  std::string s = std::to_string(m.epoch) + ',' + format_double(m.train_loss) + ',' + format_double(m.train_acc) + ',' +
                  format_double(m.test_acc);
  for (double r : m.spike_rate) s += ',' + format_double(r);
  return s;
}

namespace detail {

inline double reset_grad_norm(nn::Network& net) {
  double sq = 0.0;
  for (const auto& s : net.parameters())
    if (s.group == nn::ParamGroup::rho || s.group == nn::ParamGroup::r_bias)
      for (double g : s.grad) sq += g * g;
  return std::sqrt(sq);
}

inline std::string regime_context(const nn::NetworkConfig& c) {
  return std::string("regime=") + to_string(c.regime) + ", reset=" + (c.reset_enabled ? "on" : "off");
}

}  // namespace detail

/// Mini-batch training with shuffling, per-epoch evaluation on `test`, and
/// optional metrics/checkpoint output. Deterministic for a fixed seed.
inline FitResult fit(nn::Network& net, const data::SequenceDataset& train, const data::SequenceDataset& test,
                     const FitConfig& cfg) {
  cfg.validate();
  if (train.empty()) throw ConfigError("fit: training set is empty");
  if (train.c_in != net.config.c_in) throw ConfigError("fit: dataset c_in does not match the network");
  if (train.c_out > net.config.c_out) throw ConfigError("fit: dataset has more classes than the network outputs");

  FitResult res;
  Rng rng(cfg.seed);
  AdamW opt;
  const bool spiking = net.config.activation != Activation::gelu;
  const bool stable = net.config.regime == Regime::stable;
  const std::size_t batches = (train.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = batches * static_cast<std::size_t>(cfg.epochs);

  std::ofstream metrics_csv, timing_csv;
  if (cfg.output_dir) {
    std::filesystem::create_directories(*cfg.output_dir);
    metrics_csv.open(*cfg.output_dir / "metrics.csv", std::ios::trunc);
    timing_csv.open(*cfg.output_dir / "timing.csv", std::ios::trunc);
    if (!metrics_csv || !timing_csv) throw DataError("cannot write metrics in " + cfg.output_dir->string());
    metrics_csv << metrics_header(spiking ? net.layers.size() : 0) << '\n';
    timing_csv << "epoch,wall_time\n";
    if (cfg.epochs == 0) nn::save_checkpoint(*cfg.output_dir / "checkpoint_final.json", net, nn::rng_state_string(rng));
  }

  if (stable) clip_network_eigenvalues(net);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto t0 = std::chrono::steady_clock::now();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0, correct = 0.0;
    for (std::size_t bi = 0; bi < batches; ++bi) {
      const std::size_t lo = bi * cfg.batch_size, hi = std::min(train.size(), lo + cfg.batch_size);
      const auto batch = data::make_batch(train, std::span(order).subspan(lo, hi - lo));
      StepInfo info;
      info.epoch = epoch;
      try {
        nn::ForwardOptions fo;
        fo.train = true;
        fo.threads = cfg.threads;
        fo.dropout_rng = &rng;
        fo.requires_grad = true;
        auto r = nn::forward(net, batch, fo);
        const Var loss = cross_entropy(r.tape, r.accumulated, batch.labels);
        info.loss = r.tape.value(loss)(0, 0);
        if (!std::isfinite(info.loss)) throw NumericError("non-finite loss");
        r.tape.backward(loss);
        net.zero_grad();
        nn::collect_gradients(net, r);
        for (const auto& st : r.stats) info.reset_window_hits += st.reset_window_hits;
        auto slots = net.parameters();
        clip_gradients(slots, cfg.grad_clip);
        info.reset_grad_norm = detail::reset_grad_norm(net);
        info.lr_scale = cfg.cosine ? cosine_lr(1.0, res.steps, total_steps) : 1.0;
        opt.step(slots, cfg.groups, info.lr_scale);
        const auto pred = nn::rate_decode(r.tape.value(r.accumulated));
        for (std::size_t k = 0; k < pred.size(); ++k) correct += pred[k] == batch.labels[k] ? 1.0 : 0.0;
      } catch (const NumericError& e) {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ", step " +
                              std::to_string(res.steps + 1) + " (" + detail::regime_context(net.config) + "): " + e.what());
      }
      ++res.steps;
      info.step = res.steps;
      if (stable) clip_network_eigenvalues(net);
      info.max_modulus = max_eigenvalue_modulus(net);
      if (stable && info.max_modulus > 1.0) ++res.eigen_violations;
      loss_sum += info.loss * static_cast<double>(batch.size);
      if (cfg.on_step) cfg.on_step(info);
    }

    EvalOptions eo;
    eo.batch_size = cfg.eval_batch_size;
    eo.threads = cfg.threads;
    eo.spike_rates = spiking;
    const auto ev = evaluate(net, test, eo);
    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(train.size());
    m.train_acc = correct / static_cast<double>(train.size());
    m.test_acc = ev.accuracy;
    m.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& s : ev.spike_rates) m.spike_rate.push_back(s.mean);
    res.metrics.push_back(m);

    const bool best = epoch == 1 || m.test_acc > res.best_test_acc;
    if (best) {
      res.best_test_acc = m.test_acc;
      res.best_epoch = epoch;
    }
    if (cfg.output_dir) {
      metrics_csv << metrics_row(m) << '\n' << std::flush;
      timing_csv << epoch << ',' << format_double(m.wall_time) << '\n' << std::flush;
      const nn::json extra = {{"epoch", epoch}, {"step", res.steps}, {"test_acc", m.test_acc}};
      if (best) nn::save_checkpoint(*cfg.output_dir / "checkpoint_best.json", net, nn::rng_state_string(rng), extra);
      if (epoch == cfg.epochs)
        nn::save_checkpoint(*cfg.output_dir / "checkpoint_final.json", net, nn::rng_state_string(rng), extra);
    }
    if (cfg.on_epoch) cfg.on_epoch(m);
  }
  return res;
}

}  // namespace ssmspike::train
