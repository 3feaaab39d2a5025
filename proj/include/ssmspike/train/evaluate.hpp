#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <vector>

#include "ssmspike/analysis/spike_rate.hpp"
#include "ssmspike/data/dataset.hpp"
#include "ssmspike/nn/network.hpp"
#include "ssmspike/train/loss.hpp"

namespace ssmspike::train {

struct EvalOptions {
  std::size_t batch_size = 256;
  int threads = 1;
  std::optional<nn::ChannelDrop> drop;
  /// Prefix lengths at which to decode in addition to the full sequence.
  std::vector<std::size_t> prefix_steps;
  bool spike_rates = false;
};

struct EvalResult {
  double accuracy = 0.0;
  double loss = 0.0;
  std::vector<int> predictions;
  /// Accuracy when the readout is accumulated only over the first t steps,
  /// one entry per requested prefix.
  std::vector<double> prefix_accuracy;
  std::vector<analysis::RateStat> spike_rates;
};

/// Readout summed over steps t < min(prefix, length) per sample.
inline Matrix prefix_accumulate(const Matrix& logits, const nn::Batch& b, std::size_t prefix) {
  Matrix acc = Matrix::Zero(static_cast<Eigen::Index>(b.size), logits.cols());
  for (std::size_t t = 0; t < std::min(prefix, b.steps); ++t)
    for (std::size_t k = 0; k < b.size; ++k)
      if (t < b.lengths[k]) acc.row(static_cast<Eigen::Index>(k)) += logits.row(static_cast<Eigen::Index>(t * b.size + k));
  return acc;
}

/// Eval-mode pass over the whole dataset in order.
inline EvalResult evaluate(nn::Network& net, const data::SequenceDataset& ds, const EvalOptions& opt = {}) {
  if (opt.batch_size < 1) throw ConfigError("evaluate: batch size must be >= 1");
  if (ds.c_in != net.config.c_in) throw ConfigError("evaluate: dataset c_in does not match the network");
  if (ds.c_out > net.config.c_out) throw ConfigError("evaluate: dataset has more classes than the network outputs");
  EvalResult res;
  res.prefix_accuracy.assign(opt.prefix_steps.size(), 0.0);
  if (ds.empty()) return res;
  analysis::SpikeRateAccumulator rates;
  std::vector<double> prefix_correct(opt.prefix_steps.size(), 0.0);
  double correct = 0.0, loss = 0.0;
  nn::ForwardOptions fo;
  fo.threads = opt.threads;
  fo.drop = opt.drop;
  for (std::size_t start = 0; start < ds.size(); start += opt.batch_size) {
    std::vector<std::size_t> idx(std::min(opt.batch_size, ds.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const auto batch = data::make_batch(ds, idx);
    auto r = nn::forward(net, batch, fo);
    const Matrix& acc = r.tape.value(r.accumulated);
    loss += cross_entropy_value(acc, batch.labels) * static_cast<double>(batch.size);
    const auto pred = nn::rate_decode(acc);
    for (std::size_t k = 0; k < pred.size(); ++k) {
      res.predictions.push_back(pred[k]);
      correct += pred[k] == batch.labels[k] ? 1.0 : 0.0;
    }
    for (std::size_t p = 0; p < opt.prefix_steps.size(); ++p) {
      const auto pp = nn::rate_decode(prefix_accumulate(r.tape.value(r.logits), batch, opt.prefix_steps[p]));
      for (std::size_t k = 0; k < pp.size(); ++k) prefix_correct[p] += pp[k] == batch.labels[k] ? 1.0 : 0.0;
    }
    if (opt.spike_rates) rates.add(analysis::spike_records(r, net.config.activation, batch));
  }
  const double n = static_cast<double>(ds.size());
  res.accuracy = correct / n;
  res.loss = loss / n;
  for (std::size_t p = 0; p < prefix_correct.size(); ++p) res.prefix_accuracy[p] = prefix_correct[p] / n;
  if (opt.spike_rates) res.spike_rates = rates.result();
  return res;
}

}  // namespace ssmspike::train
