#pragma once

#include <cmath>
#include <ostream>
#include <span>
#include <vector>

#include "ssmspike/nn/network.hpp"

namespace ssmspike::analysis {

/// Spike tensors of one batch: one (steps*batch) x (h*n_out) matrix per
/// hidden layer, rows t*batch + b, valid for t < lengths[b].
struct SpikeRecords {
  Activation activation = Activation::nonsigned;
  std::size_t steps = 0;
  std::size_t batch = 0;
  std::vector<std::size_t> lengths;
  std::vector<Matrix> layers;
};

inline SpikeRecords spike_records(const nn::ForwardResult& r, Activation act, const nn::Batch& b) {
  SpikeRecords rec{act, b.steps, b.size, b.lengths, {}};
  for (auto v : r.spikes) rec.layers.push_back(r.tape.value(v));
  return rec;
}

struct RateStat {
  double mean = 0.0;
  double std = 0.0;
};

/// Per neuron-channel fraction of valid timesteps with a nonzero output,
/// summarized per layer as population mean and standard deviation.
class SpikeRateAccumulator {
 public:
  void add(const SpikeRecords& rec) {
    if (rec.activation == Activation::gelu) throw ConfigError("spike_rate: GELU outputs are not spikes");
    if (rec.lengths.size() != rec.batch) throw ConfigError("spike_rate: lengths do not match the batch size");
    if (counts_.empty()) {
      for (const auto& m : rec.layers) counts_.emplace_back(static_cast<std::size_t>(m.cols()), 0.0);
    } else if (counts_.size() != rec.layers.size()) {
      throw ConfigError("spike_rate: layer count changed between batches");
    }
    for (std::size_t l = 0; l < rec.layers.size(); ++l) {
      const Matrix& m = rec.layers[l];
      if (static_cast<std::size_t>(m.rows()) != rec.steps * rec.batch || static_cast<std::size_t>(m.cols()) != counts_[l].size())
        throw ConfigError("spike_rate: record shape mismatch");
      for (std::size_t t = 0; t < rec.steps; ++t)
        for (std::size_t b = 0; b < rec.batch; ++b) {
          if (t >= rec.lengths[b]) continue;
          const auto row = m.row(static_cast<Eigen::Index>(t * rec.batch + b));
          for (Eigen::Index c = 0; c < row.size(); ++c)
            if (row(c) != 0.0) counts_[l][static_cast<std::size_t>(c)] += 1.0;
        }
    }
    for (auto len : rec.lengths) total_steps_ += static_cast<double>(len);
  }

  std::vector<RateStat> result() const {
    std::vector<RateStat> out;
    for (const auto& layer : counts_) {
      RateStat s;
      if (total_steps_ > 0 && !layer.empty()) {
        double sum = 0.0, sq = 0.0;
        for (double c : layer) {
          const double r = c / total_steps_;
          sum += r;
          sq += r * r;
        }
        const double n = static_cast<double>(layer.size());
        s.mean = sum / n;
        s.std = std::sqrt(std::max(0.0, sq / n - s.mean * s.mean));
      }
      out.push_back(s);
    }
    return out;
  }

 private:
  std::vector<std::vector<double>> counts_;
  double total_steps_ = 0.0;
};

inline std::vector<RateStat> spike_rate(const SpikeRecords& rec) {
  SpikeRateAccumulator acc;
  acc.add(rec);
  return acc.result();
}

inline constexpr const char* kSpikeRateHeader = "layer,mean,std";

inline void write_spike_rate_csv(std::ostream& os, const std::vector<RateStat>& rates) {
  os << kSpikeRateHeader << '\n';
  for (std::size_t l = 0; l < rates.size(); ++l) os << (l + 1) << ',' << rates[l].mean << ',' << rates[l].std << '\n';
}

}  // namespace ssmspike::analysis
