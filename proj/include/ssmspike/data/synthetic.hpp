#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include "ssmspike/data/dataset.hpp"

namespace ssmspike::data {

struct SynthConfig {
  int num_classes = 2;
  int steps = 50;
  int c_in = 8;
  int samples_per_class = 100;
  /// Probability that any single entry is flipped.
  double noise = 0.05;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_classes < 1 || steps < 4 || c_in < 1 || samples_per_class < 1)
      throw ConfigError("synthetic task: need classes >= 1, steps >= 4, c_in >= 1, samples_per_class >= 1");
    if (!(noise >= 0.0 && noise <= 0.5)) throw ConfigError("synthetic task: noise must be in [0, 0.5]");
  }
};

/// Binary templates, one steps x c_in matrix per class.
///
/// Every class shares the same random onset pattern in the first quarter of
/// the sequence. The class itself is only encoded by a burst on a
/// class-specific channel subset that starts at a class-specific offset in
/// the second half, so a model has to retain sensitivity to its input after
/// the onset has driven its state.
inline std::vector<Matrix> synth_pattern_templates(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const int T = cfg.steps, c = cfg.c_in;
  const int burst = std::max(1, T / 10);
  const int first = T / 2, last = T - burst;

  std::bernoulli_distribution onset_on(0.3);
  Matrix onset = Matrix::Zero(T, c);
  for (int t = 0; t < T / 4; ++t)
    for (int k = 0; k < c; ++k) onset(t, k) = onset_on(rng) ? 1.0 : 0.0;

  std::vector<Matrix> out;
  for (int cls = 0; cls < cfg.num_classes; ++cls) {
    const int offset = cfg.num_classes == 1 ? first : first + cls * (last - first) / (cfg.num_classes - 1);
    std::vector<int> channels(static_cast<std::size_t>(c));
    for (int k = 0; k < c; ++k) channels[static_cast<std::size_t>(k)] = k;
    std::shuffle(channels.begin(), channels.end(), rng);
    channels.resize(static_cast<std::size_t>(std::max(1, c / 2)));
    Matrix m = onset;
    for (int t = offset; t < std::min(T, offset + burst); ++t)
      for (int k : channels) m(t, k) = 1.0;
    out.push_back(std::move(m));
  }
  return out;
}

/// Noisy copies of the class templates, classes interleaved
/// (sample i has label i % num_classes). Deterministic given the seed.
inline SequenceDataset synth_pattern_task(const SynthConfig& cfg) {
  const auto templates = synth_pattern_templates(cfg);
  Rng rng(cfg.seed ^ 0x5eed5eed5eed5eedULL);
  std::bernoulli_distribution flip(cfg.noise);
  SequenceDataset ds{"synthetic", cfg.c_in, cfg.num_classes, cfg.seed, {}};
  ds.samples.reserve(static_cast<std::size_t>(cfg.num_classes) * static_cast<std::size_t>(cfg.samples_per_class));
  for (int i = 0; i < cfg.samples_per_class; ++i) {
    for (int cls = 0; cls < cfg.num_classes; ++cls) {
      Matrix m = templates[static_cast<std::size_t>(cls)];
      for (Eigen::Index k = 0; k < m.size(); ++k)
        if (flip(rng)) m.data()[k] = 1.0 - m.data()[k];
      ds.samples.push_back({std::move(m), cls});
    }
  }
  return ds;
}

}  // namespace ssmspike::data
