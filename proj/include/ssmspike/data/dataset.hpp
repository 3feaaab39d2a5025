#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ssmspike/core/errors.hpp"
#include "ssmspike/core/types.hpp"
#include "ssmspike/nn/network.hpp"

namespace ssmspike::data {

using nn::Batch;

struct Sample {
  Matrix values;  // T x c_in
  int label = 0;
};

struct SequenceDataset {
  std::string name;
  int c_in = 1;
  int c_out = 2;
  std::uint64_t seed = 0;
  std::vector<Sample> samples;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }

  std::size_t max_steps() const {
    std::size_t m = 0;
    for (const auto& s : samples) m = std::max(m, static_cast<std::size_t>(s.values.rows()));
    return m;
  }

  void validate() const {
    if (c_in < 1 || c_out < 1) throw DataError(name + ": c_in and c_out must be >= 1");
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto& s = samples[i];
      if (s.label < 0 || s.label >= c_out)
        throw DataError(name + ": sample " + std::to_string(i) + " has label out of range");
      if (s.values.cols() != c_in) throw DataError(name + ": sample " + std::to_string(i) + " width differs from c_in");
      if (s.values.rows() < 1) throw DataError(name + ": sample " + std::to_string(i) + " is empty");
      if (!s.values.allFinite()) throw DataError(name + ": sample " + std::to_string(i) + " has non-finite values");
    }
  }
};

inline bool operator==(const Sample& a, const Sample& b) {
  return a.label == b.label && a.values.rows() == b.values.rows() && a.values.cols() == b.values.cols() &&
         a.values == b.values;
}

/// Pads the selected samples with zeros to a common length.
inline Batch make_batch(const SequenceDataset& ds, std::span<const std::size_t> indices) {
  if (indices.empty()) throw ConfigError("make_batch: empty index list");
  Batch b;
  b.size = indices.size();
  for (auto i : indices) b.steps = std::max(b.steps, static_cast<std::size_t>(ds.samples.at(i).values.rows()));
  b.inputs = Matrix::Zero(static_cast<Eigen::Index>(b.steps * b.size), ds.c_in);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto& s = ds.samples[indices[k]];
    for (Eigen::Index t = 0; t < s.values.rows(); ++t)
      b.inputs.row(static_cast<Eigen::Index>(static_cast<std::size_t>(t) * b.size + k)) = s.values.row(t);
    b.labels.push_back(s.label);
    b.lengths.push_back(static_cast<std::size_t>(s.values.rows()));
  }
  return b;
}

inline SequenceDataset subset(const SequenceDataset& ds, std::span<const std::size_t> indices) {
  SequenceDataset out{ds.name, ds.c_in, ds.c_out, ds.seed, {}};
  out.samples.reserve(indices.size());
  for (auto i : indices) out.samples.push_back(ds.samples.at(i));
  return out;
}

/// First `count` samples (all if count exceeds the size).
inline SequenceDataset take(const SequenceDataset& ds, std::size_t count) {
  std::vector<std::size_t> idx(std::min(count, ds.size()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return subset(ds, idx);
}

/// Seeded disjoint split; returns (train, validation).
inline std::pair<SequenceDataset, SequenceDataset> validation_split(const SequenceDataset& ds, double fraction,
                                                                    std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw ConfigError("validation fraction must be in [0, 1)");
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(ds.size())));
  std::vector<std::size_t> val(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  auto tr = subset(ds, train), va = subset(ds, val);
  tr.name = ds.name + "-train";
  va.name = ds.name + "-val";
  return {std::move(tr), std::move(va)};
}

/// Sums non-overlapping windows of `bin` rows; a trailing partial window is
/// summed as-is.
inline Matrix sum_bin(const Matrix& seq, int bin) {
  if (bin < 1) throw ConfigError("sum_bin: bin must be >= 1");
  const auto b = static_cast<Eigen::Index>(bin);
  const Eigen::Index out_rows = (seq.rows() + b - 1) / b;
  Matrix out = Matrix::Zero(out_rows, seq.cols());
  for (Eigen::Index t = 0; t < seq.rows(); ++t) out.row(t / b) += seq.row(t);
  return out;
}

inline SequenceDataset sum_bin(const SequenceDataset& ds, int bin) {
  SequenceDataset out{ds.name, ds.c_in, ds.c_out, ds.seed, {}};
  for (const auto& s : ds.samples) out.samples.push_back({sum_bin(s.values, bin), s.label});
  return out;
}

}  // namespace ssmspike::data
