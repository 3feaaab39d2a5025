#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "ssmspike/core/ops.hpp"

namespace ssmspike::train {

using Var = Tape::Var;

namespace detail {

inline Matrix softmax_rows(const Matrix& x) {
  Matrix p(x.rows(), x.cols());
  for (Eigen::Index b = 0; b < x.rows(); ++b) {
    const double m = x.row(b).maxCoeff();
    p.row(b) = (x.row(b).array() - m).exp().matrix();
    p.row(b) /= p.row(b).sum();
  }
  return p;
}

inline void check_labels(const Matrix& logits, std::span<const int> labels) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size())
    throw ConfigError("cross_entropy: label count does not match batch size");
  for (int y : labels)
    if (y < 0 || y >= logits.cols()) throw ConfigError("cross_entropy: label out of range");
}

}  // namespace detail

/// Mean over the batch of -log softmax(logits)[label].
inline double cross_entropy_value(const Matrix& logits, std::span<const int> labels) {
  detail::check_labels(logits, labels);
  double total = 0.0;
  for (Eigen::Index b = 0; b < logits.rows(); ++b) {
    const double m = logits.row(b).maxCoeff();
    const double lse = m + std::log((logits.row(b).array() - m).exp().sum());
    total += lse - logits(b, labels[static_cast<std::size_t>(b)]);
  }
  return total / static_cast<double>(logits.rows());
}

inline Var cross_entropy(Tape& t, Var logits, std::span<const int> labels) {
  const Matrix& x = t.value(logits);
  Matrix out(1, 1);
  out(0, 0) = cross_entropy_value(x, labels);
  std::vector<int> y(labels.begin(), labels.end());
  return t.record(std::move(out), {logits}, [logits, y](Tape& tp, const Matrix& g) {
    Matrix p = detail::softmax_rows(tp.value(logits));
    for (std::size_t b = 0; b < y.size(); ++b) p(static_cast<Eigen::Index>(b), y[b]) -= 1.0;
    tp.accumulate(logits, p * (g(0, 0) / static_cast<double>(y.size())));
  }, "cross_entropy");
}

}  // namespace ssmspike::train
