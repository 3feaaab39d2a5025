#pragma once

#include <cmath>

#include "ssmspike/core/scalar.hpp"
#include "ssmspike/core/tape.hpp"

// Elementwise and linear-algebra primitives recorded on a Tape.
namespace ssmspike::ops {

using Var = Tape::Var;

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ConfigError(std::string(op) + ": shape mismatch");
}

inline Var add(Tape& t, Var a, Var b) {
  require_same_shape(t.value(a), t.value(b), "add");
  return t.record(t.value(a) + t.value(b), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  }, "add");
}

inline Var sub(Tape& t, Var a, Var b) {
  require_same_shape(t.value(a), t.value(b), "sub");
  return t.record(t.value(a) - t.value(b), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, -g);
  }, "sub");
}

/// Elementwise product.
inline Var mul(Tape& t, Var a, Var b) {
  require_same_shape(t.value(a), t.value(b), "mul");
  return t.record(t.value(a).cwiseProduct(t.value(b)), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g.cwiseProduct(tp.value(b)));
    tp.accumulate(b, g.cwiseProduct(tp.value(a)));
  }, "mul");
}

inline Var scale(Tape& t, Var a, double c) {
  return t.record(t.value(a) * c, {a}, [a, c](Tape& tp, const Matrix& g) { tp.accumulate(a, g * c); }, "scale");
}

inline Var matmul(Tape& t, Var a, Var b) {
  if (t.value(a).cols() != t.value(b).rows()) throw ConfigError("matmul: inner dimension mismatch");
  return t.record(t.value(a) * t.value(b), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    if (tp.needs_grad(a)) tp.grad_buffer(a).noalias() += g * tp.value(b).transpose();
    if (tp.needs_grad(b)) tp.grad_buffer(b).noalias() += tp.value(a).transpose() * g;
  }, "matmul");
}

/// x * W^T, with W stored as (out_features x in_features).
inline Var linear(Tape& t, Var x, Var w) {
  if (t.value(x).cols() != t.value(w).cols()) throw ConfigError("linear: input width does not match weight");
  return t.record(t.value(x) * t.value(w).transpose(), {x, w}, [x, w](Tape& tp, const Matrix& g) {
    if (tp.needs_grad(x)) tp.grad_buffer(x).noalias() += g * tp.value(w);
    if (tp.needs_grad(w)) tp.grad_buffer(w).noalias() += g.transpose() * tp.value(x);
  }, "linear");
}

/// Adds a 1 x cols row vector to every row.
inline Var add_row(Tape& t, Var x, Var row) {
  const auto& r = t.value(row);
  if (r.rows() != 1 || r.cols() != t.value(x).cols()) throw ConfigError("add_row: row shape mismatch");
  Matrix out = t.value(x);
  out.rowwise() += r.row(0);
  return t.record(std::move(out), {x, row}, [x, row](Tape& tp, const Matrix& g) {
    tp.accumulate(x, g);
    tp.accumulate(row, g.colwise().sum());
  }, "add_row");
}

inline Var sum(Tape& t, Var a) {
  Matrix out(1, 1);
  out(0, 0) = t.value(a).sum();
  return t.record(std::move(out), {a}, [a](Tape& tp, const Matrix& g) {
    const auto& v = tp.value(a);
    tp.accumulate(a, Matrix::Constant(v.rows(), v.cols(), g(0, 0)));
  }, "sum");
}

inline Var mean(Tape& t, Var a) {
  const double n = static_cast<double>(t.value(a).size());
  return scale(t, sum(t, a), 1.0 / n);
}

inline Var square(Tape& t, Var a) {
  return t.record(t.value(a).array().square().matrix(), {a}, [a](Tape& tp, const Matrix& g) {
    tp.accumulate(a, (2.0 * g.array() * tp.value(a).array()).matrix());
  }, "square");
}

inline Var exp(Tape& t, Var a) {
  Matrix out = t.value(a).array().exp().matrix();
  return t.record(out, {a}, [a, out](Tape& tp, const Matrix& g) { tp.accumulate(a, g.cwiseProduct(out)); }, "exp");
}

inline Var log(Tape& t, Var a) {
  return t.record(t.value(a).array().log().matrix(), {a}, [a](Tape& tp, const Matrix& g) {
    tp.accumulate(a, (g.array() / tp.value(a).array()).matrix());
  }, "log");
}

inline Var tanh(Tape& t, Var a) {
  Matrix out = t.value(a).array().tanh().matrix();
  return t.record(out, {a}, [a, out](Tape& tp, const Matrix& g) {
    tp.accumulate(a, (g.array() * (1.0 - out.array().square())).matrix());
  }, "tanh");
}

/// Applies an ActivationFn elementwise: exact derivative for GELU, boxcar
/// surrogate for the two spiking functions.
inline Var activation(Tape& t, Var a, const ActivationFn& fn) {
  const Matrix& x = t.value(a);
  Matrix out = x.unaryExpr([&fn](double v) { return fn.forward(v); });
  return t.record(std::move(out), {a}, [a, fn](Tape& tp, const Matrix& g) {
    const Matrix& xv = tp.value(a);
    tp.accumulate(a, g.cwiseProduct(xv.unaryExpr([&fn](double v) { return fn.backward(v); })));
  }, "activation");
}

/// Heaviside(x > theta) with the boxcar surrogate in the backward pass.
inline Var heaviside(Tape& t, Var a, double theta, SurrogateConfig sc = {}) {
  sc.validate();
  const Matrix& x = t.value(a);
  Matrix out = x.unaryExpr([&](double v) {
    return sc.smooth ? soft_step(v, theta, sc.half_width) : ssmspike::heaviside(v, theta);
  });
  return t.record(std::move(out), {a}, [a, theta, sc](Tape& tp, const Matrix& g) {
    const Matrix& xv = tp.value(a);
    tp.accumulate(a, g.cwiseProduct(xv.unaryExpr([&](double v) { return boxcar_unchecked(v, theta, sc.half_width); })));
  }, "heaviside");
}

inline Var signed_spike(Tape& t, Var a, double theta, SurrogateConfig sc = {}) {
  sc.validate();
  const Matrix& x = t.value(a);
  Matrix out = x.unaryExpr([&](double v) {
    return sc.smooth ? soft_signed_spike(v, theta, sc.half_width) : ssmspike::signed_spike(v, theta);
  });
  return t.record(std::move(out), {a}, [a, theta, sc](Tape& tp, const Matrix& g) {
    const Matrix& xv = tp.value(a);
    tp.accumulate(a, g.cwiseProduct(xv.unaryExpr([&](double v) { return signed_spike_surrogate(v, theta, sc.half_width); })));
  }, "signed_spike");
}

/// Elementwise product with a constant mask (dropout, channel dropping).
inline Var mask(Tape& t, Var a, const Matrix& m) {
  require_same_shape(t.value(a), m, "mask");
  return t.record(t.value(a).cwiseProduct(m), {a}, [a, m](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g.cwiseProduct(m));
  }, "mask");
}

}  // namespace ssmspike::ops
