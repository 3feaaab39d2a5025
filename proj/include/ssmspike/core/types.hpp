#pragma once

#include <complex>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ssmspike/core/errors.hpp"

namespace ssmspike {

using Real = double;
using Complex = std::complex<double>;

/// Row-major dense matrix. Sequence tensors use row index `t * batch + b`.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

using ComplexVector = std::vector<Complex>;

/// Engine used everywhere a seed is accepted.
using Rng = std::mt19937_64;

enum class Activation { nonsigned, signed_spike, gelu };
enum class Regime { stable, unstable };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::nonsigned: return "nonsigned";
    case Activation::signed_spike: return "signed";
    case Activation::gelu: return "gelu";
  }
  return "?";
}

inline const char* to_string(Regime r) { return r == Regime::stable ? "stable" : "unstable"; }

inline Activation parse_activation(const std::string& s) {
  if (s == "nonsigned") return Activation::nonsigned;
  if (s == "signed") return Activation::signed_spike;
  if (s == "gelu") return Activation::gelu;
  throw ConfigError("unknown activation '" + s + "' (expected nonsigned, signed or gelu)");
}

inline Regime parse_regime(const std::string& s) {
  if (s == "stable") return Regime::stable;
  if (s == "unstable") return Regime::unstable;
  throw ConfigError("unknown regime '" + s + "' (expected stable or unstable)");
}

}  // namespace ssmspike
