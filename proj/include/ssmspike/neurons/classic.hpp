#pragma once

#include <functional>
#include <optional>
#include <utility>

#include "ssmspike/core/errors.hpp"
#include "ssmspike/core/types.hpp"

// Classical single-output spiking neurons: the general linear form with a
// spiking region, its hard-reset variant, LIF and adLIF.
namespace ssmspike::classic {

struct GeneralNeuronParams {
  Eigen::MatrixXd A;  // n x n leak
  Eigen::VectorXd B;  // input
  Eigen::VectorXd R;  // reset feedback, subtracted on spike
  std::function<bool(const Eigen::VectorXd&)> spiking_region;
  std::optional<Eigen::VectorXd> v_reset;

  Eigen::Index dim() const { return A.rows(); }

  void validate() const {
    const auto n = A.rows();
    if (A.cols() != n || B.size() != n || R.size() != n)
      throw ConfigError("general neuron: inconsistent A/B/R dimensions");
    if (!spiking_region) throw ConfigError("general neuron: spiking region not set");
    if (v_reset && v_reset->size() != n) throw ConfigError("general neuron: reset state dimension mismatch");
  }
};

struct StepResult {
  Eigen::VectorXd v_next;
  int spike = 0;
};

/// Soft reset: v' = A v - R s + B i, with s taken from the current state.
inline StepResult general_step(const GeneralNeuronParams& p, const Eigen::VectorXd& v, double i) {
  p.validate();
  if (v.size() != p.dim()) throw ConfigError("general_step: state dimension mismatch");
  const int s = p.spiking_region(v) ? 1 : 0;
  return {p.A * v - p.R * static_cast<double>(s) + p.B * i, s};
}

/// Hard reset: the R term is dropped and a spiking neuron jumps to v_reset.
inline StepResult hard_reset_step(const GeneralNeuronParams& p, const Eigen::VectorXd& v, double i) {
  p.validate();
  if (!p.v_reset) throw ConfigError("hard_reset_step: reset state not provided");
  if (v.size() != p.dim()) throw ConfigError("hard_reset_step: state dimension mismatch");
  const int s = p.spiking_region(v) ? 1 : 0;
  if (s) return {*p.v_reset, 1};
  return {p.A * v + p.B * i, 0};
}

struct LifParams {
  double alpha = 0.9;
  double theta = 1.0;

  void validate() const {
    if (!(theta > 0.0)) throw ConfigError("LIF threshold must be > 0");
  }
};

struct AdLifParams {
  double alpha = 0.9;
  double beta = 0.8;
  double a = 0.1;
  double b = 0.2;
  double theta = 1.0;

  void validate() const {
    if (!(theta > 0.0)) throw ConfigError("adLIF threshold must be > 0");
  }
};

struct LifStep {
  double u_next;
  int spike;
};

inline LifStep lif_step(const LifParams& p, double u, double i) {
  const int s = u >= p.theta ? 1 : 0;
  return {p.alpha * u - p.alpha * p.theta * s + (1.0 - p.alpha) * i, s};
}

struct AdLifStep {
  double u_next;
  double w_next;
  int spike;
};

inline AdLifStep adlif_step(const AdLifParams& p, double u, double w, double i) {
  const int s = u >= p.theta ? 1 : 0;
  const double u_next = p.alpha * u - p.alpha * p.theta * s + (1.0 - p.alpha) * i - (1.0 - p.alpha) * w;
  const double w_next = p.a * u + p.beta * w + p.b * s;
  return {u_next, w_next, s};
}

inline GeneralNeuronParams lif_as_general(const LifParams& p) {
  p.validate();
  GeneralNeuronParams g;
  g.A = Eigen::MatrixXd::Constant(1, 1, p.alpha);
  g.B = Eigen::VectorXd::Constant(1, 1.0 - p.alpha);
  g.R = Eigen::VectorXd::Constant(1, p.alpha * p.theta);
  g.spiking_region = [theta = p.theta](const Eigen::VectorXd& v) { return v(0) >= theta; };
  return g;
}

/// R is emitted as [+alpha*theta, -b] so that `v' = A v - R s + B i`
/// reproduces the adLIF update term by term (the recovery variable jumps up
/// by b on a spike while the membrane drops by alpha*theta).
inline GeneralNeuronParams adlif_as_general(const AdLifParams& p) {
  p.validate();
  GeneralNeuronParams g;
  g.A.resize(2, 2);
  g.A << p.alpha, -(1.0 - p.alpha), p.a, p.beta;
  g.B.resize(2);
  g.B << 1.0 - p.alpha, 0.0;
  g.R.resize(2);
  g.R << p.alpha * p.theta, -p.b;
  g.spiking_region = [theta = p.theta](const Eigen::VectorXd& v) { return v(0) >= theta; };
  return g;
}

}  // namespace ssmspike::classic
