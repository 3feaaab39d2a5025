#pragma once

#include <cmath>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "ssmspike/core/errors.hpp"
#include "ssmspike/neurons/init.hpp"
#include "ssmspike/nn/network.hpp"

namespace ssmspike::train {

using nn::ParamGroup;
using nn::ParamSlot;

struct GroupHyper {
  double lr = 1e-3;
  double weight_decay = 0.0;
};

/// Learning rate and weight decay for each optimizer group.
struct ParamGroups {
  GroupHyper ssm{1e-3, 0.0};
  GroupHyper other{1e-3, 0.0};
  GroupHyper rho{1e-3, 0.0};
  GroupHyper r_bias{1e-3, 0.0};

  const GroupHyper& operator[](ParamGroup g) const {
    switch (g) {
      case ParamGroup::ssm: return ssm;
      case ParamGroup::rho: return rho;
      case ParamGroup::r_bias: return r_bias;
      default: return other;
    }
  }

  void validate() const {
    for (const auto* g : {&ssm, &other, &rho, &r_bias})
      if (!(g->lr >= 0.0) || !(g->weight_decay >= 0.0)) throw ConfigError("learning rates and weight decays must be >= 0");
  }
};

inline double cosine_lr(double base_lr, std::size_t step, std::size_t total_steps) {
  if (step > total_steps) throw ConfigError("cosine_lr: step beyond the schedule");
  if (total_steps == 0) return base_lr;
  const double x = static_cast<double>(step) / static_cast<double>(total_steps);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * x));
}

/// Clamps every component to [-bound, bound]; NaN is an error.
inline void clip_gradients(std::span<double> grad, double bound = 1e5, const std::string& name = "gradient") {
  for (auto& g : grad) {
    if (std::isnan(g)) throw NumericError("non-finite gradient in " + name);
    g = std::clamp(g, -bound, bound);
  }
}

inline void clip_gradients(std::vector<ParamSlot>& slots, double bound = 1e5) {
  for (auto& s : slots)
    if (s.group != ParamGroup::fixed) clip_gradients(s.grad, bound, s.name);
}

/// AdamW with decoupled weight decay. Complex tensors are updated as two
/// independent real components.
class AdamW {
 public:
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  std::size_t steps() const noexcept { return step_; }

  /// `lr_scale` multiplies every group's learning rate (schedule factor).
  void step(std::vector<ParamSlot>& slots, const ParamGroups& groups, double lr_scale = 1.0) {
    ++step_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
    for (auto& s : slots) {
      if (s.group == ParamGroup::fixed) continue;
      auto& [m, v] = moments_[s.name];
      if (m.size() != s.value.size()) {
        m.assign(s.value.size(), 0.0);
        v.assign(s.value.size(), 0.0);
      }
      const auto& h = groups[s.group];
      const double lr = h.lr * lr_scale;
      for (std::size_t k = 0; k < s.value.size(); ++k) {
        const double g = s.grad[k];
        m[k] = beta1 * m[k] + (1.0 - beta1) * g;
        v[k] = beta2 * v[k] + (1.0 - beta2) * g * g;
        s.value[k] -= lr * h.weight_decay * s.value[k];
        s.value[k] -= lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + eps);
      }
    }
  }

  /// Moment buffers keyed by parameter name, for checkpointing.
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>>& moments() { return moments_; }
  void set_steps(std::size_t s) { step_ = s; }

 private:
  std::size_t step_ = 0;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> moments_;
};

/// Projects every hidden layer's eigenvalues into the closed unit disk.
inline void clip_network_eigenvalues(nn::Network& net) {
  for (auto& p : net.layers) init::clip_eigenvalues_inplace(p.lambda);
}

inline double max_eigenvalue_modulus(const nn::Network& net) {
  double m = 0.0;
  for (const auto& p : net.layers) m = std::max(m, init::max_modulus(p.lambda));
  return m;
}

}  // namespace ssmspike::train
