#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ssmspike/core/errors.hpp"
#include "ssmspike/core/types.hpp"

namespace ssmspike {

/// Reverse-mode differentiation tape over dense matrices.
///
/// Nodes are appended in evaluation order, so the node list is already a
/// topological order; `backward` walks it once in reverse. Each node owns its
/// forward value and a lazily allocated gradient buffer. Backward closures
/// receive the node's output gradient and add into their parents through
/// `accumulate`/`grad_buffer`, so fan-out sums naturally.
///
/// A tape built with `requires_grad == false` still evaluates every value but
/// lets fused operations skip saving their backward state.
class Tape {
 public:
  struct Var {
    std::size_t id = std::numeric_limits<std::size_t>::max();
    bool valid() const noexcept { return id != std::numeric_limits<std::size_t>::max(); }
  };

  using Backward = std::function<void(Tape&, const Matrix& out_grad)>;

  explicit Tape(bool requires_grad = true) : requires_grad_(requires_grad) {}

  bool requires_grad() const noexcept { return requires_grad_; }

  /// Leaf that never receives a gradient (inputs, masks).
  Var constant(Matrix value) { return push(std::move(value), false, "constant"); }

  /// Leaf whose gradient is kept after `backward`.
  Var parameter(Matrix value, std::string name = "parameter") {
    return push(std::move(value), requires_grad_, std::move(name));
  }

  /// Interior node. The closure is dropped when no parent needs a gradient.
  Var record(Matrix value, std::initializer_list<Var> parents, Backward fn, std::string name = "op") {
    bool needs = false;
    for (auto p : parents) needs = needs || nodes_.at(p.id).needs_grad;
    Var v = push(std::move(value), needs && requires_grad_, std::move(name));
    if (nodes_[v.id].needs_grad) nodes_[v.id].backward = std::move(fn);
    return v;
  }

  /// True when gradient flows into `v` (a parameter or something built from one).
  bool needs_grad(Var v) const { return nodes_.at(v.id).needs_grad; }

  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
  const std::string& name(Var v) const { return nodes_.at(v.id).name; }

  /// Gradient of the last `backward` root with respect to leaf `v`; zeros if
  /// nothing reached it. Interior buffers are released once propagated.
  Matrix grad(Var v) const {
    const auto& n = nodes_.at(v.id);
    if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  /// Zero-initialised on first access. Only meaningful for nodes that need grad.
  Matrix& grad_buffer(Var v) {
    auto& n = nodes_.at(v.id);
    if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  template <class Expr>
  void accumulate(Var v, const Expr& g) {
    if (!nodes_.at(v.id).needs_grad) return;
    grad_buffer(v) += g;
  }

  /// Seeds d(root)/d(root) = 1 for a 1x1 root and sweeps the tape once.
  void backward(Var root) {
    if (!requires_grad_) throw ConfigError("backward called on a tape built without gradients");
    const auto& r = nodes_.at(root.id);
    if (r.value.rows() != 1 || r.value.cols() != 1) throw ConfigError("backward root must be a scalar");
    for (auto& n : nodes_) n.grad.resize(0, 0);
    visited_ = 0;
    grad_buffer(root).setOnes();
    for (std::size_t i = root.id + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (!n.needs_grad || n.grad.size() == 0) continue;
      ++visited_;
      if (n.backward) {
        n.backward(*this, n.grad);
        n.grad.resize(0, 0);
      }
    }
  }

  std::size_t size() const noexcept { return nodes_.size(); }
  /// Number of nodes whose gradient was processed in the last sweep.
  std::size_t visited() const noexcept { return visited_; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    Backward backward;
    std::string name;
  };

  Var push(Matrix value, bool needs, std::string name) {
    nodes_.push_back(Node{std::move(value), Matrix(), needs, {}, std::move(name)});
    return Var{nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
  bool requires_grad_;
  std::size_t visited_ = 0;
};

}  // namespace ssmspike
