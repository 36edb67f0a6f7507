#pragma once

// Reverse-mode gradient engine. A forward pass records Nodes; backward()
// walks them in reverse topological order and accumulates vector-Jacobian
// products into every node that requires a gradient.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sing/tensor.hpp"

namespace sing::grad {

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // empty until something flows into it
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_rule;
  bool requires_grad = false;
  bool grad_populated = false;

  bool is_leaf() const { return !backward_rule; }

  // Zero-initialised gradient storage, allocated on first use.
  T* grad_data() {
    if (grad.size() != value.size()) grad = Tensor<T>(value.shape());
    grad_populated = true;
    return grad.data();
  }
};

/// Handle to a node in the graph. Cheap to copy.
template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}
  explicit Var(Tensor<T> value, bool requires_grad = false)
      : node_(std::make_shared<Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor<T>& value() const { return node_->value; }
  const Tensor<T>& grad() const { return node_->grad; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t dim(std::size_t i) const { return node_->value.dim(i); }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }
  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Builds an op result. Parents and the rule are only retained when
/// recording is enabled and some parent requires a gradient. Throws
/// numerical-failure when the forward value is not finite.
template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<std::shared_ptr<Node<T>>> parents,
                   std::function<void(Node<T>&)> rule);

/// Trainable leaf with a named gradient accumulator.
template <typename T>
class Parameter {
 public:
  Parameter() = default;
  Parameter(std::string name, Tensor<T> init);
  Parameter(const Parameter&) = delete;
  Parameter& operator=(const Parameter&) = delete;
  Parameter(Parameter&&) noexcept = default;
  Parameter& operator=(Parameter&&) noexcept = default;

  const std::string& name() const { return name_; }
  const Var<T>& var() const { return var_; }
  Tensor<T>& value() { return var_.node()->value; }
  const Tensor<T>& value() const { return var_.node()->value; }
  Tensor<T>& grad() { return var_.node()->grad; }
  const Tensor<T>& grad() const { return var_.node()->grad; }
  bool grad_populated() const { return var_.node()->grad_populated; }
  std::size_t size() const { return var_.size(); }
  void zero_grad();

 private:
  std::string name_;
  Var<T> var_;
};

template <typename T>
using ParameterList = std::vector<Parameter<T>*>;

/// Accumulates dLoss/dNode into every node reachable from `loss`.
/// Throws invalid-argument for a non-scalar loss and numerical-failure when
/// a non-finite gradient appears.
template <typename T>
void backward(const Var<T>& loss);

template <typename T>
void zero_grads(std::span<Parameter<T>* const> params);

/// Returns a copy of `v` that is cut from the graph.
template <typename T>
Var<T> detach(const Var<T>& v) {
  return Var<T>(v.value(), false);
}

// ---------------------------------------------------------------------------
// Finite-difference verification

struct GradCheckOptions {
  double step = 1e-5;
  double tol = 1e-4;
  // Relative error falls back to absolute error below this magnitude.
  double abs_floor = 1e-8;
  // 0 checks every coordinate; otherwise a random subsample of this size.
  std::size_t max_coords = 0;
  std::uint64_t seed = 0;
  // Failing coordinates whose stencil straddles a slope discontinuity
  // (ReLU, |.|) are skipped and counted instead of failing the check.
  bool skip_kinks = true;
};

struct GradCheckReport {
  bool passed = true;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  double max_error = 0.0;
  std::string worst_label;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;

  void merge(const GradCheckReport& other);
  std::string summary() const;
};

/// Compares the analytic gradient of `f` at `x` against central differences.
GradCheckReport grad_check(const std::function<Var<double>(const Var<double>&)>& f,
                           const Tensor<double>& x, const GradCheckOptions& options = {});

/// Same check against every parameter of a loss closure. Parameters are
/// perturbed in place and restored.
GradCheckReport grad_check_parameters(const std::function<Var<double>()>& loss,
                                      std::span<Parameter<double>* const> params,
                                      const GradCheckOptions& options = {});

}  // namespace sing::grad
