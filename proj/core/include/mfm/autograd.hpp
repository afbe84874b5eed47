#pragma once

// Minimal reverse-mode automatic differentiation over dense double tensors.
//
// Every op records its parents and a backward closure on the result node when
// any input requires a gradient and recording is enabled. backward() walks the
// graph in reverse topological order and accumulates into Node::grad.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mfm::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<double>& grad_buffer() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

class Var {
 public:
  Var() = default;

  static Var constant(Shape shape, std::vector<double> values);
  static Var parameter(Shape shape, std::vector<double> values);
  static Var zeros(Shape shape);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }

  std::span<const double> value() const { return node_->value; }
  std::span<double> mutable_value() { return node_->value; }
  double item() const;

  /// Accumulated gradient; zeros if nothing has flowed here yet.
  std::vector<double> grad() const;
  void zero_grad() { node_->grad.clear(); }
  bool requires_grad() const { return node_->requires_grad; }

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& shared() const { return node_; }

 private:
  explicit Var(std::shared_ptr<Node> n) : node_(std::move(n)) {}
  friend Var make_result(Shape, std::vector<double>, std::initializer_list<Var>,
                         std::function<void(Node&)>);
  std::shared_ptr<Node> node_;
};

/// Builds an op result. The backward closure is dropped when no parent needs
/// gradients or recording is disabled.
Var make_result(Shape shape, std::vector<double> value, std::initializer_list<Var> parents,
                std::function<void(Node&)> backward);

/// Seeds d(root)/d(root) = 1 for a scalar root and propagates to every leaf.
void backward(const Var& root);

bool grad_enabled();

/// Disables graph recording in scope (sampling, evaluation).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace mfm::ad
