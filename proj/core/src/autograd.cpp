#include "mfm/autograd.hpp"

#include <unordered_set>

#include "mfm/error.hpp"

namespace mfm::ad {
namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Var Var::constant(Shape shape, std::vector<double> values) {
  if (shape_size(shape) != values.size()) {
    throw ShapeError("constant: " + shape_string(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  return Var(std::move(n));
}

Var Var::parameter(Shape shape, std::vector<double> values) {
  Var v = constant(std::move(shape), std::move(values));
  v.node_->requires_grad = true;
  return v;
}

Var Var::zeros(Shape shape) {
  const auto n = shape_size(shape);
  return constant(std::move(shape), std::vector<double>(n, 0.0));
}

double Var::item() const {
  if (size() != 1) throw ShapeError("item() on non-scalar " + shape_string(shape()));
  return node_->value[0];
}

std::vector<double> Var::grad() const {
  if (node_->grad.size() == node_->value.size()) return node_->grad;
  return std::vector<double>(node_->value.size(), 0.0);
}

Var make_result(Shape shape, std::vector<double> value, std::initializer_list<Var> parents,
                std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  if (g_grad_enabled) {
    bool any = false;
    for (const Var& p : parents) any = any || (p.defined() && p.requires_grad());
    if (any) {
      n->requires_grad = true;
      for (const Var& p : parents) n->parents.push_back(p.shared());
      n->backward = std::move(backward);
    }
  }
  return Var(std::move(n));
}

void backward(const Var& root) {
  if (root.size() != 1) throw ShapeError("backward() requires a scalar root");
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node(), 0}};
  visited.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

}  // namespace mfm::ad
