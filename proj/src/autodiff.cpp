#include "wrecon/autodiff.hpp"

#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace wrecon {

namespace {
thread_local bool t_grad_enabled = true;
}  // namespace

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
bool grad_enabled() { return t_grad_enabled; }

void Node::accumulate(const Tensor& g) {
  if (!requires_grad) return;
  if (grad.empty()) grad = Tensor::zeros(value.shape());
  grad += g;
}

void Node::zero_grad() {
  if (requires_grad) grad = Tensor::zeros(value.shape());
}

Var constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = "constant";
  return n;
}

Var variable(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = "variable";
  n->requires_grad = true;
  n->grad = Tensor::zeros(n->value.shape());
  return n;
}

Var make_node(Tensor value, std::string op, std::vector<Var> parents,
              std::function<void(Node&)> rule) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = std::move(op);
  if (!t_grad_enabled) return n;
  for (const auto& p : parents) {
    if (p->requires_grad) {
      n->requires_grad = true;
      break;
    }
  }
  if (n->requires_grad) {
    n->parents = std::move(parents);
    n->backward_rule = std::move(rule);
    n->grad = Tensor::zeros(n->value.shape());
  }
  return n;
}

namespace {

// Post-order DFS without recursion; the result lists parents before children.
std::vector<Node*> topo_order(Node* root) {
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
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
  return order;
}

}  // namespace

void backward(const Var& loss) {
  if (!loss) throw std::invalid_argument("backward: null root");
  if (loss->value.size() != 1) {
    throw ShapeError("backward: root must be scalar, got " + to_string(loss->value.shape()));
  }
  if (!loss->requires_grad) return;

  auto order = topo_order(loss.get());
  loss->grad[0] += 1.0f;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_rule) n->backward_rule(*n);
  }
}

std::size_t count_ops(const Var& root, std::string_view op) {
  std::size_t count = 0;
  std::unordered_set<const Node*> visited;
  std::vector<const Node*> stack{root.get()};
  visited.insert(root.get());
  while (!stack.empty()) {
    const Node* n = stack.back();
    stack.pop_back();
    if (n->op == op) ++count;
    for (const auto& p : n->parents) {
      if (visited.insert(p.get()).second) stack.push_back(p.get());
    }
  }
  return count;
}

}  // namespace wrecon
