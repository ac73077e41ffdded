#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "wrecon/tensor.hpp"

namespace wrecon {

enum class Mode { Train, Eval };

struct Node;
using Var = std::shared_ptr<Node>;

/// One vertex of the reverse-mode graph. `grad` is allocated (zeroed) only
/// when the node requires a gradient; parents and the backward rule are
/// recorded only in that case too, so eval-mode graphs free as they go.
struct Node {
  Tensor value;
  Tensor grad;
  std::vector<Var> parents;
  std::function<void(Node&)> backward_rule;
  std::string op;
  bool requires_grad = false;

  void accumulate(const Tensor& g);
  void zero_grad();
};

/// Leaf that does not receive gradients.
Var constant(Tensor value);
/// Leaf that accumulates gradients.
Var variable(Tensor value);

/// Builds an interior node. `rule` is dropped when no parent requires grad.
Var make_node(Tensor value, std::string op, std::vector<Var> parents,
              std::function<void(Node&)> rule);

/// While alive on a thread, new nodes record no parents or backward rules.
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

/// Reverse sweep from a scalar root. Gradients accumulate into existing
/// `grad` buffers; call zero_grad on leaves between independent sweeps.
void backward(const Var& loss);

/// Nodes reachable from `root` (root included) whose op name equals `op`.
std::size_t count_ops(const Var& root, std::string_view op);

}  // namespace wrecon
