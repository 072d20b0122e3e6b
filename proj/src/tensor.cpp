#include <algorithm>
#include <unordered_map>

#include "stroketok/error.hpp"
#include "stroketok/tensor.hpp"

namespace stroketok::tensor {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
  return s + ")";
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = tensor::numel(shape);
  return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (tensor::numel(shape) != values.size()) {
    throw Error(ErrorKind::ShapeMismatch, "shape " + shape_string(shape) + " does not hold " +
                                              std::to_string(values.size()) + " values");
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double v, bool requires_grad) { return from({1}, {v}, requires_grad); }

double Tensor::item() const {
  if (numel() != 1) throw Error(ErrorKind::ShapeMismatch, "item() on tensor of shape " + shape_string(shape()));
  return node_->value[0];
}

Tensor Tensor::detach() const { return from(node_->shape, node_->value, false); }

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw Error(ErrorKind::ShapeMismatch, "backward() needs a scalar loss");
  }
  Node* root = loss.node().get();
  if (!root->requires_grad) return;

  // Iterative post-order DFS; a node met again while still on the stack is a cycle.
  enum class Mark : std::uint8_t { Open, Done };
  std::unordered_map<Node*, Mark> marks;
  std::vector<Node*> order;
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  marks[root] = Mark::Open;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (!parent->requires_grad) continue;
      auto it = marks.find(parent);
      if (it == marks.end()) {
        marks[parent] = Mark::Open;
        stack.emplace_back(parent, 0);
      } else if (it->second == Mark::Open) {
        throw Error(ErrorKind::GraphCycle, "computation graph contains a cycle");
      }
    } else {
      marks[node] = Mark::Done;
      order.push_back(node);
      stack.pop_back();
    }
  }

  if (root->grad.empty()) root->grad.assign(root->value.size(), 0.0);
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (!node->backward || node->grad.empty()) continue;
    for (const auto& p : node->parents) {
      if (p->requires_grad && p->grad.empty()) p->grad.assign(p->value.size(), 0.0);
    }
    node->backward(*node);
  }
}

}  // namespace stroketok::tensor
