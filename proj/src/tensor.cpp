// SPDX-License-Identifier: Apache-2.0
#include "msgl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "msgl/errors.hpp"

namespace msgl {
namespace {

thread_local bool g_grad_enabled = true;
std::string g_backward_fault;

std::shared_ptr<detail::Node> new_leaf(Shape shape, std::vector<double> data, bool requires_grad) {
  for (std::size_t extent : shape) {
    if (extent == 0) throw DimensionError("tensor extents must be positive, got " + shape_to_string(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("shape " + shape_to_string(shape) + " does not match " +
                         std::to_string(data.size()) + " values");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return node;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

std::vector<double>& detail::Node::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> data(shape_numel(shape), value);
  return Tensor(new_leaf(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  return Tensor(new_leaf(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_to_string(shape()));
  }
  return node_->shape[axis];
}

std::size_t Tensor::numel() const { return node_->data.size(); }

std::span<const double> Tensor::data() const { return node_->data; }

std::span<double> Tensor::mutable_data() {
  if (!node_->inputs.empty() || node_->backward) {
    throw UsageError("in-place edits are only allowed on leaf tensors (op '" + node_->op + "')");
  }
  return node_->data;
}

double Tensor::item() const {
  if (numel() != 1) throw UsageError("item() on tensor of shape " + shape_to_string(shape()));
  return node_->data[0];
}

double Tensor::at(std::size_t i) const { return node_->data.at(i); }

double Tensor::at(std::size_t i, std::size_t j) const {
  if (rank() != 2) throw DimensionError("at(i, j) needs a rank-2 tensor");
  return node_->data.at(i * node_->shape[1] + j);
}

std::vector<double> Tensor::to_vector() const { return node_->data; }

bool Tensor::requires_grad() const { return node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool value) {
  if (!is_leaf()) throw UsageError("requires_grad can only be set on leaves");
  node_->requires_grad = value;
  return *this;
}

bool Tensor::is_leaf() const { return node_->inputs.empty() && !node_->backward; }

const std::string& Tensor::op() const { return node_->op; }

std::vector<double> Tensor::grad() const {
  if (node_->grad.empty()) return std::vector<double>(numel(), 0.0);
  return node_->grad;
}

bool Tensor::has_grad() const { return !node_->grad.empty(); }

void Tensor::zero_grad() { node_->grad.clear(); }

void Tensor::backward() const { msgl::backward(*this); }

Tensor Tensor::detach() const { return from_data(shape(), node_->data, false); }

Tensor make_op_result(Shape shape, std::vector<double> data, std::string op,
                      std::vector<Tensor> inputs, detail::BackwardFn backward) {
  for (double v : data) {
    if (!std::isfinite(v)) throw NumericError("op '" + op + "' produced a non-finite value");
  }
  auto node = new_leaf(std::move(shape), std::move(data), false);
  node->op = std::move(op);
  if (g_grad_enabled) {
    bool needs = std::any_of(inputs.begin(), inputs.end(),
                             [](const Tensor& t) { return t.requires_grad(); });
    if (needs) {
      node->requires_grad = true;
      node->inputs.reserve(inputs.size());
      for (auto& t : inputs) node->inputs.push_back(t.node());
      node->backward = std::move(backward);
    }
  }
  return Tensor(std::move(node));
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw UsageError("backward on an undefined tensor");
  if (loss.numel() != 1) {
    throw UsageError("backward needs a scalar loss, got shape " + shape_to_string(loss.shape()));
  }
  detail::Node* root = loss.node().get();
  if (root->consumed) throw UsageError("backward already ran for this loss; its tape was released");
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order (inputs before users).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{root, 0}};
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    node->grad_buffer();
    if (node->backward) {
      for (auto& in : node->inputs) {
        if (in->requires_grad) in->grad_buffer();
      }
      node->backward(*node);
    }
  }
  for (detail::Node* node : order) {
    if (node->backward) {
      node->backward = nullptr;
      node->inputs.clear();
      node->consumed = true;
    }
  }
}

bool grad_mode_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

namespace debug {

void set_backward_fault(std::string op) { g_backward_fault = std::move(op); }
void clear_backward_fault() { g_backward_fault.clear(); }
bool backward_fault_active(std::string_view op) {
  return !g_backward_fault.empty() && g_backward_fault == op;
}

}  // namespace debug

}  // namespace msgl
