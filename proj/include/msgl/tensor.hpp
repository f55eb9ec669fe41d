// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace msgl {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);

namespace detail {

struct Node;
using BackwardFn = std::function<void(Node& self)>;

// One vertex of the recorded computation. Leaves have no backward rule.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until something accumulates into it
  bool requires_grad = false;
  bool consumed = false;  // set once backward() has run through this node
  std::string op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;

  std::vector<double>& grad_buffer();
};

}  // namespace detail

/// Dense row-major float64 tensor with reverse-mode gradient recording.
///
/// A Tensor is a shared handle: copies alias the same storage. Values are
/// fixed once an op produces them; only leaves (parameters, inputs) may be
/// edited in place, and only grad buffers change during backward().
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  /// In-place access for leaves (optimizer updates, finite differences).
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t i) const;
  double at(std::size_t i, std::size_t j) const;
  std::vector<double> to_vector() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool value);
  bool is_leaf() const;
  const std::string& op() const;

  /// Gradient buffer; zeros of the tensor's shape if nothing was accumulated.
  std::vector<double> grad() const;
  bool has_grad() const;
  void zero_grad();

  /// Reverse pass from this scalar. The recorded tape is released afterwards.
  void backward() const;

  /// Copy of the values as a fresh leaf with no history.
  Tensor detach() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  friend Tensor make_op_result(Shape, std::vector<double>, std::string,
                               std::vector<Tensor>, detail::BackwardFn);

  std::shared_ptr<detail::Node> node_;
};

/// Builds an op output. History (inputs + rule) is kept only when recording
/// is enabled and some input requires a gradient. Throws NumericError when
/// the produced values are not finite.
Tensor make_op_result(Shape shape, std::vector<double> data, std::string op,
                      std::vector<Tensor> inputs, detail::BackwardFn backward);

void backward(const Tensor& loss);

/// A tensor addressed by a stable name (parameters, checkpoint entries).
struct NamedTensor {
  std::string name;
  Tensor tensor;
};

bool grad_mode_enabled();

/// Disables recording for the current thread while alive (inference).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

namespace debug {

/// Test hook: when set to an op name, that op's backward rule is scaled by
/// a wrong factor so gradient checks can prove they catch broken rules.
void set_backward_fault(std::string op);
void clear_backward_fault();
bool backward_fault_active(std::string_view op);

}  // namespace debug

}  // namespace msgl
