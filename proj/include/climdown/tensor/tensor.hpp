#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace climdown::tensor {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& s);
std::string shape_str(const Shape& s);

class Tensor;

/// One value in the graph. Inputs are owned, so holding the output keeps the graph alive.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // sized iff requires_grad
  bool requires_grad = false;
  std::string op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  /// Negative indices count from the back.
  std::size_t dim(int i) const;
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }
  const std::string& op() const { return node_->op; }

  std::span<const double> data() const { return node_->value; }
  /// Direct write access, for parameters and optimizers. Bypasses the graph.
  std::span<double> mutable_data() { return node_->value; }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->grad; }
  double item() const;
  double operator[](std::size_t i) const { return node_->value[i]; }

  void zero_grad();
  /// Seeds d(self)/d(self) = 1; requires a single-element tensor.
  void backward();
  /// Seeds with an arbitrary cotangent of matching size.
  void backward(std::span<const double> seed);

  /// Same values, no history, no gradient.
  Tensor detach() const;

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Disables graph recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};
bool grad_enabled();

/// Backward rule for a custom op: read `out.grad` (and `out.value`), add into the
/// gradients of the inputs that require them.
using BackwardFn = std::function<void(const Node& out, std::vector<Tensor>& inputs)>;

/// Registers an op result. Throws NumericFault if `value` has a NaN or Inf.
Tensor make_op(std::string name, Shape shape, std::vector<double> value,
               std::vector<Tensor> inputs, BackwardFn fn);

// Records the on/off pattern of non-smooth ops (relu) while active, so a finite
// difference that straddles a kink can be recognised.
class KinkRecorder {
 public:
  KinkRecorder();
  ~KinkRecorder();
  KinkRecorder(const KinkRecorder&) = delete;
  KinkRecorder& operator=(const KinkRecorder&) = delete;
  std::uint64_t signature() const { return hash_; }
  static void record(std::span<const double> pre_activation);

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
  KinkRecorder* prev_;
};

}  // namespace climdown::tensor
