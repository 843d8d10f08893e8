#include "climdown/tensor/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_set>

#include "climdown/error.hpp"

namespace climdown::tensor {
namespace {

thread_local bool g_grad_enabled = true;
thread_local KinkRecorder* g_recorder = nullptr;

std::shared_ptr<Node> leaf(Shape shape, std::vector<double> values, bool requires_grad) {
  if (values.size() != numel(shape)) {
    throw ValidationError("tensor: " + std::to_string(values.size()) +
                          " values for shape " + shape_str(shape));
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  n->requires_grad = requires_grad;
  if (requires_grad) n->grad.assign(n->value.size(), 0.0);
  return n;
}

}  // namespace

std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = numel(shape);
  return Tensor(leaf(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
  const auto n = numel(shape);
  return Tensor(leaf(std::move(shape), std::vector<double>(n, v), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  return Tensor(leaf(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return Tensor(leaf({}, {v}, requires_grad));
}

std::size_t Tensor::dim(int i) const {
  const int r = static_cast<int>(rank());
  const int k = i < 0 ? r + i : i;
  if (k < 0 || k >= r) throw ValidationError("tensor: axis out of range");
  return node_->shape[static_cast<std::size_t>(k)];
}

double Tensor::item() const {
  if (size() != 1) throw ValidationError("item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

void Tensor::zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

void Tensor::backward() {
  if (size() != 1) throw ValidationError("backward() needs a scalar; got " + shape_str(shape()));
  const double one = 1.0;
  backward(std::span<const double>(&one, 1));
}

void Tensor::backward(std::span<const double> seed) {
  if (!requires_grad()) throw ValidationError("backward() on a tensor without gradient");
  if (seed.size() != size()) throw ValidationError("backward(): seed size mismatch");

  // Iterative post-order DFS gives a topological order; each node is visited once.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      Node* child = n->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  for (std::size_t i = 0; i < seed.size(); ++i) node_->grad[i] += seed[i];
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

Tensor Tensor::detach() const { return Tensor(leaf(shape(), node_->value, false)); }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }
bool grad_enabled() { return g_grad_enabled; }

Tensor make_op(std::string name, Shape shape, std::vector<double> value,
               std::vector<Tensor> inputs, BackwardFn fn) {
  for (double v : value) {
    if (!std::isfinite(v)) throw NumericFault("non-finite value produced by " + name);
  }
  bool rg = false;
  if (g_grad_enabled) {
    for (const auto& t : inputs) rg = rg || t.requires_grad();
  }
  auto n = leaf(std::move(shape), std::move(value), rg);
  n->op = std::move(name);
  if (rg) {
    for (const auto& t : inputs) n->inputs.push_back(t.ptr());
    n->backward = [fn = std::move(fn), ins = std::move(inputs)](Node& self) mutable {
      fn(self, ins);
    };
  }
  return Tensor(std::move(n));
}

KinkRecorder::KinkRecorder() : prev_(g_recorder) { g_recorder = this; }
KinkRecorder::~KinkRecorder() { g_recorder = prev_; }

void KinkRecorder::record(std::span<const double> pre) {
  if (!g_recorder) return;
  std::uint64_t h = g_recorder->hash_;
  for (double v : pre) {
    h ^= v > 0.0 ? 0x9e3779b97f4a7c15ULL : 0x2545f4914f6cdd1dULL;
    h *= 0x100000001b3ULL;
  }
  g_recorder->hash_ = h;
}

}  // namespace climdown::tensor
