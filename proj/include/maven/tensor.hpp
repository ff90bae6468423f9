#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace maven {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient arrives
  bool requires_grad = false;
  bool on_graph = false;     // produced by a recorded operation

  void accumulate_grad(std::span<const double> g);
  std::vector<double>& ensure_grad();
};

// Dense row-major f64 tensor. Copies share storage; use clone() for a deep
// copy. Parameters are tensors with requires_grad set and are mutated in
// place by the optimizer.
class Tensor {
 public:
  Tensor();

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const { return impl_->shape; }
  std::size_t ndim() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t numel() const { return impl_->data.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const { return impl_->data; }
  std::span<double> mutable_data() { return impl_->data; }
  const std::vector<double>& values() const { return impl_->data; }

  double item() const;
  double at(std::size_t i) const { return impl_->data.at(i); }
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const { return impl_->requires_grad; }
  bool on_graph() const { return impl_->on_graph; }
  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const double> grad() const { return impl_->grad; }
  void zero_grad() { impl_->grad.clear(); }

  // Deep copy, detached from any graph.
  Tensor clone(bool requires_grad = false) const;
  Tensor detach() const { return clone(false); }

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }
  bool same(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  friend Tensor make_result(Shape, std::vector<double>, bool);

  std::shared_ptr<TensorImpl> impl_;
};

// ---------------------------------------------------------------------------
// Tape-based reverse mode.

struct Node {
  std::string op;
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::shared_ptr<TensorImpl> output;
  // Reads output->grad and accumulates into inputs that require grad.
  std::function<void(const Node&)> backward;
};

class Tape {
 public:
  static Tape& current();

  void record(Node node) { nodes_.push_back(std::move(node)); }
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }
  const std::vector<Node>& nodes() const { return nodes_; }

 private:
  std::vector<Node> nodes_;
};

bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Builds the result tensor of an op. When any input requires grad (and
// recording is enabled) the result requires grad and a node is appended to
// the current tape; otherwise no node is created.
Tensor make_result(Shape shape, std::vector<double> data, bool track);
bool any_requires_grad(std::initializer_list<const Tensor*> inputs);
bool any_requires_grad(const std::vector<Tensor>& inputs);
void record_node(std::string op, const std::vector<Tensor>& inputs, const Tensor& output,
                 std::function<void(const Node&)> backward);

// Seeds d(loss)/d(loss) = 1, walks the tape in reverse insertion order and
// frees it. Throws NotScalar or DetachedGraph.
void backward(const Tensor& loss);

// Test hook: negates the incoming gradient of every node whose op matches.
void set_backward_fault(std::optional<std::string> op);
const std::optional<std::string>& backward_fault();

}  // namespace maven
