#include "maven/tensor.hpp"

#include <sstream>

#include "maven/error.hpp"

namespace maven {

namespace {

thread_local Tape t_tape;
thread_local bool t_grad_enabled = true;
thread_local std::optional<std::string> t_fault;

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

void TensorImpl::accumulate_grad(std::span<const double> g) {
  auto& dst = ensure_grad();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

std::vector<double>& TensorImpl::ensure_grad() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad;
}

Tensor::Tensor() : impl_(std::make_shared<TensorImpl>()) {
  impl_->shape = {1};
  impl_->data = {0.0};
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> v(shape_numel(shape), value);
  return from(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  for (std::size_t e : shape) {
    if (e == 0) throw Error(ErrorCode::ShapeMismatch, "tensor extents must be positive: " + shape_str(shape));
  }
  if (shape.empty() || shape_numel(shape) != values.size()) {
    throw Error(ErrorCode::ShapeMismatch,
                "shape " + shape_str(shape) + " does not match " + std::to_string(values.size()) + " values");
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> v;
  v.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw Error(ErrorCode::ShapeMismatch, "ragged matrix literal");
    v.insert(v.end(), row.begin(), row.end());
  }
  return from({r, c}, std::move(v));
}

std::size_t Tensor::rows() const {
  const auto& s = impl_->shape;
  return s.size() == 1 ? 1 : shape_numel(s) / s.back();
}

std::size_t Tensor::cols() const { return impl_->shape.back(); }

double Tensor::item() const {
  if (numel() != 1) throw Error(ErrorCode::NotScalar, "item() on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

double Tensor::at(std::size_t r, std::size_t c) const { return impl_->data.at(r * cols() + c); }

Tensor Tensor::clone(bool requires_grad) const { return from(impl_->shape, impl_->data, requires_grad); }

Tape& Tape::current() { return t_tape; }

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

Tensor make_result(Shape shape, std::vector<double> data, bool track) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = track;
  impl->on_graph = track;
  return Tensor(std::move(impl));
}

bool any_requires_grad(std::initializer_list<const Tensor*> inputs) {
  if (!t_grad_enabled) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

bool any_requires_grad(const std::vector<Tensor>& inputs) {
  if (!t_grad_enabled) return false;
  for (const Tensor& t : inputs) {
    if (t.requires_grad()) return true;
  }
  return false;
}

void record_node(std::string op, const std::vector<Tensor>& inputs, const Tensor& output,
                 std::function<void(const Node&)> backward) {
  Node node;
  node.op = std::move(op);
  node.inputs.reserve(inputs.size());
  for (const Tensor& t : inputs) node.inputs.push_back(t.impl());
  node.output = output.impl();
  node.backward = std::move(backward);
  t_tape.record(std::move(node));
}

void backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw Error(ErrorCode::NotScalar, "backward() needs a scalar loss, got " + shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) {
    throw Error(ErrorCode::DetachedGraph, "backward() on a tensor that is not part of a gradient graph");
  }
  auto& out = loss.impl()->ensure_grad();
  out[0] += 1.0;

  auto& nodes = t_tape.nodes();
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    const Node& node = *it;
    if (node.output->grad.empty()) continue;
    if (t_fault && node.op == *t_fault) {
      for (double& g : node.output->grad) g = -g;
    }
    node.backward(node);
  }
  t_tape.clear();
}

void set_backward_fault(std::optional<std::string> op) { t_fault = std::move(op); }
const std::optional<std::string>& backward_fault() { return t_fault; }

}  // namespace maven
