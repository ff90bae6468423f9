#include "maven/nn.hpp"

#include <cmath>

#include "maven/error.hpp"

namespace maven::nn {

namespace {

thread_local AttentionTrace* t_trace = nullptr;

}  // namespace

Tensor ParameterStore::add(const std::string& name, Tensor t) {
  if (index_.count(name)) throw Error(ErrorCode::InvalidConfig, "duplicate parameter name " + name);
  index_[name] = params_.size();
  params_.push_back({name, t});
  return t;
}

Tensor ParameterStore::xavier(const std::string& name, std::size_t fan_in, std::size_t fan_out) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> v(fan_in * fan_out);
  for (double& x : v) x = rng_.uniform(-bound, bound);
  return add(name, Tensor::from({fan_in, fan_out}, std::move(v), true));
}

Tensor ParameterStore::constant(const std::string& name, Shape shape, double value) {
  return add(name, Tensor::full(std::move(shape), value, true));
}

std::vector<Tensor> ParameterStore::tensors() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.tensor);
  return out;
}

std::optional<Tensor> ParameterStore::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return params_[it->second].tensor;
}

Tensor ParameterStore::get(const std::string& name) const {
  auto t = find(name);
  if (!t) throw Error(ErrorCode::CheckpointMismatch, "no parameter named " + name);
  return *t;
}

std::size_t ParameterStore::count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

void ParameterStore::load(const std::vector<NamedTensor>& values) {
  if (values.size() != params_.size()) {
    for (const auto& v : values) {
      if (!index_.count(v.name)) throw Error(ErrorCode::CheckpointMismatch, "unexpected tensor " + v.name);
    }
  }
  std::unordered_map<std::string, const Tensor*> by_name;
  for (const auto& v : values) by_name[v.name] = &v.tensor;
  for (auto& p : params_) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw Error(ErrorCode::CheckpointMismatch, "checkpoint lacks tensor " + p.name);
    if (it->second->shape() != p.tensor.shape()) {
      throw Error(ErrorCode::CheckpointMismatch, "tensor " + p.name + " has shape " +
                                                     shape_str(it->second->shape()) + ", model expects " +
                                                     shape_str(p.tensor.shape()));
    }
  }
  for (auto& p : params_) {
    const auto src = by_name[p.name]->data();
    std::copy(src.begin(), src.end(), p.tensor.mutable_data().begin());
  }
}

Linear Linear::create(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
                      bool with_bias) {
  Linear l{store.xavier(name + ".weight", in, out), std::nullopt};
  if (with_bias) l.bias = store.zeros(name + ".bias", {out});
  return l;
}

Tensor Linear::operator()(const Tensor& x) const {
  Tensor y = ops::matmul(x, weight);
  return bias ? ops::add_row(y, *bias) : y;
}

LayerNorm LayerNorm::create(ParameterStore& store, const std::string& name, std::size_t dim, double eps) {
  return {store.constant(name + ".gamma", {dim}, 1.0), store.zeros(name + ".beta", {dim}), eps};
}

ScopedAttentionTrace::ScopedAttentionTrace(AttentionTrace& trace) : previous_(t_trace) { t_trace = &trace; }
ScopedAttentionTrace::~ScopedAttentionTrace() { t_trace = previous_; }

void trace_attention(const std::string& site, const Tensor& weights) {
  if (t_trace) t_trace->entries.push_back({site, weights.detach()});
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            std::span<const unsigned char> mask, const std::string& site) {
  if (q.cols() != k.cols() || k.rows() != v.rows()) {
    throw Error(ErrorCode::ShapeMismatch, site + ": attention operands " + shape_str(q.shape()) + ", " +
                                              shape_str(k.shape()) + ", " + shape_str(v.shape()));
  }
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Tensor scores = ops::scale(ops::matmul(q, ops::transpose(k)), inv_sqrt_dk);
  Tensor weights = ops::softmax(scores, mask);
  trace_attention(site, weights);
  return ops::matmul(weights, v);
}

MultiHeadAttention MultiHeadAttention::create(ParameterStore& store, const std::string& name, std::size_t d_model,
                                              std::size_t heads) {
  if (heads == 0 || d_model % heads != 0) {
    throw Error(ErrorCode::InvalidConfig,
                name + ": width " + std::to_string(d_model) + " not divisible by " + std::to_string(heads) + " heads");
  }
  return {Linear::create(store, name + ".q", d_model, d_model, false),
          Linear::create(store, name + ".k", d_model, d_model, false),
          Linear::create(store, name + ".v", d_model, d_model, false),
          Linear::create(store, name + ".o", d_model, d_model, false), heads};
}

Tensor MultiHeadAttention::operator()(const Tensor& x_q, const Tensor& x_kv, std::span<const unsigned char> mask,
                                      const std::string& site) const {
  const Tensor q = query(x_q);
  const Tensor k = key(x_kv);
  const Tensor v = value(x_kv);
  const std::size_t d_head = q.cols() / heads;
  if (heads == 1) return output(scaled_dot_attention(q, k, v, mask, site));
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * d_head;
    outs.push_back(scaled_dot_attention(ops::slice_cols(q, off, d_head), ops::slice_cols(k, off, d_head),
                                        ops::slice_cols(v, off, d_head), mask, site));
  }
  return output(ops::concat_cols(outs));
}

FeedForward FeedForward::create(ParameterStore& store, const std::string& name, std::size_t d_model,
                                std::size_t d_hidden) {
  return {Linear::create(store, name + ".fc1", d_model, d_hidden),
          Linear::create(store, name + ".fc2", d_hidden, d_model)};
}

EncoderBlock EncoderBlock::create(ParameterStore& store, const std::string& name, std::size_t d_model,
                                  std::size_t heads, std::size_t d_hidden, double eps) {
  return {MultiHeadAttention::create(store, name + ".attn", d_model, heads),
          LayerNorm::create(store, name + ".norm1", d_model, eps),
          FeedForward::create(store, name + ".ffn", d_model, d_hidden),
          LayerNorm::create(store, name + ".norm2", d_model, eps)};
}

Tensor EncoderBlock::operator()(const Tensor& x, std::span<const unsigned char> mask, const std::string& site) const {
  const Tensor y = norm1(ops::add(x, attention(x, x, mask, site)));
  return norm2(ops::add(y, ffn(y)));
}

}  // namespace maven::nn
