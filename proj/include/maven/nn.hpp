#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "maven/gradcheck.hpp"
#include "maven/ops.hpp"
#include "maven/rng.hpp"
#include "maven/tensor.hpp"

namespace maven::nn {

// Owns every learnable tensor under a dotted name, in creation order.
// Initialization: Xavier-uniform weights, zero biases, unit LayerNorm gain.
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t seed) : rng_(seed) {}

  Tensor xavier(const std::string& name, std::size_t fan_in, std::size_t fan_out);
  Tensor constant(const std::string& name, Shape shape, double value);
  Tensor zeros(const std::string& name, Shape shape) { return constant(name, std::move(shape), 0.0); }

  const std::vector<NamedTensor>& named() const { return params_; }
  std::vector<Tensor> tensors() const;
  std::optional<Tensor> find(const std::string& name) const;
  Tensor get(const std::string& name) const;
  std::size_t count() const;

  // Copies values from a checkpoint. CheckpointMismatch names the first
  // missing, unexpected or mis-shaped tensor.
  void load(const std::vector<NamedTensor>& values);

 private:
  Tensor add(const std::string& name, Tensor t);

  Rng rng_;
  std::vector<NamedTensor> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct Linear {
  Tensor weight;               // in x out
  std::optional<Tensor> bias;  // out

  static Linear create(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
                       bool with_bias = true);
  Tensor operator()(const Tensor& x) const;
};

struct LayerNorm {
  Tensor gamma;
  Tensor beta;
  double eps = 1e-5;

  static LayerNorm create(ParameterStore& store, const std::string& name, std::size_t dim, double eps);
  Tensor operator()(const Tensor& x) const { return ops::layer_norm(x, gamma, beta, eps); }
};

// Records attention weight matrices produced while a ScopedAttentionTrace is
// alive on the current thread. Used by tests to check row normalization.
struct AttentionTrace {
  struct Entry {
    std::string site;
    Tensor weights;
  };
  std::vector<Entry> entries;
};

class ScopedAttentionTrace {
 public:
  explicit ScopedAttentionTrace(AttentionTrace& trace);
  ~ScopedAttentionTrace();
  ScopedAttentionTrace(const ScopedAttentionTrace&) = delete;
  ScopedAttentionTrace& operator=(const ScopedAttentionTrace&) = delete;

 private:
  AttentionTrace* previous_;
};

void trace_attention(const std::string& site, const Tensor& weights);

// softmax(q k^T / sqrt(d_k)) v. mask (rows(q) x rows(k)), nonzero = attend.
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            std::span<const unsigned char> mask, const std::string& site);

// Concat(head_1..head_h) W_O with head_i = Attention(x_q W_i^Q, x_kv W_i^K, x_kv W_i^V).
struct MultiHeadAttention {
  Linear query;
  Linear key;
  Linear value;
  Linear output;
  std::size_t heads = 1;

  static MultiHeadAttention create(ParameterStore& store, const std::string& name, std::size_t d_model,
                                   std::size_t heads);
  Tensor operator()(const Tensor& x_q, const Tensor& x_kv, std::span<const unsigned char> mask,
                    const std::string& site) const;
};

struct FeedForward {
  Linear fc1;
  Linear fc2;

  static FeedForward create(ParameterStore& store, const std::string& name, std::size_t d_model,
                            std::size_t d_hidden);
  Tensor operator()(const Tensor& x) const { return fc2(ops::relu(fc1(x))); }
};

// Post-norm transformer block: y = LN(x + MHA(x)); out = LN(y + FFN(y)).
struct EncoderBlock {
  MultiHeadAttention attention;
  LayerNorm norm1;
  FeedForward ffn;
  LayerNorm norm2;

  static EncoderBlock create(ParameterStore& store, const std::string& name, std::size_t d_model,
                             std::size_t heads, std::size_t d_hidden, double eps);
  Tensor operator()(const Tensor& x, std::span<const unsigned char> mask, const std::string& site) const;
};

}  // namespace maven::nn
