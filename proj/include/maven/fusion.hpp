#pragma once

#include <array>
#include <string>

#include "maven/bundle.hpp"
#include "maven/model_config.hpp"
#include "maven/nn.hpp"
#include "maven/tensor.hpp"

namespace maven::fusion {

// Directional pathway "source -> target": queries come from the source
// modality, keys/values (and the output width) from the target, and the
// result is added to the target's features. So A_{A->V} is T x d_v.
struct Pathway {
  Modality source;
  Modality target;
  Tensor w_query;  // d_source x d_k
  Tensor w_key;    // d_target x d_k
  Tensor w_value;  // d_target x d_target
  Tensor gate;     // (1), learnable scalar alpha

  std::string name() const;  // e.g. "a_to_v"
};

// Fixed order: a->v, t->v, v->a, t->a, v->t, a->t.
inline constexpr std::array<std::pair<Modality, Modality>, 6> kPathwayOrder{{
    {Modality::Audio, Modality::Visual},
    {Modality::Text, Modality::Visual},
    {Modality::Visual, Modality::Audio},
    {Modality::Text, Modality::Audio},
    {Modality::Visual, Modality::Text},
    {Modality::Audio, Modality::Text},
}};

struct AdditiveAttention {
  Tensor w_query;  // W_d  (d x d_att), applied to h_t
  Tensor w_key;    // W'_d (d x d_att), applied to h_t'
  Tensor bias;     // b_d  (d_att)
  Tensor score;    // v_d  (d_att x 1)

  static AdditiveAttention create(nn::ParameterStore& store, const std::string& name, std::size_t d,
                                  std::size_t d_att);
};

// d_{t,t'} = tanh(W_d h_t + W'_d h_t' + b_d); alpha_{t,t'} = v_d . d_{t,t'};
// a_{t,.} = softmax_t'(alpha_{t,.}); l_t = sum_t' a_{t,t'} h_t'.
// Evaluated as T^2 pair rows built from two T x d_att projections.
Tensor additive_attention(const Tensor& h, const AdditiveAttention& params, const std::string& site = "fusion.additive");

// One encoder of the refinement stack:
// y = LN(h + AdditiveAttention(h)); out = LN(y + FFN(y)).
struct AdditiveEncoderBlock {
  AdditiveAttention attention;
  nn::LayerNorm norm1;
  nn::FeedForward ffn;
  nn::LayerNorm norm2;

  static AdditiveEncoderBlock create(nn::ParameterStore& store, const std::string& name, std::size_t d,
                                     std::size_t d_hidden, double eps);
  Tensor operator()(const Tensor& h) const;
};

// Per-modality SelfAtt(F) = LayerNorm(MHA(F, F, F) + F).
struct SelfRefine {
  nn::MultiHeadAttention attention;
  nn::LayerNorm norm;

  Tensor operator()(const Tensor& f, const std::string& site) const;
};

class Fusion {
 public:
  Fusion(nn::ParameterStore& store, const ModelConfig& cfg);

  // softmax(Q_source K_target^T / sqrt(d_k)) V_target. ShapeMismatch when the
  // two sequences differ in length or width.
  Tensor cross_modal_attention(const Pathway& p, const Tensor& f_source, const Tensor& f_target) const;

  // F_m + sum_{n != m} alpha_{n->m} A_{n->m}; pathways touching an absent
  // modality are skipped.
  std::array<Tensor, 3> enhance(const ModalityBundle& bundle) const;

  Tensor self_att_refine(Modality m, const Tensor& f_enhanced) const;

  // Concat per timestep (width d_v + d_a + d_t) then W_proj, b_proj.
  Tensor fuse_project(const std::array<Tensor, 3>& refined) const;

  // F_refined = Out(BEiT_2(BEiT_1(F_projected))), T x d_beit.
  Tensor encoder_stack(const Tensor& projected) const;

  // enhance -> self_att_refine -> fuse_project -> encoder_stack.
  Tensor operator()(const ModalityBundle& bundle) const;

  const std::array<Pathway, 6>& pathways() const { return pathways_; }
  const Pathway& pathway(Modality source, Modality target) const;
  const std::array<AdditiveEncoderBlock, 2>& blocks() const { return blocks_; }
  const nn::Linear& output() const { return out_; }

 private:
  ModelConfig cfg_;
  std::array<Pathway, 6> pathways_;
  std::array<SelfRefine, 3> refine_;
  nn::Linear proj_;
  std::array<AdditiveEncoderBlock, 2> blocks_;
  nn::Linear out_;
};

}  // namespace maven::fusion
