#include "maven/fusion.hpp"

#include "maven/error.hpp"
#include "maven/ops.hpp"

namespace maven::fusion {

namespace {

std::size_t width_of(const ModelConfig& cfg, Modality m) {
  switch (m) {
    case Modality::Visual: return cfg.d_v;
    case Modality::Audio: return cfg.d_a;
    case Modality::Text: return cfg.d_t;
  }
  return 0;
}

}  // namespace

std::string Pathway::name() const {
  return std::string(modality_tag(source)) + "_to_" + std::string(modality_tag(target));
}

AdditiveAttention AdditiveAttention::create(nn::ParameterStore& store, const std::string& name, std::size_t d,
                                            std::size_t d_att) {
  return {store.xavier(name + ".w_query", d, d_att), store.xavier(name + ".w_key", d, d_att),
          store.zeros(name + ".bias", {d_att}), store.xavier(name + ".score", d_att, 1)};
}

Tensor additive_attention(const Tensor& h, const AdditiveAttention& params, const std::string& site) {
  const std::size_t t = h.rows();
  const Tensor pq = ops::matmul(h, params.w_query);
  const Tensor pk = ops::matmul(h, params.w_key);
  std::vector<std::size_t> rep(t * t), tile(t * t);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < t; ++j) {
      rep[i * t + j] = i;
      tile[i * t + j] = j;
    }
  const Tensor pre = ops::add_row(ops::add(ops::gather_rows(pq, rep), ops::gather_rows(pk, tile)), params.bias);
  const Tensor scores = ops::reshape(ops::matmul(ops::tanh(pre), params.score), {t, t});
  const Tensor weights = ops::softmax(scores);
  nn::trace_attention(site, weights);
  return ops::matmul(weights, h);
}

AdditiveEncoderBlock AdditiveEncoderBlock::create(nn::ParameterStore& store, const std::string& name, std::size_t d,
                                                  std::size_t d_hidden, double eps) {
  return {AdditiveAttention::create(store, name + ".attn", d, d), nn::LayerNorm::create(store, name + ".norm1", d, eps),
          nn::FeedForward::create(store, name + ".ffn", d, d_hidden),
          nn::LayerNorm::create(store, name + ".norm2", d, eps)};
}

Tensor AdditiveEncoderBlock::operator()(const Tensor& h) const {
  const Tensor y = norm1(ops::add(h, additive_attention(h, attention)));
  return norm2(ops::add(y, ffn(y)));
}

Tensor SelfRefine::operator()(const Tensor& f, const std::string& site) const {
  return norm(ops::add(attention(f, f, {}, site), f));
}

Fusion::Fusion(nn::ParameterStore& store, const ModelConfig& cfg) : cfg_(cfg) {
  cfg.validate();
  const std::size_t dk = cfg.cross_dk();
  for (std::size_t i = 0; i < kPathwayOrder.size(); ++i) {
    const auto [src, dst] = kPathwayOrder[i];
    Pathway p{src, dst, {}, {}, {}, {}};
    const std::string prefix = "fusion.pathway." + p.name();
    p.w_query = store.xavier(prefix + ".q", width_of(cfg, src), dk);
    p.w_key = store.xavier(prefix + ".k", width_of(cfg, dst), dk);
    p.w_value = store.xavier(prefix + ".v", width_of(cfg, dst), width_of(cfg, dst));
    p.gate = store.constant("fusion.gate." + p.name(), {1}, cfg.gate_init);
    pathways_[i] = p;
  }
  for (Modality m : kModalities) {
    const std::string prefix = "fusion.refine." + std::string(modality_tag(m));
    const std::size_t d = width_of(cfg, m);
    refine_[index_of(m)] = {nn::MultiHeadAttention::create(store, prefix + ".attn", d, cfg.fusion_heads),
                            nn::LayerNorm::create(store, prefix + ".norm", d, cfg.ln_eps)};
  }
  proj_ = nn::Linear::create(store, "fusion.proj", cfg.d_v + cfg.d_a + cfg.d_t, cfg.d_proj);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    blocks_[b] = AdditiveEncoderBlock::create(store, "fusion.beit." + std::to_string(b), cfg.d_proj,
                                              cfg.d_proj * cfg.ffn_mult, cfg.ln_eps);
  }
  out_ = nn::Linear::create(store, "fusion.out", cfg.d_proj, cfg.d_beit);
}

const Pathway& Fusion::pathway(Modality source, Modality target) const {
  for (const auto& p : pathways_) {
    if (p.source == source && p.target == target) return p;
  }
  throw Error(ErrorCode::InvalidConfig, "no pathway from a modality to itself");
}

Tensor Fusion::cross_modal_attention(const Pathway& p, const Tensor& f_source, const Tensor& f_target) const {
  if (f_source.rows() != f_target.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "pathway " + p.name() + ": sequences of length " +
                                              std::to_string(f_source.rows()) + " and " +
                                              std::to_string(f_target.rows()));
  }
  if (f_source.cols() != p.w_query.dim(0) || f_target.cols() != p.w_key.dim(0)) {
    throw Error(ErrorCode::ShapeMismatch, "pathway " + p.name() + ": feature widths " +
                                              shape_str(f_source.shape()) + ", " + shape_str(f_target.shape()));
  }
  const Tensor q = ops::matmul(f_source, p.w_query);
  const Tensor k = ops::matmul(f_target, p.w_key);
  const Tensor v = ops::matmul(f_target, p.w_value);
  return nn::scaled_dot_attention(q, k, v, {}, "fusion.pathway." + p.name());
}

std::array<Tensor, 3> Fusion::enhance(const ModalityBundle& bundle) const {
  bundle.validate();
  std::array<Tensor, 3> out = bundle.features;
  for (const auto& p : pathways_) {
    if (!bundle.has(p.source) || !bundle.has(p.target)) continue;
    const Tensor a = cross_modal_attention(p, bundle[p.source], bundle[p.target]);
    Tensor& dst = out[index_of(p.target)];
    dst = ops::add(dst, ops::scale_by(a, p.gate));
  }
  return out;
}

Tensor Fusion::self_att_refine(Modality m, const Tensor& f_enhanced) const {
  return refine_[index_of(m)](f_enhanced, "fusion.refine." + std::string(modality_tag(m)));
}

Tensor Fusion::fuse_project(const std::array<Tensor, 3>& refined) const {
  const std::size_t t = refined[0].rows();
  for (const auto& r : refined) {
    if (r.rows() != t) throw Error(ErrorCode::ShapeMismatch, "fuse_project: modality lengths differ");
  }
  return proj_(ops::concat_cols({refined[0], refined[1], refined[2]}));
}

Tensor Fusion::encoder_stack(const Tensor& projected) const {
  return out_(blocks_[1](blocks_[0](projected)));
}

Tensor Fusion::operator()(const ModalityBundle& bundle) const {
  const auto enhanced = enhance(bundle);
  std::array<Tensor, 3> refined;
  for (Modality m : kModalities) refined[index_of(m)] = self_att_refine(m, enhanced[index_of(m)]);
  return encoder_stack(fuse_project(refined));
}

}  // namespace maven::fusion
