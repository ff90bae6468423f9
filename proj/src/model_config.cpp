#include "maven/model_config.hpp"

#include <string>

#include "maven/error.hpp"

namespace maven {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::InvalidConfig, what);
}

}  // namespace

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::paper() {
  ModelConfig c;
  c.d_v = 1024;
  c.d_a = 768;
  c.d_t = 768;
  c.window = 7;
  c.heads = 16;
  c.conv_channels = {512, 768};
  c.vocab_size = 50265;
  c.max_position = 512;
  c.text_layers = 12;
  c.visual_layers = 12;
  c.d_proj = 512;
  c.d_beit = 512;
  c.fusion_heads = 8;
  c.d1 = 256;
  c.d2 = 64;
  return c;
}

void ModelConfig::validate() const {
  require(d_v && d_a && d_t && d_proj && d_beit && d1 && d2, "feature widths must be positive");
  require(heads > 0 && d_v % heads == 0 && d_a % heads == 0 && d_t % heads == 0,
          "d_v, d_a and d_t must each be divisible by heads");
  require(fusion_heads > 0 && d_proj % fusion_heads == 0, "d_proj must be divisible by fusion_heads");
  require(d_v % fusion_heads == 0 && d_a % fusion_heads == 0 && d_t % fusion_heads == 0,
          "modality widths must be divisible by fusion_heads");
  require(patch > 0 && window > 0, "patch and window sizes must be positive");
  require(!conv_channels.empty() && conv_kernel > 0 && conv_stride > 0, "audio conv spec must be non-empty");
  require(conv_channels.back() % heads == 0, "last audio conv width must be divisible by heads");
  require(stft_window >= stft_hop && stft_hop >= 1, "need stft_window >= stft_hop >= 1");
  require(mel_bands >= 1 && sample_rate > 0, "mel bands and sample rate must be positive");
  require(vocab_size >= 2 && max_position >= 1, "vocab must hold <unk> plus one token");
  require(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
  require(ffn_mult >= 1 && ln_eps > 0.0, "ffn_mult >= 1 and ln_eps > 0 required");
}

}  // namespace maven
