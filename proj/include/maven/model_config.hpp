#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace maven {

// Architecture hyperparameters. The paper preset carries the published
// feature widths (1024/768/768); everything it leaves open is a config value.
struct ModelConfig {
  // visual
  std::size_t d_v = 64;
  std::size_t patch = 4;
  std::size_t window = 4;
  std::size_t visual_layers = 2;
  // audio
  std::size_t d_a = 48;
  std::size_t mel_bands = 40;
  std::size_t stft_window = 400;
  std::size_t stft_hop = 160;
  double sample_rate = 16000.0;
  std::vector<std::size_t> conv_channels{32, 48};
  std::size_t conv_kernel = 3;
  std::size_t conv_stride = 2;
  // text
  std::size_t d_t = 48;
  std::size_t vocab_size = 256;
  std::size_t max_position = 64;
  std::size_t text_layers = 2;
  // shared by encoder blocks
  std::size_t heads = 4;
  std::size_t ffn_mult = 2;
  double ln_eps = 1e-5;
  // fusion
  std::size_t d_proj = 64;
  std::size_t d_beit = 64;
  std::size_t fusion_heads = 4;
  double gate_init = 0.5;
  // prediction head
  std::size_t d1 = 64;
  std::size_t d2 = 32;
  double dropout = 0.2;

  std::uint64_t seed = 1234;

  // Shared query/key width of the cross-modal pathways.
  std::size_t cross_dk() const { return d_proj / fusion_heads; }

  static ModelConfig desk();
  static ModelConfig paper();

  // InvalidConfig on divisibility or zero-extent violations.
  void validate() const;
};

}  // namespace maven
