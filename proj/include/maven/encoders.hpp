#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "maven/bundle.hpp"
#include "maven/model_config.hpp"
#include "maven/nn.hpp"
#include "maven/tensor.hpp"

namespace maven::encoders {

struct VideoClip {
  Tensor frames;  // T x H x W x 3, values in [0, 1]
  double frame_rate = 25.0;

  std::size_t steps() const { return frames.dim(0); }
  // IndivisibleExtent unless H and W divide by patch and the token grid
  // divides by window; ShapeMismatch for a wrong rank or channel count.
  void validate(std::size_t patch, std::size_t window) const;
};

struct AudioTrack {
  Tensor samples;  // L, mono, values in [-1, 1]
  double sample_rate = 16000.0;
};

struct Transcript {
  std::vector<std::size_t> token_ids;
  std::size_t vocab_size = 0;
};

// ---------------------------------------------------------------------------
// Visual pipeline

// (H x W x 3) -> (HW/P^2 x 3P^2); each row is one patch flattened in
// (row, column, channel) order. IndivisibleExtent when P does not divide H, W.
Tensor patch_partition(const Tensor& frame, std::size_t patch);
Tensor patch_embed(const Tensor& frame, std::size_t patch, const nn::Linear& projection);

// Window id of every token of a row-major grid_h x grid_w grid.
std::vector<std::size_t> window_partition(std::size_t grid_h, std::size_t grid_w, std::size_t window);
std::size_t window_count(std::size_t grid_h, std::size_t grid_w, std::size_t window);

// N x N attend mask (N = grid_h * grid_w) over a grid already rolled by
// `shift`: tokens attend only within their window, and for shift > 0 only to
// tokens from the same pre-roll region, so wrapped tokens never mix.
std::vector<unsigned char> shifted_window_mask(std::size_t grid_h, std::size_t grid_w, std::size_t window,
                                               std::size_t shift);

// One Swin block. Even layer_index: plain windows; odd: the grid is rolled by
// floor(M/2) before windowing and rolled back after. Residual + LayerNorm
// around attention and the feed-forward.
Tensor sw_msa_layer(const Tensor& tokens, std::size_t layer_index, std::size_t grid_h, std::size_t grid_w,
                    std::size_t window, const nn::EncoderBlock& block);

class VisualEncoder {
 public:
  VisualEncoder(nn::ParameterStore& store, const ModelConfig& cfg);

  // Per frame: patch_embed -> Swin layers -> spatial mean -> linear; rows
  // stacked over T.
  Tensor operator()(const VideoClip& clip) const;
  Tensor encode_frame(const Tensor& frame) const;

 private:
  std::size_t patch_;
  std::size_t window_;
  nn::Linear patch_proj_;
  std::vector<nn::EncoderBlock> layers_;
  nn::Linear out_;
};

// ---------------------------------------------------------------------------
// Audio pipeline

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// bands x (window/2 + 1) triangular filters on [0, sample_rate/2].
std::vector<double> mel_filterbank(std::size_t bands, std::size_t window, double sample_rate);
// Center frequency in Hz of each band.
std::vector<double> mel_band_centers(std::size_t bands, double sample_rate);

// Magnitude STFT by direct DFT with a periodic Hann window, mel filterbank,
// then log(x + 1e-10). Output (floor((L - win)/hop) + 1) x bands.
// AudioTooShort when L < win.
Tensor log_mel(const AudioTrack& audio, std::size_t bands, std::size_t window, std::size_t hop);

std::size_t conv_output_length(std::size_t length, std::size_t kernel, std::size_t stride);

// 1-D convolution over time as im2col + matmul; weight is (kernel*C_in x C_out).
Tensor conv1d(const Tensor& x, const nn::Linear& weight, std::size_t kernel, std::size_t stride);

class AudioEncoder {
 public:
  AudioEncoder(nn::ParameterStore& store, const ModelConfig& cfg);

  // log_mel -> conv blocks (ReLU) -> encoder block -> linear to d_a ->
  // temporal_interpolate to target_steps.
  Tensor operator()(const AudioTrack& audio, std::size_t target_steps) const;
  Tensor encode_spectrogram(const Tensor& log_mel_frames, std::size_t target_steps) const;

 private:
  ModelConfig cfg_;
  std::vector<nn::Linear> convs_;
  nn::EncoderBlock block_;
  nn::Linear out_;
};

// ---------------------------------------------------------------------------
// Text pipeline

// Lower-cased whitespace/punctuation tokenizer over a corpus vocabulary.
// Id 0 is <unk>.
class Vocabulary {
 public:
  static constexpr std::size_t kUnk = 0;

  // Keeps the (max_size - 1) most frequent tokens; ties break alphabetically.
  static Vocabulary build(const std::vector<std::string>& corpus, std::size_t max_size);
  static std::vector<std::string> split(std::string_view text);

  std::vector<std::size_t> encode(std::string_view text) const;
  std::size_t size() const { return tokens_.size(); }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::vector<std::string> tokens_{"<unk>"};
  std::unordered_map<std::string, std::size_t> ids_;
};

// Files ending in ".ids" hold whitespace-separated integer ids; anything else
// is plain text run through the vocabulary.
Transcript load_transcript(const std::string& path, const Vocabulary& vocab);

class TextEncoder {
 public:
  TextEncoder(nn::ParameterStore& store, const ModelConfig& cfg);

  // Token + positional embedding, then the encoder blocks. (S x d_t).
  // TokenOutOfVocab / SequenceTooLong on invalid transcripts.
  Tensor operator()(const Transcript& transcript) const;

 private:
  std::size_t max_position_;
  Tensor token_embedding_;     // vocab x d_t
  Tensor position_embedding_;  // max_position x d_t
  std::vector<nn::EncoderBlock> blocks_;
};

// Linear resampling along rows with endpoint alignment; row j samples source
// position j (S-1)/(T-1). target == 1 yields the mean row; S == T returns x.
Tensor temporal_interpolate(const Tensor& x, std::size_t target_steps);

// ---------------------------------------------------------------------------

struct Encoders {
  VisualEncoder visual;
  AudioEncoder audio;
  TextEncoder text;

  Encoders(nn::ParameterStore& store, const ModelConfig& cfg);

  // All three aligned to the clip's frame count.
  ModalityBundle operator()(const VideoClip& clip, const AudioTrack& audio, const Transcript& transcript) const;
};

}  // namespace maven::encoders
