#include "maven/encoders.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "maven/error.hpp"
#include "maven/ops.hpp"

namespace maven::encoders {

namespace {

constexpr double kLogFloor = 1e-10;

[[noreturn]] void indivisible(const std::string& what) { throw Error(ErrorCode::IndivisibleExtent, what); }

std::string str(std::size_t v) { return std::to_string(v); }

}  // namespace

// ---------------------------------------------------------------------------
// Visual

void VideoClip::validate(std::size_t patch, std::size_t window) const {
  if (frames.ndim() != 4 || frames.dim(3) != 3) {
    throw Error(ErrorCode::ShapeMismatch, "video frames must be T x H x W x 3, got " + shape_str(frames.shape()));
  }
  const std::size_t h = frames.dim(1), w = frames.dim(2);
  if (h % patch || w % patch) indivisible("frame " + str(h) + "x" + str(w) + " not divisible by patch " + str(patch));
  if ((h / patch) % window || (w / patch) % window) {
    indivisible("token grid " + str(h / patch) + "x" + str(w / patch) + " not divisible by window " + str(window));
  }
}

Tensor patch_partition(const Tensor& frame, std::size_t patch) {
  if (frame.ndim() != 3 || frame.dim(2) != 3) {
    throw Error(ErrorCode::ShapeMismatch, "frame must be H x W x 3, got " + shape_str(frame.shape()));
  }
  const std::size_t h = frame.dim(0), w = frame.dim(1);
  if (patch == 0 || h % patch || w % patch) {
    indivisible("frame " + str(h) + "x" + str(w) + " not divisible by patch " + str(patch));
  }
  const std::size_t gh = h / patch, gw = w / patch, width = 3 * patch * patch;
  std::vector<double> out(gh * gw * width);
  const auto px = frame.data();
  for (std::size_t pr = 0; pr < gh; ++pr)
    for (std::size_t pc = 0; pc < gw; ++pc) {
      double* dst = out.data() + (pr * gw + pc) * width;
      for (std::size_t y = 0; y < patch; ++y)
        for (std::size_t x = 0; x < patch; ++x)
          for (std::size_t ch = 0; ch < 3; ++ch) {
            *dst++ = px[((pr * patch + y) * w + (pc * patch + x)) * 3 + ch];
          }
    }
  return Tensor::from({gh * gw, width}, std::move(out));
}

Tensor patch_embed(const Tensor& frame, std::size_t patch, const nn::Linear& projection) {
  return projection(patch_partition(frame, patch));
}

std::vector<std::size_t> window_partition(std::size_t grid_h, std::size_t grid_w, std::size_t window) {
  if (window == 0 || grid_h % window || grid_w % window) {
    indivisible("grid " + str(grid_h) + "x" + str(grid_w) + " not divisible by window " + str(window));
  }
  const std::size_t per_row = grid_w / window;
  std::vector<std::size_t> ids(grid_h * grid_w);
  for (std::size_t r = 0; r < grid_h; ++r)
    for (std::size_t c = 0; c < grid_w; ++c) ids[r * grid_w + c] = (r / window) * per_row + c / window;
  return ids;
}

std::size_t window_count(std::size_t grid_h, std::size_t grid_w, std::size_t window) {
  const auto ids = window_partition(grid_h, grid_w, window);
  return *std::max_element(ids.begin(), ids.end()) + 1;
}

std::vector<unsigned char> shifted_window_mask(std::size_t grid_h, std::size_t grid_w, std::size_t window,
                                               std::size_t shift) {
  const auto win = window_partition(grid_h, grid_w, window);
  // Region bands of the rolled grid: [0, G-M), [G-M, G-s), [G-s, G).
  auto band = [&](std::size_t pos, std::size_t extent) -> std::size_t {
    if (shift == 0) return 0;
    if (pos < extent - window) return 0;
    if (pos < extent - shift) return 1;
    return 2;
  };
  const std::size_t n = grid_h * grid_w;
  std::vector<std::size_t> region(n);
  for (std::size_t r = 0; r < grid_h; ++r)
    for (std::size_t c = 0; c < grid_w; ++c) region[r * grid_w + c] = band(r, grid_h) * 3 + band(c, grid_w);
  std::vector<unsigned char> mask(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) mask[i * n + j] = (win[i] == win[j] && region[i] == region[j]) ? 1 : 0;
  return mask;
}

Tensor sw_msa_layer(const Tensor& tokens, std::size_t layer_index, std::size_t grid_h, std::size_t grid_w,
                    std::size_t window, const nn::EncoderBlock& block) {
  if (tokens.rows() != grid_h * grid_w) {
    throw Error(ErrorCode::ShapeMismatch, "token count " + str(tokens.rows()) + " does not fill a " + str(grid_h) +
                                              "x" + str(grid_w) + " grid");
  }
  const std::size_t shift = (layer_index % 2 == 1) ? window / 2 : 0;
  const auto mask = shifted_window_mask(grid_h, grid_w, window, shift);
  const auto s = static_cast<long>(shift);
  const Tensor rolled = shift ? ops::cyclic_shift(tokens, grid_h, grid_w, s) : tokens;
  Tensor attended = block.attention(rolled, rolled, mask, "visual.sw_msa");
  if (shift) attended = ops::cyclic_shift(attended, grid_h, grid_w, -s);
  const Tensor y = block.norm1(ops::add(tokens, attended));
  return block.norm2(ops::add(y, block.ffn(y)));
}

VisualEncoder::VisualEncoder(nn::ParameterStore& store, const ModelConfig& cfg)
    : patch_(cfg.patch),
      window_(cfg.window),
      patch_proj_(nn::Linear::create(store, "visual.patch_embed", 3 * cfg.patch * cfg.patch, cfg.d_v)) {
  for (std::size_t l = 0; l < cfg.visual_layers; ++l) {
    layers_.push_back(nn::EncoderBlock::create(store, "visual.swin." + str(l), cfg.d_v, cfg.heads,
                                               cfg.d_v * cfg.ffn_mult, cfg.ln_eps));
  }
  out_ = nn::Linear::create(store, "visual.out", cfg.d_v, cfg.d_v);
}

Tensor VisualEncoder::encode_frame(const Tensor& frame) const {
  const std::size_t gh = frame.dim(0) / patch_, gw = frame.dim(1) / patch_;
  Tensor tokens = patch_embed(frame, patch_, patch_proj_);
  for (std::size_t l = 0; l < layers_.size(); ++l) tokens = sw_msa_layer(tokens, l, gh, gw, window_, layers_[l]);
  return out_(ops::mean_rows(tokens));
}

Tensor VisualEncoder::operator()(const VideoClip& clip) const {
  clip.validate(patch_, window_);
  const std::size_t t = clip.frames.dim(0), h = clip.frames.dim(1), w = clip.frames.dim(2);
  const std::size_t frame_size = h * w * 3;
  std::vector<Tensor> rows;
  rows.reserve(t);
  const auto all = clip.frames.data();
  for (std::size_t i = 0; i < t; ++i) {
    const auto px = all.subspan(i * frame_size, frame_size);
    rows.push_back(encode_frame(Tensor::from({h, w, 3}, std::vector<double>(px.begin(), px.end()))));
  }
  return ops::concat_rows(rows);
}

// ---------------------------------------------------------------------------
// Audio

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

std::vector<double> mel_edges(std::size_t bands, double sample_rate) {
  const double top = hz_to_mel(sample_rate / 2.0);
  std::vector<double> hz(bands + 2);
  for (std::size_t i = 0; i < hz.size(); ++i) {
    hz[i] = mel_to_hz(top * static_cast<double>(i) / static_cast<double>(bands + 1));
  }
  return hz;
}

}  // namespace

std::vector<double> mel_band_centers(std::size_t bands, double sample_rate) {
  const auto edges = mel_edges(bands, sample_rate);
  return {edges.begin() + 1, edges.end() - 1};
}

std::vector<double> mel_filterbank(std::size_t bands, std::size_t window, double sample_rate) {
  const auto edges = mel_edges(bands, sample_rate);
  const std::size_t bins = window / 2 + 1;
  std::vector<double> fb(bands * bins, 0.0);
  for (std::size_t b = 0; b < bands; ++b) {
    const double lo = edges[b], mid = edges[b + 1], hi = edges[b + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / static_cast<double>(window);
      double wgt = 0.0;
      if (f >= lo && f <= mid) {
        wgt = (f - lo) / (mid - lo);
      } else if (f > mid && f <= hi) {
        wgt = (hi - f) / (hi - mid);
      }
      fb[b * bins + k] = wgt;
    }
  }
  return fb;
}

Tensor log_mel(const AudioTrack& audio, std::size_t bands, std::size_t window, std::size_t hop) {
  if (window < hop || hop == 0 || bands == 0) {
    throw Error(ErrorCode::InvalidConfig, "log_mel needs window >= hop >= 1 and at least one band");
  }
  const auto x = audio.samples.data();
  if (x.size() < window) {
    throw Error(ErrorCode::AudioTooShort,
                "audio has " + str(x.size()) + " samples, fewer than the " + str(window) + "-sample window");
  }
  const std::size_t frames = (x.size() - window) / hop + 1;
  const std::size_t bins = window / 2 + 1;
  const auto fb = mel_filterbank(bands, window, audio.sample_rate);

  std::vector<double> hann(window), cos_t(window), sin_t(window);
  const double n = static_cast<double>(window);
  for (std::size_t i = 0; i < window; ++i) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(i) / n;
    hann[i] = 0.5 - 0.5 * std::cos(angle);
    cos_t[i] = std::cos(angle);
    sin_t[i] = std::sin(angle);
  }

  std::vector<double> out(frames * bands);
  std::vector<double> frame(window), mag(bins);
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t i = 0; i < window; ++i) frame[i] = x[f * hop + i] * hann[i];
    for (std::size_t k = 0; k < bins; ++k) {
      double re = 0.0, im = 0.0;
      for (std::size_t i = 0; i < window; ++i) {
        const std::size_t idx = (k * i) % window;
        re += frame[i] * cos_t[idx];
        im -= frame[i] * sin_t[idx];
      }
      mag[k] = std::sqrt(re * re + im * im);
    }
    for (std::size_t b = 0; b < bands; ++b) {
      double e = 0.0;
      for (std::size_t k = 0; k < bins; ++k) e += fb[b * bins + k] * mag[k];
      out[f * bands + b] = std::log(e + kLogFloor);
    }
  }
  return Tensor::from({frames, bands}, std::move(out));
}

std::size_t conv_output_length(std::size_t length, std::size_t kernel, std::size_t stride) {
  if (length < kernel) return 0;
  return (length - kernel) / stride + 1;
}

Tensor conv1d(const Tensor& x, const nn::Linear& weight, std::size_t kernel, std::size_t stride) {
  const std::size_t out_len = conv_output_length(x.rows(), kernel, stride);
  if (out_len == 0) {
    throw Error(ErrorCode::AudioTooShort,
                "sequence of " + str(x.rows()) + " frames is shorter than conv kernel " + str(kernel));
  }
  std::vector<std::size_t> idx;
  idx.reserve(out_len * kernel);
  for (std::size_t i = 0; i < out_len; ++i)
    for (std::size_t j = 0; j < kernel; ++j) idx.push_back(i * stride + j);
  const Tensor cols = ops::reshape(ops::gather_rows(x, idx), {out_len, kernel * x.cols()});
  return weight(cols);
}

AudioEncoder::AudioEncoder(nn::ParameterStore& store, const ModelConfig& cfg) : cfg_(cfg) {
  std::size_t in = cfg.mel_bands;
  for (std::size_t i = 0; i < cfg.conv_channels.size(); ++i) {
    convs_.push_back(nn::Linear::create(store, "audio.conv." + str(i), cfg.conv_kernel * in, cfg.conv_channels[i]));
    in = cfg.conv_channels[i];
  }
  block_ = nn::EncoderBlock::create(store, "audio.block", in, cfg.heads, in * cfg.ffn_mult, cfg.ln_eps);
  out_ = nn::Linear::create(store, "audio.out", in, cfg.d_a);
}

Tensor AudioEncoder::encode_spectrogram(const Tensor& frames, std::size_t target_steps) const {
  Tensor h = frames;
  for (const auto& conv : convs_) h = ops::relu(conv1d(h, conv, cfg_.conv_kernel, cfg_.conv_stride));
  h = block_(h, {}, "audio.mha");
  return temporal_interpolate(out_(h), target_steps);
}

Tensor AudioEncoder::operator()(const AudioTrack& audio, std::size_t target_steps) const {
  return encode_spectrogram(log_mel(audio, cfg_.mel_bands, cfg_.stft_window, cfg_.stft_hop), target_steps);
}

// ---------------------------------------------------------------------------
// Text

std::vector<std::string> Vocabulary::split(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (std::ispunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return out;
}

Vocabulary Vocabulary::build(const std::vector<std::string>& corpus, std::size_t max_size) {
  std::map<std::string, std::size_t> counts;
  for (const auto& line : corpus)
    for (auto& tok : split(line)) ++counts[tok];
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  for (const auto& [tok, n] : ranked) {
    if (v.tokens_.size() >= max_size) break;
    v.ids_[tok] = v.tokens_.size();
    v.tokens_.push_back(tok);
  }
  return v;
}

std::vector<std::size_t> Vocabulary::encode(std::string_view text) const {
  std::vector<std::size_t> ids;
  for (const auto& tok : split(text)) {
    auto it = ids_.find(tok);
    ids.push_back(it == ids_.end() ? kUnk : it->second);
  }
  return ids;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write vocabulary " + path);
  for (std::size_t i = 1; i < tokens_.size(); ++i) out << tokens_[i] << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read vocabulary " + path);
  Vocabulary v;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    v.ids_[line] = v.tokens_.size();
    v.tokens_.push_back(line);
  }
  return v;
}

Transcript load_transcript(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot read transcript " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  Transcript tr;
  tr.vocab_size = vocab.size();
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".ids") == 0) {
    long long id = 0;
    while (buf >> id) {
      if (id < 0) throw Error(ErrorCode::TokenOutOfVocab, path + ": negative token id");
      tr.token_ids.push_back(static_cast<std::size_t>(id));
    }
    if (!buf.eof()) throw Error(ErrorCode::IoFailure, path + ": non-integer entry in id list");
  } else {
    tr.token_ids = vocab.encode(buf.str());
  }
  return tr;
}

TextEncoder::TextEncoder(nn::ParameterStore& store, const ModelConfig& cfg)
    : max_position_(cfg.max_position),
      token_embedding_(store.xavier("text.token_embedding", cfg.vocab_size, cfg.d_t)),
      position_embedding_(store.xavier("text.position_embedding", cfg.max_position, cfg.d_t)) {
  for (std::size_t l = 0; l < cfg.text_layers; ++l) {
    blocks_.push_back(nn::EncoderBlock::create(store, "text.block." + str(l), cfg.d_t, cfg.heads,
                                               cfg.d_t * cfg.ffn_mult, cfg.ln_eps));
  }
}

Tensor TextEncoder::operator()(const Transcript& transcript) const {
  const auto& ids = transcript.token_ids;
  if (ids.empty()) throw Error(ErrorCode::ShapeMismatch, "empty transcript");
  if (ids.size() > max_position_) {
    throw Error(ErrorCode::SequenceTooLong,
                "transcript of " + str(ids.size()) + " tokens exceeds max_position " + str(max_position_));
  }
  const std::size_t vocab = token_embedding_.dim(0);
  for (std::size_t id : ids) {
    if (id >= vocab) throw Error(ErrorCode::TokenOutOfVocab, "token id " + str(id) + " >= vocab size " + str(vocab));
  }
  std::vector<std::size_t> positions(ids.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
  Tensor h = ops::add(ops::gather_rows(token_embedding_, ids), ops::gather_rows(position_embedding_, positions));
  for (const auto& block : blocks_) h = block(h, {}, "text.mha");
  return h;
}

Tensor temporal_interpolate(const Tensor& x, std::size_t target_steps) {
  const std::size_t s = x.rows();
  if (target_steps == 0) throw Error(ErrorCode::ShapeMismatch, "temporal_interpolate: target length must be >= 1");
  if (s == target_steps) return x;
  std::vector<double> weights(target_steps * s, 0.0);
  if (target_steps == 1) {
    std::fill(weights.begin(), weights.end(), 1.0 / static_cast<double>(s));
  } else {
    for (std::size_t j = 0; j < target_steps; ++j) {
      const double pos = static_cast<double>(j) * static_cast<double>(s - 1) / static_cast<double>(target_steps - 1);
      const auto lo = std::min(static_cast<std::size_t>(std::floor(pos)), s - 1);
      const double frac = pos - static_cast<double>(lo);
      weights[j * s + lo] += 1.0 - frac;
      if (frac > 0.0) weights[j * s + lo + 1] += frac;
    }
  }
  return ops::matmul(Tensor::from({target_steps, s}, std::move(weights)), x);
}

// ---------------------------------------------------------------------------

Encoders::Encoders(nn::ParameterStore& store, const ModelConfig& cfg)
    : visual(store, cfg), audio(store, cfg), text(store, cfg) {}

ModalityBundle Encoders::operator()(const VideoClip& clip, const AudioTrack& track,
                                    const Transcript& transcript) const {
  ModalityBundle b;
  b.features[0] = visual(clip);
  const std::size_t t = clip.steps();
  b.features[1] = audio(track, t);
  b.features[2] = temporal_interpolate(text(transcript), t);
  b.validate();
  return b;
}

}  // namespace maven::encoders
