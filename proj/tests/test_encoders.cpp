#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "maven/encoders.hpp"
#include "maven/gradcheck.hpp"
#include "maven/ops.hpp"
#include "test_util.hpp"

using namespace maven;
using namespace maven::encoders;
using maven::testing::check_throws_code;
using maven::testing::random_tensor;
using maven::testing::uniform_tensor;

namespace {

ModelConfig tiny_visual_config() {
  ModelConfig cfg;
  cfg.patch = 4;
  cfg.window = 2;
  return cfg;
}

VideoClip random_clip(std::size_t t, std::size_t h, std::size_t w, Rng& rng) {
  return {uniform_tensor({t, h, w, 3}, rng, 0.0, 1.0), 25.0};
}

AudioTrack tone(double hz, std::size_t length, double sample_rate = 16000.0) {
  std::vector<double> s(length);
  for (std::size_t i = 0; i < length; ++i) {
    s[i] = 0.5 * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / sample_rate);
  }
  return {Tensor::from({length}, std::move(s)), sample_rate};
}

Tensor weighted_sum(const Tensor& x, const Tensor& w) { return ops::sum(ops::mul(x, w)); }

}  // namespace

TEST_CASE("patch_embed examples") {
  Rng rng(1);
  const Tensor frame = uniform_tensor({4, 4, 3}, rng, 0.0, 1.0);
  const Tensor patches = patch_partition(frame, 2);
  CHECK(patches.shape() == Shape{4, 12});
  // second patch is rows 0..1, columns 2..3
  CHECK(patches.at(1, 0) == frame.data()[(0 * 4 + 2) * 3 + 0]);
  CHECK(patches.at(1, 11) == frame.data()[(1 * 4 + 3) * 3 + 2]);

  nn::ParameterStore store(3);
  const auto proj = nn::Linear::create(store, "p", 12, 8);
  const Tensor e = patch_embed(Tensor::zeros({4, 4, 3}), 2, proj);
  CHECK(e.shape() == Shape{4, 8});
  for (double v : e.data()) CHECK(v == 0.0);

  check_throws_code([&] { patch_partition(Tensor::zeros({5, 4, 3}), 2); }, ErrorCode::IndivisibleExtent);
  const VideoClip bad{Tensor::zeros({1, 8, 8, 3}), 25.0};
  check_throws_code([&] { bad.validate(4, 4); }, ErrorCode::IndivisibleExtent);
}

TEST_CASE("window partition and shifted mask") {
  CHECK(window_count(4, 4, 2) == 4);
  const auto win = window_partition(4, 4, 2);
  CHECK(win[0] == win[1]);
  CHECK(win[0] == win[4]);
  CHECK(win[0] != win[2]);
  CHECK(win[0] != win[8]);

  // unshifted mask is exactly the window equivalence relation
  const auto plain = shifted_window_mask(4, 4, 2, 0);
  for (std::size_t i = 0; i < 16; ++i)
    for (std::size_t j = 0; j < 16; ++j) CHECK((plain[i * 16 + j] != 0) == (win[i] == win[j]));

  // After rolling by one, the last window holds tokens from the far edge of
  // the original grid. Two tokens may attend only if they were neighbours
  // in the same window before the roll.
  const auto shifted = shifted_window_mask(4, 4, 2, 1);
  for (std::size_t i = 0; i < 16; ++i) {
    for (std::size_t j = 0; j < 16; ++j) {
      if (!shifted[i * 16 + j]) continue;
      CHECK(win[i] == win[j]);
      // original grid coordinates of rolled positions
      const std::size_t ri = (i / 4 + 1) % 4, ci = (i % 4 + 1) % 4;
      const std::size_t rj = (j / 4 + 1) % 4, cj = (j % 4 + 1) % 4;
      CHECK(std::max(ri, rj) - std::min(ri, rj) <= 1);
      CHECK(std::max(ci, cj) - std::min(ci, cj) <= 1);
    }
  }
  for (std::size_t i = 0; i < 16; ++i) CHECK(shifted[i * 16 + i] == 1);
}

TEST_CASE("uniform attention returns the mean value row") {
  Rng rng(5);
  const Tensor q = Tensor::from({4, 3}, std::vector<double>(12, 0.7));
  const Tensor v = random_tensor({4, 5}, rng);
  const Tensor out = nn::scaled_dot_attention(q, q, v, {}, "test");
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 5; ++c) {
      const double mean = (v.at(0, c) + v.at(1, c) + v.at(2, c) + v.at(3, c)) / 4.0;
      CHECK(std::abs(out.at(r, c) - mean) < 1e-14);
    }
  }
  // a single key gives weight one
  const Tensor one = nn::scaled_dot_attention(random_tensor({1, 3}, rng), random_tensor({1, 3}, rng),
                                              Tensor::from({1, 2}, {4.0, -2.0}), {}, "test");
  CHECK(one.values() == std::vector<double>{4.0, -2.0});
}

TEST_CASE("sw_msa attention rows sum to one and respect windows") {
  Rng rng(7);
  nn::ParameterStore store(11);
  const auto block = nn::EncoderBlock::create(store, "b", 8, 2, 16, 1e-5);
  const Tensor tokens = random_tensor({16, 8}, rng);
  for (std::size_t layer : {0u, 1u}) {
    nn::AttentionTrace trace;
    {
      nn::ScopedAttentionTrace scope(trace);
      const Tensor out = sw_msa_layer(tokens, layer, 4, 4, 2, block);
      CHECK(out.shape() == Shape{16, 8});
    }
    REQUIRE(trace.entries.size() == 2);
    const auto mask = shifted_window_mask(4, 4, 2, layer == 1 ? 1 : 0);
    for (const auto& e : trace.entries) {
      CHECK(maven::testing::worst_row_sum_error(e.weights) < 1e-12);
      for (std::size_t i = 0; i < 16 * 16; ++i) {
        if (!mask[i]) CHECK(e.weights.data()[i] == 0.0);
      }
    }
  }
  check_throws_code([&] { sw_msa_layer(random_tensor({15, 8}, rng), 0, 4, 4, 2, block); }, ErrorCode::ShapeMismatch);
}

TEST_CASE("cyclic shift then unshift recovers the grid") {
  Rng rng(9);
  const Tensor x = random_tensor({16, 3}, rng);
  const Tensor back = ops::cyclic_shift(ops::cyclic_shift(x, 4, 4, 1), 4, 4, -1);
  CHECK(back.values() == x.values());
  const Tensor s = ops::cyclic_shift(x, 4, 4, 1);
  // rolled (0,0) holds original (1,1)
  CHECK(s.at(0, 0) == x.at(5, 0));
}

TEST_CASE("visual encoder shapes and determinism") {
  Rng rng(13);
  ModelConfig cfg = tiny_visual_config();
  nn::ParameterStore store(cfg.seed);
  const VisualEncoder enc(store, cfg);

  const VideoClip one = random_clip(1, 8, 8, rng);
  CHECK(enc(one).shape() == Shape{1, cfg.d_v});

  VideoClip twin = random_clip(1, 8, 8, rng);
  std::vector<double> doubled = twin.frames.values();
  doubled.insert(doubled.end(), doubled.begin(), doubled.end());
  const VideoClip pair{Tensor::from({2, 8, 8, 3}, doubled), 25.0};
  const Tensor f = enc(pair);
  for (std::size_t c = 0; c < cfg.d_v; ++c) CHECK(f.at(0, c) == f.at(1, c));
  CHECK(enc(pair).values() == f.values());
}

TEST_CASE("visual encoder at the desk preset") {
  Rng rng(17);
  const ModelConfig cfg = ModelConfig::desk();
  nn::ParameterStore store(cfg.seed);
  const VisualEncoder enc(store, cfg);
  NoGradGuard guard;
  CHECK(enc(random_clip(16, 32, 32, rng)).shape() == Shape{16, 64});
}

TEST_CASE("log_mel matches an independent DFT and filterbank") {
  const std::size_t win = 64, hop = 32, bands = 6;
  Rng rng(19);
  const AudioTrack audio{uniform_tensor({200}, rng, -1.0, 1.0), 8000.0};
  const Tensor spec = log_mel(audio, bands, win, hop);
  REQUIRE(spec.shape() == Shape{(200 - win) / hop + 1, bands});

  // oracle: complex exponentials, mel edges recomputed from the HTK formula
  const double top = 2595.0 * std::log10(1.0 + 4000.0 / 700.0);
  std::vector<double> edges(bands + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = 700.0 * (std::pow(10.0, top * static_cast<double>(i) / (bands + 1) / 2595.0) - 1.0);
  }
  const auto x = audio.samples.data();
  for (std::size_t f = 0; f < spec.rows(); ++f) {
    std::vector<double> mag(win / 2 + 1);
    for (std::size_t k = 0; k < mag.size(); ++k) {
      std::complex<double> acc = 0.0;
      for (std::size_t n = 0; n < win; ++n) {
        const double w = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / win));
        acc += x[f * hop + n] * w * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * n) / win);
      }
      mag[k] = std::abs(acc);
    }
    for (std::size_t b = 0; b < bands; ++b) {
      double e = 0.0;
      for (std::size_t k = 0; k < mag.size(); ++k) {
        const double hz = static_cast<double>(k) * 8000.0 / win;
        const double up = (hz - edges[b]) / (edges[b + 1] - edges[b]);
        const double down = (edges[b + 2] - hz) / (edges[b + 2] - edges[b + 1]);
        e += std::max(0.0, std::min(up, down)) * mag[k];
      }
      CHECK(std::abs(spec.at(f, b) - std::log(e + 1e-10)) < 1e-9);
    }
  }
}

TEST_CASE("log_mel examples") {
  const ModelConfig cfg;
  const auto centers = mel_band_centers(cfg.mel_bands, cfg.sample_rate);
  for (std::size_t band : {8u, 15u, 22u, 30u, 37u}) {
    const Tensor spec = log_mel(tone(centers[band], 2000), cfg.mel_bands, cfg.stft_window, cfg.stft_hop);
    for (std::size_t f = 0; f < spec.rows(); ++f) {
      std::size_t best = 0;
      for (std::size_t b = 1; b < spec.cols(); ++b) {
        if (spec.at(f, b) > spec.at(f, best)) best = b;
      }
      CHECK(best == band);
    }
  }

  const AudioTrack silence{Tensor::zeros({1000}), 16000.0};
  const Tensor quiet = log_mel(silence, cfg.mel_bands, cfg.stft_window, cfg.stft_hop);
  for (double v : quiet.data()) CHECK(v == std::log(1e-10));

  const AudioTrack exact{Tensor::zeros({400}), 16000.0};
  CHECK(log_mel(exact, cfg.mel_bands, 400, 160).rows() == 1);

  const AudioTrack shorter{Tensor::zeros({399}), 16000.0};
  check_throws_code([&] { log_mel(shorter, cfg.mel_bands, 400, 160); }, ErrorCode::AudioTooShort);
}

TEST_CASE("audio encoder shapes and determinism") {
  CHECK(conv_output_length(10, 3, 2) == 4);
  CHECK(conv_output_length(2, 3, 2) == 0);

  const ModelConfig cfg;
  nn::ParameterStore store(cfg.seed);
  const AudioEncoder enc(store, cfg);
  Rng rng(23);
  NoGradGuard guard;
  for (std::size_t length : {1360u, 2000u, 4000u}) {
    for (std::size_t t : {1u, 3u, 8u}) {
      const AudioTrack a{uniform_tensor({length}, rng, -1.0, 1.0), 16000.0};
      const Tensor f = enc(a, t);
      CHECK(f.shape() == Shape{t, cfg.d_a});
      CHECK(enc(a, t).values() == f.values());
    }
  }
  // T' = 10 frames -> 4 after one stride-2 kernel-3 conv
  const AudioTrack ten{uniform_tensor({400 + 9 * 160}, rng, -1.0, 1.0), 16000.0};
  CHECK(log_mel(ten, cfg.mel_bands, cfg.stft_window, cfg.stft_hop).rows() == 10);
}

TEST_CASE("vocabulary and transcripts") {
  CHECK(Vocabulary::split("The dog, ok!") == std::vector<std::string>{"the", "dog", ",", "ok", "!"});
  const auto vocab = Vocabulary::build({"the cat sat", "The dog, the cat!"}, 6);
  CHECK(vocab.size() == 6);
  CHECK(vocab.token(0) == "<unk>");
  CHECK(vocab.token(1) == "the");
  CHECK(vocab.token(2) == "cat");
  CHECK(vocab.token(3) == "!");
  CHECK(vocab.token(4) == ",");
  CHECK(vocab.token(5) == "dog");
  CHECK(vocab.encode("the bird cat") == std::vector<std::size_t>{1, 0, 2});
  CHECK(vocab.encode("sat") == std::vector<std::size_t>{0});

  const auto dir = std::filesystem::temp_directory_path() / "maven_vocab_test";
  std::filesystem::create_directories(dir);
  vocab.save((dir / "vocab.txt").string());
  const auto again = Vocabulary::load((dir / "vocab.txt").string());
  CHECK(again.encode("dog the sat") == vocab.encode("dog the sat"));

  std::ofstream((dir / "t.ids")) << "5 1 2\n";
  CHECK(load_transcript((dir / "t.ids").string(), vocab).token_ids == std::vector<std::size_t>{5, 1, 2});
  std::ofstream((dir / "t.txt")) << "The cat.\n";
  CHECK(load_transcript((dir / "t.txt").string(), vocab).token_ids == std::vector<std::size_t>{1, 2, 0});
  std::filesystem::remove_all(dir);
}

TEST_CASE("text encoder examples") {
  ModelConfig cfg;
  cfg.vocab_size = 20;
  cfg.max_position = 8;
  nn::ParameterStore store(cfg.seed);
  const TextEncoder enc(store, cfg);
  CHECK(cfg.d_t / cfg.heads == 12);
  CHECK(store.get("text.block.0.attn.q.weight").shape() == Shape{48, 48});

  const Tensor single = enc({{3}, 20});
  CHECK(single.shape() == Shape{1, 48});

  const Tensor ab = enc({{4, 9}, 20});
  const Tensor ba = enc({{9, 4}, 20});
  CHECK(ab.values() != ba.values());
  // not merely a row permutation either
  bool row_swapped = true;
  for (std::size_t c = 0; c < 48; ++c) row_swapped = row_swapped && ab.at(0, c) == ba.at(1, c);
  CHECK_FALSE(row_swapped);

  check_throws_code([&] { enc({{1, 20}, 20}); }, ErrorCode::TokenOutOfVocab);
  check_throws_code([&] { enc({std::vector<std::size_t>(9, 1), 20}); }, ErrorCode::SequenceTooLong);

  nn::AttentionTrace trace;
  {
    nn::ScopedAttentionTrace scope(trace);
    enc({{1, 2, 3, 4, 5}, 20});
  }
  CHECK(trace.entries.size() == cfg.text_layers * cfg.heads);
  for (const auto& e : trace.entries) CHECK(maven::testing::worst_row_sum_error(e.weights) < 1e-12);
}

TEST_CASE("temporal_interpolate examples and bounds") {
  Rng rng(29);
  const Tensor x = random_tensor({5, 3}, rng);
  CHECK(temporal_interpolate(x, 5).values() == x.values());

  const Tensor up = temporal_interpolate(Tensor::matrix({{0}, {2}}), 3);
  CHECK(up.values() == std::vector<double>{0, 1, 2});

  const Tensor single = Tensor::matrix({{1.5, -2.0}});
  const Tensor spread = temporal_interpolate(single, 4);
  for (std::size_t r = 0; r < 4; ++r) {
    CHECK(spread.at(r, 0) == 1.5);
    CHECK(spread.at(r, 1) == -2.0);
  }

  const Tensor mean = temporal_interpolate(Tensor::matrix({{1, 2}, {3, 6}}), 1);
  CHECK(mean.values() == std::vector<double>{2, 4});

  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t s = 1 + rng.below(9), t = 1 + rng.below(17);
    const Tensor src = random_tensor({s, 2}, rng);
    const Tensor out = temporal_interpolate(src, t);
    REQUIRE(out.shape() == Shape{t, 2});
    for (std::size_t c = 0; c < 2; ++c) {
      double lo = src.at(0, c), hi = lo;
      for (std::size_t r = 1; r < s; ++r) {
        lo = std::min(lo, src.at(r, c));
        hi = std::max(hi, src.at(r, c));
      }
      for (std::size_t r = 0; r < t; ++r) {
        CHECK(out.at(r, c) >= lo - 1e-12);
        CHECK(out.at(r, c) <= hi + 1e-12);
      }
    }
  }

  const Tensor w = random_tensor({7, 3}, rng);
  const auto report = grad_check([&](const Tensor& in) { return weighted_sum(temporal_interpolate(in, 7), w); },
                                 random_tensor({4, 3}, rng));
  CHECK(report.passed);
}

TEST_CASE("encoders share the leading extent") {
  Rng rng(31);
  ModelConfig cfg = tiny_visual_config();
  cfg.vocab_size = 30;
  nn::ParameterStore store(cfg.seed);
  const Encoders enc(store, cfg);
  NoGradGuard guard;
  for (int trial = 0; trial < 4; ++trial) {
    const std::size_t t = 1 + rng.below(4);
    const std::size_t side = 8 * (1 + rng.below(2));
    const AudioTrack audio{uniform_tensor({1360 + 160 * rng.below(10)}, rng, -1.0, 1.0), 16000.0};
    std::vector<std::size_t> ids(1 + rng.below(10));
    for (auto& id : ids) id = rng.below(30);
    const ModalityBundle b = enc(random_clip(t, side, side, rng), audio, {ids, 30});
    CHECK(b.f_v().shape() == Shape{t, cfg.d_v});
    CHECK(b.f_a().shape() == Shape{t, cfg.d_a});
    CHECK(b.f_t().shape() == Shape{t, cfg.d_t});
  }
}

TEST_CASE("gradient check through each encoder") {
  Rng rng(37);
  ModelConfig cfg = tiny_visual_config();
  cfg.vocab_size = 12;
  cfg.max_position = 6;
  nn::ParameterStore store(cfg.seed);
  const Encoders enc(store, cfg);
  const VideoClip clip = random_clip(2, 8, 8, rng);
  const AudioTrack audio{uniform_tensor({1360}, rng, -1.0, 1.0), 16000.0};
  const Transcript text{{1, 5, 7, 2}, 12};

  auto check_prefix = [&](const std::string& prefix, const std::function<Tensor()>& loss) {
    std::vector<NamedTensor> params;
    for (const auto& p : store.named()) {
      if (p.name.rfind(prefix, 0) == 0) params.push_back(p);
    }
    REQUIRE_FALSE(params.empty());
    Rng pick(41);
    const auto report = grad_check_params(loss, params, 1e-5, 1e-4, 3, pick);
    INFO(prefix << " worst " << report.worst_coordinate << " err " << report.max_rel_error);
    CHECK(report.passed);
  };

  const Tensor wv = random_tensor({2, cfg.d_v}, rng);
  check_prefix("visual.", [&] { return weighted_sum(enc.visual(clip), wv); });
  const Tensor wa = random_tensor({2, cfg.d_a}, rng);
  check_prefix("audio.", [&] { return weighted_sum(enc.audio(audio, 2), wa); });
  const Tensor wt = random_tensor({4, cfg.d_t}, rng);
  check_prefix("text.", [&] { return weighted_sum(enc.text(text), wt); });
}
