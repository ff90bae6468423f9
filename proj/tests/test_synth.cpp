#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>

#include "maven/encoders.hpp"
#include "maven/mvn_io.hpp"
#include "maven/synth.hpp"
#include "test_util.hpp"

using namespace maven;
using namespace maven::synth;
using maven::testing::check_throws_code;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("maven_synth_" + name)) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Solves (X^T X + ridge I) w = X^T y by Gaussian elimination with pivoting.
std::vector<double> least_squares(const std::vector<std::vector<double>>& x, const std::vector<double>& y, double ridge) {
  const std::size_t n = x[0].size();
  std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
  for (std::size_t r = 0; r < x.size(); ++r)
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) a[i][j] += x[r][i] * x[r][j];
      a[i][n] += x[r][i] * y[r];
    }
  for (std::size_t i = 0; i < n; ++i) a[i][i] += ridge;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c || a[c][c] == 0.0) continue;
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k <= n; ++k) a[r][k] -= f * a[c][k];
    }
  }
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = a[i][n] / a[i][i];
  return w;
}

// Train R^2 of a linear probe (with intercept) from time-averaged features of
// the chosen modalities to each label axis; the worse axis is returned.
double probe_r2(const std::vector<Example>& data, const KeepSet& keep) {
  std::vector<std::vector<double>> x;
  std::array<std::vector<double>, 2> y;
  for (const auto& ex : data) {
    std::vector<double> row{1.0};
    for (Modality m : kModalities) {
      if (!keep[index_of(m)]) continue;
      const Tensor& f = ex.bundle[m];
      for (std::size_t c = 0; c < f.cols(); ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < f.rows(); ++r) s += f.at(r, c);
        row.push_back(s / static_cast<double>(f.rows()));
      }
    }
    x.push_back(row);
    y[0].push_back(ex.label.valence);
    y[1].push_back(ex.label.arousal);
  }
  double worst = 1.0;
  for (const auto& target : y) {
    const auto w = least_squares(x, target, 1e-9);
    double mean = 0.0;
    for (double v : target) mean += v;
    mean /= static_cast<double>(target.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t r = 0; r < x.size(); ++r) {
      double pred = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) pred += w[i] * x[r][i];
      ss_res += (target[r] - pred) * (target[r] - pred);
      ss_tot += (target[r] - mean) * (target[r] - mean);
    }
    worst = std::min(worst, 1.0 - ss_res / ss_tot);
  }
  return worst;
}

std::vector<Example> everything(const DatasetManifest& m) {
  const auto ids = m.ids("");
  return load_batch(m, ids);
}

}  // namespace

TEST_CASE("label walk stays in the unit square and wraps the angle") {
  Rng rng(1);
  bool crossed_pi = false;
  for (int clip = 0; clip < 200; ++clip) {
    const auto walk = label_walk(64, 0.1, 0.6, rng);
    CHECK(walk.size() == 64);
    for (std::size_t t = 0; t < walk.size(); ++t) {
      CHECK(std::abs(walk[t].valence) <= 1.0);
      CHECK(std::abs(walk[t].arousal) <= 1.0);
      if (t > 0 && walk[t].valence < 0 && walk[t - 1].valence < 0 &&
          (walk[t].arousal < 0) != (walk[t - 1].arousal < 0)) {
        crossed_pi = true;
      }
    }
    const auto y = clip_label(walk);
    CHECK(std::abs(y.valence) <= 1.0);
    CHECK(std::abs(y.arousal) <= 1.0);
  }
  CHECK(crossed_pi);
  const std::vector<head::VaLabel> pts{{0.5, -0.5}, {0.1, 0.3}};
  CHECK(clip_label(pts).valence == 0.3);
  CHECK(clip_label(pts).arousal == -0.1);
}

TEST_CASE("generate writes a consistent dataset") {
  TempDir dir("layout");
  SynthSpec spec;
  spec.n_clips = 5;
  spec.n_val = 3;
  spec.steps = 4;
  const DatasetManifest m = generate(spec, dir.path);
  CHECK(m.clips.size() == 8);
  CHECK(m.ids("train").size() == 5);
  CHECK(m.ids("val").size() == 3);
  CHECK(fs::exists(dir.path / "manifest.jsonl"));
  CHECK(fs::exists(dir.path / "labels.csv"));

  const DatasetManifest again = load_manifest(dir.path / "manifest.jsonl");
  CHECK(again.dims == m.dims);
  REQUIRE(again.clips.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(again.clips[i].clip_id == m.clips[i].clip_id);
    CHECK(again.clips[i].features == m.clips[i].features);
    CHECK(again.clips[i].split == m.clips[i].split);
    for (const auto& f : again.clips[i].features) CHECK(fs::exists(again.resolve(f)));
  }
  const auto labels = load_labels(dir.path / "labels.csv");
  CHECK(labels.size() == 8);
  for (const auto& [id, y] : labels) {
    CHECK(std::abs(y.valence) <= 1.0);
    CHECK(std::abs(y.arousal) <= 1.0);
  }
}

TEST_CASE("same seed gives byte-identical files") {
  TempDir a("det_a"), b("det_b"), c("det_c");
  SynthSpec spec;
  spec.n_clips = 3;
  spec.n_val = 2;
  spec.steps = 6;
  generate(spec, a.path);
  generate(spec, b.path);
  spec.seed += 1;
  generate(spec, c.path);
  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a.path)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), a.path);
    CHECK(slurp(entry.path()) == slurp(b.path / rel));
    ++files;
  }
  CHECK(files == 5 * 3 + 2);
  CHECK(slurp(a.path / "labels.csv") != slurp(c.path / "labels.csv"));
}

TEST_CASE("linear probe recovers labels") {
  SynthSpec spec;
  spec.n_clips = 200;
  spec.steps = 8;
  spec.d_v = 16;
  spec.d_a = 12;
  spec.d_t = 12;

  SUBCASE("noiseless") {
    TempDir dir("probe_clean");
    spec.snr = {0.0, 0.0, 0.0};
    const auto data = everything(generate(spec, dir.path));
    for (Modality m : kModalities) {
      KeepSet keep{false, false, false};
      keep[index_of(m)] = true;
      CHECK(probe_r2(data, keep) > 0.99);
    }
  }
  SUBCASE("snr 10") {
    TempDir dir("probe_10");
    spec.snr = {10.0, 10.0, 10.0};
    const auto data = everything(generate(spec, dir.path));
    CHECK(probe_r2(data, kKeepAll) > 0.9);
    for (Modality m : kModalities) {
      KeepSet keep{false, false, false};
      keep[index_of(m)] = true;
      CHECK(probe_r2(data, keep) > 0.9);
    }
    // a masked modality carries nothing
    std::vector<Example> masked = data;
    for (auto& ex : masked) ex.bundle = modality_mask(ex.bundle, {false, true, true});
    CHECK(probe_r2(masked, {true, false, false}) < 0.05);
  }
}

TEST_CASE("load_batch examples") {
  TempDir dir("batch");
  SynthSpec spec;
  spec.n_clips = 20;
  spec.steps = 3;
  const DatasetManifest m = generate(spec, dir.path);

  std::vector<std::string> ids;
  for (int i = 15; i >= 0; --i) ids.push_back(m.clips[static_cast<std::size_t>(i)].clip_id);
  const auto batch = load_batch(m, ids);
  REQUIRE(batch.size() == 16);
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(batch[i].clip_id == ids[i]);
    CHECK(batch[i].bundle.f_v().shape() == Shape{3, spec.d_v});
    CHECK(batch[i].bundle.f_t().shape() == Shape{3, spec.d_t});
  }

  const std::vector<std::string> missing{"clip_0001", "clip_9999"};
  try {
    load_batch(m, missing);
    FAIL("expected MissingClip");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingClip);
    CHECK(std::string(e.what()).find("clip_9999") != std::string::npos);
  }

  const fs::path victim = m.resolve(m.clips[2].features[1]);
  {
    std::fstream f(victim, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("MVN2", 4);
  }
  const std::vector<std::string> bad{m.clips[2].clip_id};
  try {
    load_batch(m, bad);
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
    CHECK(std::string(e.what()).find(victim.string()) != std::string::npos);
  }

  // a well-formed file with the wrong width
  io::save_tensor(m.resolve(m.clips[3].features[0]).string(), Tensor::zeros({3, spec.d_v + 1}));
  const std::vector<std::string> wide{m.clips[3].clip_id};
  check_throws_code([&] { load_batch(m, wide); }, ErrorCode::ShapeMismatch);
}

TEST_CASE("modality_mask examples") {
  Rng rng(3);
  ModalityBundle b;
  b.features = {testing::random_tensor({2, 4}, rng), testing::random_tensor({2, 3}, rng), testing::random_tensor({2, 3}, rng)};
  const auto all = modality_mask(b, kKeepAll);
  for (Modality m : kModalities) {
    CHECK(all[m].values() == b[m].values());
    CHECK(all.has(m));
  }
  const auto v = modality_mask(b, parse_keep("v"));
  CHECK(v.f_v().values() == b.f_v().values());
  for (Modality m : {Modality::Audio, Modality::Text}) {
    CHECK_FALSE(v.has(m));
    CHECK(v[m].shape() == b[m].shape());
    for (double x : v[m].data()) CHECK(x == 0.0);
  }
  check_throws_code([&] { modality_mask(b, {false, false, false}); }, ErrorCode::EmptyKeepSet);
  CHECK(parse_keep("a,t") == KeepSet{false, true, true});
  CHECK(parse_keep("all") == kKeepAll);
  CHECK(keep_string(parse_keep("tv")) == "vt");
  check_throws_code([] { parse_keep("x"); }, ErrorCode::InvalidConfig);
}

TEST_CASE("generate reports unwritable directories") {
  TempDir dir("unwritable");
  fs::create_directories(dir.path);
  std::ofstream(dir.path / "file") << "x";
  SynthSpec spec;
  spec.n_clips = 1;
  check_throws_code([&] { generate(spec, dir.path / "file" / "sub"); }, ErrorCode::IoFailure);
}

TEST_CASE("raw generators drive the frontends") {
  Rng rng(5);
  const auto walk = label_walk(3, 0.05, 0.3, rng);
  const auto clip = blob_video(walk, 16, 16);
  CHECK(clip.frames.shape() == Shape{3, 16, 16, 3});
  for (double p : clip.frames.data()) {
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
  const auto audio = tone_audio(walk, 16000.0, 640);
  CHECK(audio.samples.numel() == 1920);
  const std::string text = template_transcript(walk);
  CHECK(text.rfind("i feel ", 0) == 0);

  ModelConfig cfg;
  cfg.patch = 4;
  cfg.window = 2;
  nn::ParameterStore store(cfg.seed);
  const encoders::Encoders enc(store, cfg);
  const auto vocab = encoders::Vocabulary::build({"i feel excited calm angry sad"}, cfg.vocab_size);
  const encoders::Transcript tr{vocab.encode(text), cfg.vocab_size};
  NoGradGuard guard;
  const ModalityBundle b = enc(clip, audio, tr);
  CHECK(b.steps() == 3);
  for (double x : b.f_a().data()) CHECK(std::isfinite(x));
}
