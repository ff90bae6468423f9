#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>

#include "maven/mvn_io.hpp"
#include "maven/run_config.hpp"
#include "maven/trainer.hpp"
#include "test_util.hpp"

using namespace maven;
using maven::testing::check_throws_code;
using maven::testing::read_file;
using maven::testing::ScratchDir;
namespace fs = std::filesystem;

namespace {

// Small dims keep each training step in the low milliseconds.
RunConfig small_config(const fs::path& root, std::vector<std::string> extra = {}) {
  std::vector<std::string> sets{"model.d_v=16",          "model.d_a=16",      "model.d_t=16",
                                "model.d_proj=16",       "model.d_beit=16",   "model.d1=16",
                                "model.d2=8",            "synth.n_clips=6",   "synth.n_val=3",
                                "synth.steps=4",         "schedule.epochs=3", "schedule.batch_size=4",
                                "paths.data_dir=" + (root / "data").string(), "paths.run_dir=" + (root / "run").string()};
  sets.insert(sets.end(), extra.begin(), extra.end());
  return resolve_config("desk", "", sets);
}

void make_data(const RunConfig& cfg) { synth::generate(cfg.synth, cfg.paths.data_dir); }

std::vector<synth::Example> split(const RunConfig& cfg, const std::string& name) {
  return train::load_split(synth::load_manifest(cfg.manifest_path()), name, cfg.keep);
}

}  // namespace

TEST_CASE("presets carry the documented optimizer settings") {
  const auto desk = RunConfig::preset("desk");
  CHECK(desk.optimizer.kind == OptimizerKind::AdamW);
  CHECK(desk.optimizer.lr == 1e-4);
  CHECK(desk.optimizer.weight_decay == 1e-2);

  const auto alt = RunConfig::preset("abaw-sec42");
  CHECK(alt.optimizer.kind == OptimizerKind::Adam);
  CHECK(alt.optimizer.lr == 1e-4);
  CHECK(alt.optimizer.weight_decay == 1e-3);
  CHECK(alt.schedule.epochs == 200);
  CHECK(alt.schedule.batch_size == 16);

  const auto paper = RunConfig::preset("paper");
  CHECK(paper.model.d_v == 1024);
  CHECK(paper.model.d_a == 768);
  CHECK(paper.model.d_t == 768);

  const auto overfit = RunConfig::preset("overfit");
  CHECK(overfit.synth.n_clips == 8);
  CHECK(overfit.synth.steps == 16);
  CHECK(overfit.synth.snr == std::array<double, 3>{20.0, 20.0, 20.0});
  CHECK(overfit.schedule.max_steps <= 2000);

  for (const auto& name : RunConfig::preset_names()) CHECK_NOTHROW(RunConfig::preset(name));
  check_throws_code([] { RunConfig::preset("huge"); }, ErrorCode::InvalidConfig);
}

TEST_CASE("config json round trip and overrides") {
  for (const auto& name : RunConfig::preset_names()) {
    const auto c = RunConfig::preset(name);
    const auto back = RunConfig::from_json(c.to_json(), RunConfig::preset("desk"));
    CHECK(back.to_json() == c.to_json());
  }

  const auto c = resolve_config("desk", "", {"model.d_v=32", "optimizer.kind=adam", "keep=v,t", "synth.snr=[1,2,3]"});
  CHECK(c.model.d_v == 32);
  CHECK(c.synth.d_v == 32);
  CHECK(c.optimizer.kind == OptimizerKind::Adam);
  CHECK(c.keep == synth::KeepSet{true, false, true});
  CHECK(c.synth.snr == std::array<double, 3>{1.0, 2.0, 3.0});

  check_throws_code([] { resolve_config("desk", "", {"model.d_x=3"}); }, ErrorCode::InvalidConfig);
  check_throws_code([] { resolve_config("desk", "", {"model=3"}); }, ErrorCode::InvalidConfig);
  check_throws_code([] { resolve_config("desk", "", {"model.d_v"}); }, ErrorCode::InvalidConfig);
  check_throws_code([] { resolve_config("desk", "", {"model.d_v=wide"}); }, ErrorCode::InvalidConfig);
  check_throws_code([] { resolve_config("desk", "", {"model.d_v=-4"}); }, ErrorCode::InvalidConfig);
  check_throws_code([] { resolve_config("desk", "", {"model.d_v=30"}); }, ErrorCode::InvalidConfig);
  check_throws_code([] { resolve_config("desk", "", {"optimizer.kind=sgd"}); }, ErrorCode::InvalidConfig);
  check_throws_code([] { resolve_config("desk", "", {"keep=x"}); }, ErrorCode::InvalidConfig);
  check_throws_code([] { resolve_config("desk", "", {"schedule.batch_size=0"}); }, ErrorCode::InvalidConfig);
}

TEST_CASE("config files merge over the preset") {
  ScratchDir dir("config_file");
  {
    std::ofstream out(dir.path / "c.json");
    out << R"({"model": {"d_t": 32}, "schedule": {"epochs": 3}})";
  }
  const auto c = resolve_config("abaw-sec42", (dir.path / "c.json").string(), {"schedule.epochs=4"});
  CHECK(c.model.d_t == 32);
  CHECK(c.schedule.epochs == 4);
  CHECK(c.optimizer.kind == OptimizerKind::Adam);

  {
    std::ofstream out(dir.path / "bad.json");
    out << R"({"modle": {}})";
  }
  check_throws_code([&] { resolve_config("desk", (dir.path / "bad.json").string(), {}); }, ErrorCode::InvalidConfig);
  check_throws_code([&] { resolve_config("desk", (dir.path / "absent.json").string(), {}); }, ErrorCode::IoFailure);
}

TEST_CASE("run directory defaults follow MAVEN_RUN_ROOT") {
  auto c = RunConfig::preset("overfit");
  ::setenv("MAVEN_RUN_ROOT", "/tmp/maven-root", 1);
  CHECK(c.run_dir() == fs::path("/tmp/maven-root/overfit"));
  CHECK(c.checkpoint_path() == fs::path("/tmp/maven-root/overfit/best.mvnc"));
  ::unsetenv("MAVEN_RUN_ROOT");
  CHECK(c.run_dir() == fs::path("runs/overfit"));
  c.paths.run_dir = "elsewhere";
  CHECK(c.run_dir() == fs::path("elsewhere"));
  CHECK(c.manifest_path() == fs::path("data/manifest.jsonl"));
}

TEST_CASE("lr = 0 leaves the loss identical across epochs") {
  ScratchDir dir("lr0");
  const auto cfg = small_config(dir.path, {"optimizer.lr=0"});
  make_data(cfg);
  MavenModel model(cfg.model);
  const auto before = model.params().named();
  std::vector<std::vector<double>> snapshot;
  for (const auto& p : before) snapshot.push_back(p.tensor.values());

  const auto result = train::fit(model, cfg, split(cfg, "train"), split(cfg, "val"));
  REQUIRE(result.epochs.size() == 3);
  for (const auto& e : result.epochs) {
    CHECK(std::abs(e.train_mse - result.epochs[0].train_mse) <= 1e-12);
    CHECK(*e.val_ccc == *result.epochs[0].val_ccc);
  }
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i].tensor.values() == snapshot[i]);
}

TEST_CASE("fit is deterministic and respects the step cap") {
  ScratchDir dir("fit_det");
  const auto cfg = small_config(dir.path, {"schedule.max_steps=5", "schedule.epochs=10", "optimizer.lr=1e-3"});
  make_data(cfg);
  const auto train_set = split(cfg, "train");

  MavenModel a(cfg.model), b(cfg.model);
  const auto ra = train::fit(a, cfg, train_set, {});
  const auto rb = train::fit(b, cfg, train_set, {});
  CHECK(ra.steps == 5);
  CHECK(ra.epochs.size() == 3);  // 2 steps per epoch with 6 clips and batch 4
  for (std::size_t i = 0; i < a.params().named().size(); ++i)
    CHECK(a.params().named()[i].tensor.values() == b.params().named()[i].tensor.values());

  // Training moved the parameters.
  MavenModel fresh(cfg.model);
  bool moved = false;
  for (std::size_t i = 0; i < fresh.params().named().size(); ++i)
    moved = moved || fresh.params().named()[i].tensor.values() != a.params().named()[i].tensor.values();
  CHECK(moved);

  // A different seed shuffles differently.
  auto other = cfg;
  other.seed = cfg.seed + 1;
  MavenModel c(cfg.model);
  train::fit(c, other, train_set, {});
  bool differs = false;
  for (std::size_t i = 0; i < c.params().named().size(); ++i)
    differs = differs || c.params().named()[i].tensor.values() != a.params().named()[i].tensor.values();
  CHECK(differs);
}

TEST_CASE("fit rejects empty and diverging runs") {
  ScratchDir dir("fit_err");
  const auto cfg = small_config(dir.path);
  make_data(cfg);
  MavenModel model(cfg.model);
  check_throws_code([&] { train::fit(model, cfg, {}, {}); }, ErrorCode::EmptyBatch);

  auto examples = split(cfg, "train");
  auto values = examples[0].bundle.features[0].values();
  values[0] = std::numeric_limits<double>::quiet_NaN();
  examples[0].bundle.features[0] = Tensor::from(examples[0].bundle.features[0].shape(), values);
  check_throws_code([&] { train::fit(model, cfg, examples, {}); }, ErrorCode::DivergedLoss);
  CHECK(Tape::current().size() == 0);

  auto wide = cfg;
  wide.model.d_v = 32;
  MavenModel mismatched(wide.model);
  check_throws_code([&] { train::fit(mismatched, wide, split(cfg, "train"), {}); }, ErrorCode::ShapeMismatch);
}

TEST_CASE("keep-set training sees only the kept modality") {
  ScratchDir dir("keep_v");
  const auto cfg = small_config(dir.path, {"keep=v"});
  make_data(cfg);
  const auto examples = split(cfg, "train");
  for (const auto& ex : examples) {
    CHECK(ex.bundle.present == std::array<bool, 3>{true, false, false});
    for (double x : ex.bundle.f_a().data()) CHECK(x == 0.0);
    for (double x : ex.bundle.f_t().data()) CHECK(x == 0.0);
  }
  MavenModel model(cfg.model);
  const auto result = train::fit(model, cfg, examples, split(cfg, "val"));
  CHECK(result.epochs.size() == 3);
  CHECK(std::isfinite(result.epochs.back().train_mse));
}

TEST_CASE("training and evaluation write their artifacts") {
  ScratchDir dir("artifacts");
  const auto cfg = small_config(dir.path);
  make_data(cfg);
  const auto out = train::run_training(cfg);
  for (const char* f : {"config.json", "train_log.jsonl", "best.mvnc", "final.mvnc"}) CHECK(fs::exists(out.run_dir / f));

  // The echoed config reproduces the run's config.
  const auto echoed = nlohmann::json::parse(read_file(out.run_dir / "config.json"));
  CHECK(RunConfig::from_json(echoed, RunConfig::preset("overfit")).to_json() == cfg.to_json());

  std::istringstream log(read_file(out.run_dir / "train_log.jsonl"));
  std::string line;
  std::size_t lines = 0;
  while (std::getline(log, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("epoch") == ++lines);
    CHECK(j.at("val_ccc").is_number());
  }
  CHECK(lines == 3);

  // best.mvnc holds the parameters from the best-scoring epoch.
  const auto best = io::load_archive((out.run_dir / "best.mvnc").string());
  CHECK(best.size() == out.fit.best_params.size());
  CHECK(best[0].tensor.values() == out.fit.best_params[0].tensor.values());

  const auto e1 = train::run_evaluation(cfg, dir.path / "eval1");
  const auto e2 = train::run_evaluation(cfg, dir.path / "eval2");
  CHECK(e1.rows.size() == 3);
  for (const char* f : {"predictions.csv", "report.txt", "report.json"}) {
    CHECK(fs::exists(dir.path / "eval1" / f));
    CHECK(read_file(dir.path / "eval1" / f) == read_file(dir.path / "eval2" / f));
  }
  const std::string csv = read_file(dir.path / "eval1" / "predictions.csv");
  CHECK(csv.rfind("clip_id,valence,arousal,intensity,theta,clamped\n", 0) == 0);
  CHECK(csv.find("clip_0006,") != std::string::npos);  // first val clip

  // Evaluating the best checkpoint reproduces the best epoch's val score.
  CHECK(e1.report.ccc_avg == doctest::Approx(out.fit.best_score).epsilon(1e-12));
}

TEST_CASE("eval rejects a checkpoint built for other dims") {
  ScratchDir dir("mismatch");
  const auto cfg = small_config(dir.path, {"schedule.epochs=1"});
  make_data(cfg);
  train::run_training(cfg);
  auto wide = cfg;
  wide.model.d_v = 32;
  wide.synth.d_v = 32;
  try {
    train::run_evaluation(wide, dir.path / "eval");
    FAIL("expected CheckpointMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CheckpointMismatch);
    CHECK(std::string(e.what()).find("visual.") != std::string::npos);
  }
  auto missing = cfg;
  missing.paths.checkpoint = (dir.path / "nope.mvnc").string();
  check_throws_code([&] { train::run_evaluation(missing, dir.path / "eval"); }, ErrorCode::IoFailure);
}

TEST_CASE("predictions report clamped values and flag them") {
  const std::vector<train::PredictionRow> rows{
      {"c0", head::PolarPrediction::from_polar(2.0, 0.0), {1.0, 0.0}},
      {"c1", head::PolarPrediction::from_polar(0.5, 1.0), {0.2, 0.4}},
  };
  ScratchDir dir("pred_csv");
  train::write_predictions(dir.path / "p.csv", rows);
  std::istringstream in(read_file(dir.path / "p.csv"));
  std::string header, first, second;
  std::getline(in, header);
  std::getline(in, first);
  std::getline(in, second);
  CHECK(first.rfind("c0,1,0,2,0,1", 0) == 0);
  CHECK(second.substr(second.size() - 2) == ",0");
  CHECK(train::clamped_mse(rows) == doctest::Approx(((0.5 * std::cos(1.0) - 0.2) * (0.5 * std::cos(1.0) - 0.2) +
                                                     (0.5 * std::sin(1.0) - 0.4) * (0.5 * std::sin(1.0) - 0.4)) /
                                                    2.0)
                                        .epsilon(1e-12));
}
