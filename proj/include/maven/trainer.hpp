#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "maven/metrics.hpp"
#include "maven/model.hpp"
#include "maven/run_config.hpp"
#include "maven/synth.hpp"

namespace maven::train {

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  std::size_t steps = 0;  // optimizer steps so far
  double batch_loss = 0.0;  // mean train-mode batch loss over the epoch
  double train_mse = 0.0;   // eval mode, clamped predictions
  double train_ccc = 0.0;
  std::optional<double> val_ccc;
  double seconds = 0.0;

  std::string to_text() const;
  nlohmann::ordered_json to_json() const;
};

struct FitResult {
  std::vector<EpochLog> epochs;
  std::size_t steps = 0;
  std::size_t best_epoch = 0;
  double best_score = 0.0;               // val CCC_avg, or train CCC_avg without a val split
  std::vector<NamedTensor> best_params;  // detached copies
};

// Seeded shuffle, mini-batch MSE, backward, Adam/AdamW. Stops after
// schedule.epochs or schedule.max_steps, whichever comes first. DivergedLoss
// when a batch loss is non-finite.
FitResult fit(MavenModel& model, const RunConfig& cfg, std::span<const synth::Example> train_set,
              std::span<const synth::Example> val_set, const std::function<void(const EpochLog&)>& on_epoch = {});

struct PredictionRow {
  std::string clip_id;
  head::PolarPrediction prediction;
  head::VaLabel truth;
};

// Eval-mode inference, no tape.
std::vector<PredictionRow> predict(const MavenModel& model, std::span<const synth::Example> examples);
// Dataset-level CCC/Pearson on the clamped predictions.
metrics::EvalReport score(std::span<const PredictionRow> rows);
double clamped_mse(std::span<const PredictionRow> rows);

// Loads a split from the manifest with the keep-set applied.
std::vector<synth::Example> load_split(const synth::DatasetManifest& manifest, const std::string& split,
                                       const synth::KeepSet& keep);

struct TrainOutcome {
  FitResult fit;
  std::filesystem::path run_dir;
};

// Echoes config.json, writes train_log.jsonl, best.mvnc and final.mvnc into
// the run directory.
TrainOutcome run_training(const RunConfig& cfg, const std::function<void(const EpochLog&)>& on_epoch = {});

struct EvalOutcome {
  metrics::EvalReport report;
  std::vector<PredictionRow> rows;
  std::filesystem::path out_dir;
};

// Loads cfg.checkpoint_path() (CheckpointMismatch on any disagreement with the
// model), predicts paths.eval_split and writes predictions.csv, report.txt and
// report.json into out_dir.
EvalOutcome run_evaluation(const RunConfig& cfg, const std::filesystem::path& out_dir);

void write_predictions(const std::filesystem::path& path, std::span<const PredictionRow> rows);

}  // namespace maven::train
