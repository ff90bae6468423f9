#include "maven/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "maven/error.hpp"
#include "maven/mvn_io.hpp"
#include "maven/ops.hpp"

namespace maven::train {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
}

std::vector<NamedTensor> snapshot(const nn::ParameterStore& store) {
  std::vector<NamedTensor> out;
  out.reserve(store.named().size());
  for (const auto& p : store.named()) out.push_back({p.name, p.tensor.detach()});
  return out;
}

// Fisher-Yates on our own generator so the order is the same everywhere.
void shuffle(std::vector<std::size_t>& order, Rng& rng) {
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
}

}  // namespace

std::string EpochLog::to_text() const {
  std::ostringstream s;
  s << "epoch " << epoch << " steps " << steps << std::setprecision(6) << " loss " << batch_loss << " train_mse "
    << train_mse << " train_ccc " << train_ccc;
  if (val_ccc) s << " val_ccc " << *val_ccc;
  s << std::setprecision(3) << " (" << seconds << " s)";
  return s.str();
}

nlohmann::ordered_json EpochLog::to_json() const {
  nlohmann::ordered_json j{{"epoch", epoch},         {"steps", steps},         {"batch_loss", batch_loss},
                           {"train_mse", train_mse}, {"train_ccc", train_ccc}};
  j["val_ccc"] = val_ccc ? nlohmann::ordered_json(*val_ccc) : nlohmann::ordered_json(nullptr);
  return j;
}

std::vector<PredictionRow> predict(const MavenModel& model, std::span<const synth::Example> examples) {
  NoGradGuard guard;
  Rng unused(0);
  std::vector<PredictionRow> rows;
  rows.reserve(examples.size());
  for (const auto& ex : examples) {
    rows.push_back({ex.clip_id, model.forward(ex.bundle, ops::Mode::Eval, unused).value(), ex.label});
  }
  return rows;
}

metrics::EvalReport score(std::span<const PredictionRow> rows) {
  std::vector<double> pv, tv, pa, ta;
  for (const auto& r : rows) {
    pv.push_back(r.prediction.valence_clamped);
    pa.push_back(r.prediction.arousal_clamped);
    tv.push_back(r.truth.valence);
    ta.push_back(r.truth.arousal);
  }
  return metrics::evaluate(pv, tv, pa, ta);
}

double clamped_mse(std::span<const PredictionRow> rows) {
  std::vector<head::VaLabel> pred, truth;
  for (const auto& r : rows) {
    pred.push_back({r.prediction.valence_clamped, r.prediction.arousal_clamped});
    truth.push_back(r.truth);
  }
  return head::mse_loss(pred, truth);
}

FitResult fit(MavenModel& model, const RunConfig& cfg, std::span<const synth::Example> train_set,
              std::span<const synth::Example> val_set, const std::function<void(const EpochLog&)>& on_epoch) {
  if (train_set.empty()) throw Error(ErrorCode::EmptyBatch, "training split is empty");
  for (const auto& ex : train_set) model.check_bundle(ex.bundle);
  for (const auto& ex : val_set) model.check_bundle(ex.bundle);

  const std::vector<Tensor> params = model.params().tensors();
  OptimizerState state = OptimizerState::for_params(params, cfg.optimizer);
  Rng root(cfg.seed);
  Rng order_rng = root.fork(1);
  Rng dropout_rng = root.fork(2);

  FitResult result;
  bool have_best = false;
  std::vector<std::size_t> order(train_set.size());
  const std::size_t batch = cfg.schedule.batch_size;
  const bool capped = cfg.schedule.max_steps > 0;

  for (std::size_t epoch = 1; epoch <= cfg.schedule.epochs; ++epoch) {
    if (capped && result.steps >= cfg.schedule.max_steps) break;
    const auto start = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order, order_rng);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch) {
      if (capped && result.steps >= cfg.schedule.max_steps) break;
      const std::size_t end = std::min(order.size(), begin + batch);
      const std::string where = "epoch " + std::to_string(epoch) + " step " + std::to_string(result.steps + 1);
      Tensor loss;
      try {
        std::vector<Tensor> preds;
        std::vector<double> truth;
        for (std::size_t i = begin; i < end; ++i) {
          const auto& ex = train_set[order[i]];
          preds.push_back(model.forward(ex.bundle, ops::Mode::Train, dropout_rng).va());
          truth.push_back(ex.label.valence);
          truth.push_back(ex.label.arousal);
        }
        loss = head::mse_loss(ops::concat_rows(preds), Tensor::from({end - begin, 2}, std::move(truth)));
      } catch (const Error& e) {
        Tape::current().clear();
        if (e.code() == ErrorCode::NonFinite) throw Error(ErrorCode::DivergedLoss, where + ": " + e.what());
        throw;
      }
      const double value = loss.item();
      if (!std::isfinite(value)) {
        Tape::current().clear();
        throw Error(ErrorCode::DivergedLoss, "loss became non-finite at " + where);
      }
      zero_grads(params);
      backward(loss);
      adamw_step(params, state);
      ++result.steps;
      loss_sum += value;
      ++batches;
    }

    EpochLog log;
    log.epoch = epoch;
    log.steps = result.steps;
    log.batch_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
    const auto train_rows = predict(model, train_set);
    log.train_mse = clamped_mse(train_rows);
    log.train_ccc = score(train_rows).ccc_avg;
    if (!val_set.empty()) log.val_ccc = score(predict(model, val_set)).ccc_avg;
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const double s = log.val_ccc.value_or(log.train_ccc);
    if (!have_best || s > result.best_score) {
      have_best = true;
      result.best_score = s;
      result.best_epoch = epoch;
      result.best_params = snapshot(model.params());
    }
    result.epochs.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  if (!have_best) result.best_params = snapshot(model.params());
  return result;
}

std::vector<synth::Example> load_split(const synth::DatasetManifest& manifest, const std::string& split,
                                       const synth::KeepSet& keep) {
  const auto ids = manifest.ids(split);
  auto examples = synth::load_batch(manifest, ids);
  if (keep != synth::kKeepAll) {
    for (auto& ex : examples) ex.bundle = synth::modality_mask(ex.bundle, keep);
  }
  return examples;
}

TrainOutcome run_training(const RunConfig& cfg, const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.validate();
  const auto manifest = synth::load_manifest(cfg.manifest_path());
  const auto train_set = load_split(manifest, cfg.paths.train_split, cfg.keep);
  std::vector<synth::Example> val_set;
  if (cfg.paths.eval_split != cfg.paths.train_split) val_set = load_split(manifest, cfg.paths.eval_split, cfg.keep);

  TrainOutcome out;
  out.run_dir = cfg.run_dir();
  echo_config(cfg, out.run_dir);
  const auto log_path = out.run_dir / "train_log.jsonl";
  std::ofstream log = open_out(log_path);

  MavenModel model(cfg.model);
  out.fit = fit(model, cfg, train_set, val_set, [&](const EpochLog& e) {
    log << e.to_json().dump() << '\n';
    if (on_epoch) on_epoch(e);
  });
  finish(log, log_path);
  io::save_archive((out.run_dir / "best.mvnc").string(), out.fit.best_params);
  io::save_archive((out.run_dir / "final.mvnc").string(), model.params().named());
  return out;
}

void write_predictions(const std::filesystem::path& path, std::span<const PredictionRow> rows) {
  std::ofstream out = open_out(path);
  out << "clip_id,valence,arousal,intensity,theta,clamped\n" << std::setprecision(17);
  for (const auto& r : rows) {
    const auto& p = r.prediction;
    out << r.clip_id << ',' << p.valence_clamped << ',' << p.arousal_clamped << ',' << p.intensity << ',' << p.theta
        << ',' << (p.clamped ? 1 : 0) << '\n';
  }
  finish(out, path);
}

EvalOutcome run_evaluation(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  MavenModel model(cfg.model);
  model.params().load(io::load_archive(cfg.checkpoint_path().string()));
  const auto manifest = synth::load_manifest(cfg.manifest_path());
  const auto examples = load_split(manifest, cfg.paths.eval_split, cfg.keep);
  if (examples.empty()) throw Error(ErrorCode::EmptyBatch, "split '" + cfg.paths.eval_split + "' is empty");
  for (const auto& ex : examples) model.check_bundle(ex.bundle);

  EvalOutcome out;
  out.out_dir = out_dir;
  out.rows = predict(model, examples);
  out.report = score(out.rows);

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + out_dir.string());
  write_predictions(out_dir / "predictions.csv", out.rows);
  const auto text_path = out_dir / "report.txt";
  std::ofstream text = open_out(text_path);
  text << out.report.to_text();
  finish(text, text_path);
  const auto json_path = out_dir / "report.json";
  std::ofstream json = open_out(json_path);
  json << out.report.to_json() << '\n';
  finish(json, json_path);
  return out;
}

}  // namespace maven::train
