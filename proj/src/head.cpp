#include "maven/head.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "maven/error.hpp"

namespace maven::head {

PolarPrediction PolarPrediction::from_polar(double intensity, double theta) {
  PolarPrediction p;
  p.intensity = intensity;
  p.theta = theta;
  std::tie(p.valence, p.arousal) = polar_to_va(intensity, theta);
  p.valence_clamped = std::clamp(p.valence, -1.0, 1.0);
  p.arousal_clamped = std::clamp(p.arousal, -1.0, 1.0);
  p.clamped = p.valence_clamped != p.valence || p.arousal_clamped != p.arousal;
  return p;
}

Tensor PolarOutput::va() const { return ops::concat_cols({valence, arousal}); }

std::pair<double, double> polar_to_va(double intensity, double theta) {
  if (!std::isfinite(intensity) || !std::isfinite(theta)) {
    throw Error(ErrorCode::NonFinite, "polar_to_va: non-finite intensity or angle");
  }
  return {intensity * std::cos(theta), intensity * std::sin(theta)};
}

std::pair<double, double> va_to_polar(double valence, double arousal) {
  if (valence == 0.0 && arousal == 0.0) return {0.0, 0.0};
  double theta = std::atan2(arousal, valence);
  if (theta == -std::numbers::pi) theta = std::numbers::pi;  // atan2(-0, x<0); keep (-pi, pi]
  return {std::hypot(valence, arousal), theta};
}

PolarOutput polar_to_va(const Tensor& intensity, const Tensor& theta) {
  if (!std::isfinite(intensity.item()) || !std::isfinite(theta.item())) {
    throw Error(ErrorCode::NonFinite, "polar_to_va: non-finite intensity or angle");
  }
  return {intensity, theta, ops::mul(intensity, ops::cos(theta)), ops::mul(intensity, ops::sin(theta))};
}

Tensor pool(const Tensor& f_refined) { return ops::mean_rows(f_refined); }

HeadParams HeadParams::create(nn::ParameterStore& store, const ModelConfig& cfg) {
  return {nn::Linear::create(store, "head.fc1", cfg.d_beit, cfg.d1), nn::Linear::create(store, "head.fc2", cfg.d1, cfg.d2),
          nn::Linear::create(store, "head.fc3", cfg.d2, 2), cfg.dropout};
}

PolarOutput predict_polar(const Tensor& pooled, const HeadParams& params, ops::Mode mode, Rng& rng) {
  if (pooled.cols() != params.fc1.weight.dim(0)) {
    throw Error(ErrorCode::ShapeMismatch, "head expects width " + std::to_string(params.fc1.weight.dim(0)) +
                                              ", got " + shape_str(pooled.shape()));
  }
  const Tensor x = ops::reshape(pooled, {1, pooled.cols()});
  const Tensor h1 = ops::dropout(ops::relu(params.fc1(x)), params.dropout, mode, rng);
  const Tensor h2 = ops::dropout(ops::relu(params.fc2(h1)), params.dropout, mode, rng);
  const Tensor out = params.fc3(h2);
  return polar_to_va(ops::slice_cols(out, 0, 1), ops::slice_cols(out, 1, 1));
}

Tensor mse_loss(const Tensor& predicted, const Tensor& truth) {
  if (predicted.rows() != truth.rows() || predicted.cols() != 2 || truth.cols() != 2) {
    throw Error(ErrorCode::LengthMismatch, "mse_loss: " + shape_str(predicted.shape()) + " vs " +
                                               shape_str(truth.shape()));
  }
  const Tensor diff = ops::sub(predicted, truth);
  return ops::scale(ops::sum(ops::mul(diff, diff)), 1.0 / static_cast<double>(predicted.rows()));
}

double mse_loss(std::span<const VaLabel> predicted, std::span<const VaLabel> truth) {
  if (predicted.size() != truth.size()) {
    throw Error(ErrorCode::LengthMismatch, "mse_loss: " + std::to_string(predicted.size()) + " predictions vs " +
                                               std::to_string(truth.size()) + " labels");
  }
  if (predicted.empty()) throw Error(ErrorCode::EmptyBatch, "mse_loss: empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double dv = truth[i].valence - predicted[i].valence;
    const double da = truth[i].arousal - predicted[i].arousal;
    total += dv * dv + da * da;
  }
  return total / static_cast<double>(predicted.size());
}

}  // namespace maven::head
