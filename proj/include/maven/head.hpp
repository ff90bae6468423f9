#pragma once

#include <span>
#include <utility>

#include "maven/model_config.hpp"
#include "maven/nn.hpp"
#include "maven/ops.hpp"
#include "maven/tensor.hpp"

namespace maven::head {

struct VaLabel {
  double valence = 0.0;
  double arousal = 0.0;
};

// Reported prediction. valence/arousal are exactly I cos(theta), I sin(theta);
// the clamped copies (to [-1, 1]) exist for reporting only.
struct PolarPrediction {
  double intensity = 0.0;
  double theta = 0.0;
  double valence = 0.0;
  double arousal = 0.0;
  double valence_clamped = 0.0;
  double arousal_clamped = 0.0;
  bool clamped = false;

  static PolarPrediction from_polar(double intensity, double theta);
};

// Graph-connected head output, each (1 x 1).
struct PolarOutput {
  Tensor intensity;
  Tensor theta;
  Tensor valence;
  Tensor arousal;

  Tensor va() const;  // (1 x 2) [valence, arousal]
  PolarPrediction value() const { return PolarPrediction::from_polar(intensity.item(), theta.item()); }
};

// NonFinite for non-finite inputs.
std::pair<double, double> polar_to_va(double intensity, double theta);
// (sqrt(v^2 + a^2), atan2(a, v)); the origin maps to (0, 0).
std::pair<double, double> va_to_polar(double valence, double arousal);

// Differentiable polar conversion of (1 x 1) tensors.
PolarOutput polar_to_va(const Tensor& intensity, const Tensor& theta);

// Mean over time: (T x d_beit) -> (1 x d_beit).
Tensor pool(const Tensor& f_refined);

// Three fully connected layers: ReLU + dropout after the first two, raw
// [I, theta] from the third.
struct HeadParams {
  nn::Linear fc1;
  nn::Linear fc2;
  nn::Linear fc3;
  double dropout = 0.2;

  static HeadParams create(nn::ParameterStore& store, const ModelConfig& cfg);
};

// ShapeMismatch when pooled does not match fc1.
PolarOutput predict_polar(const Tensor& pooled, const HeadParams& params, ops::Mode mode, Rng& rng);

// (1/N) sum_i [(v_i - v^_i)^2 + (a_i - a^_i)^2] over (N x 2) rows.
// LengthMismatch when row counts differ.
Tensor mse_loss(const Tensor& predicted, const Tensor& truth);
// Plain-value form. EmptyBatch for N = 0, LengthMismatch for unequal lengths.
double mse_loss(std::span<const VaLabel> predicted, std::span<const VaLabel> truth);

}  // namespace maven::head
