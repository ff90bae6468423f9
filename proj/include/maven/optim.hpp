#pragma once

#include <cstdint>
#include <vector>

#include "maven/tensor.hpp"

namespace maven {

enum class OptimizerKind {
  Adam,   // weight decay folded into the gradient (L2)
  AdamW,  // decoupled decay: theta <- theta - lr * wd * theta
};

struct OptimizerSettings {
  OptimizerKind kind = OptimizerKind::AdamW;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
};

struct OptimizerState {
  OptimizerSettings settings;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  // Zero moment buffers shaped like params.
  static OptimizerState for_params(const std::vector<Tensor>& params, OptimizerSettings settings);
};

// One bias-corrected Adam/AdamW step over params using their accumulated
// grads. Parameters without a gradient are left untouched (no decay either),
// matching the usual "grad is None" convention. ShapeMismatch when the state
// was built for different parameters.
void adamw_step(const std::vector<Tensor>& params, OptimizerState& state);

void zero_grads(const std::vector<Tensor>& params);

}  // namespace maven
