#include "maven/optim.hpp"

#include <cmath>

#include "maven/error.hpp"

namespace maven {

OptimizerState OptimizerState::for_params(const std::vector<Tensor>& params, OptimizerSettings settings) {
  OptimizerState state;
  state.settings = settings;
  for (const Tensor& p : params) {
    state.first_moment.emplace_back(p.numel(), 0.0);
    state.second_moment.emplace_back(p.numel(), 0.0);
  }
  return state;
}

void adamw_step(const std::vector<Tensor>& params, OptimizerState& state) {
  if (params.size() != state.first_moment.size() || params.size() != state.second_moment.size()) {
    throw Error(ErrorCode::ShapeMismatch, "optimizer state was built for a different parameter list");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].numel() != state.first_moment[i].size() || params[i].numel() != state.second_moment[i].size()) {
      throw Error(ErrorCode::ShapeMismatch, "optimizer moment buffer " + std::to_string(i) +
                                                " does not match parameter " + shape_str(params[i].shape()));
    }
  }

  const auto& s = state.settings;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(s.beta1, t);
  const double bc2 = 1.0 - std::pow(s.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& p = params[i];
    if (!p.has_grad()) continue;
    auto theta = p.impl()->data.data();
    const auto g_in = p.grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < m.size(); ++j) {
      double g = g_in[j];
      if (s.kind == OptimizerKind::AdamW) {
        theta[j] -= s.lr * s.weight_decay * theta[j];
      } else {
        g += s.weight_decay * theta[j];
      }
      m[j] = s.beta1 * m[j] + (1.0 - s.beta1) * g;
      v[j] = s.beta2 * v[j] + (1.0 - s.beta2) * g * g;
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      theta[j] -= s.lr * m_hat / (std::sqrt(v_hat) + s.eps);
    }
  }
}

void zero_grads(const std::vector<Tensor>& params) {
  for (Tensor p : params) p.zero_grad();
}

}  // namespace maven
