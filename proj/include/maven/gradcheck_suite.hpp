#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "maven/gradcheck.hpp"
#include "maven/model_config.hpp"

namespace maven {

struct GradCheckSuiteSettings {
  ModelConfig model = ModelConfig::desk();
  double h = 1e-5;
  double tol = 1e-4;
  std::size_t coords_per_tensor = 3;  // sampled per parameter tensor in model components
  std::size_t frames = 2;             // raw clip used for the composed model
  std::size_t frame_side = 16;
  std::uint64_t seed = 99;
};

struct GradCheckSuiteResult {
  std::vector<GradCheckReport> components;
  double seconds = 0.0;

  bool passed() const;
  std::vector<std::string> failures() const;
};

// Every differentiable kernel ("kernel.<op>"), each encoder, each fusion
// stage, the head, and the composed model from raw inputs to the loss
// ("model.full"). on_component runs after each report is ready.
GradCheckSuiteResult run_gradcheck_suite(const GradCheckSuiteSettings& settings,
                                         const std::function<void(const GradCheckReport&)>& on_component = {});

}  // namespace maven
