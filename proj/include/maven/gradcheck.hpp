#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "maven/rng.hpp"
#include "maven/tensor.hpp"

namespace maven {

struct GradCheckReport {
  std::string name;
  std::vector<double> rel_errors;  // one per checked coordinate
  double max_rel_error = 0.0;
  std::string worst_coordinate;    // "param[index]" of the worst error
  bool passed = true;
};

// |analytic - numeric| / max(|analytic|, |numeric|, floor). The floor keeps
// coordinates whose true gradient is ~0 from turning finite-difference
// round-off into a huge relative error.
double relative_error(double analytic, double numeric, double floor = 1e-6);

// Checks every coordinate of x for a scalar-valued f.
GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h = 1e-5,
                           double tol = 1e-4);

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Checks d(loss)/d(param) for tensors mutated in place. With
// max_coords_per_tensor == 0 every coordinate is checked; otherwise that many
// coordinates per tensor are sampled from rng.
GradCheckReport grad_check_params(const std::function<Tensor()>& loss, const std::vector<NamedTensor>& params,
                                  double h, double tol, std::size_t max_coords_per_tensor, Rng& rng);

}  // namespace maven
