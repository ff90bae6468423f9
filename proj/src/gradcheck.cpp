#include "maven/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace maven {

namespace {

double eval_no_grad(const std::function<Tensor()>& loss) {
  NoGradGuard guard;
  return loss().item();
}

void note(GradCheckReport& report, double err, const std::string& where, double tol) {
  if (std::isnan(err)) err = INFINITY;
  if (report.rel_errors.empty() || err > report.max_rel_error) {
    report.max_rel_error = err;
    report.worst_coordinate = where;
  }
  report.rel_errors.push_back(err);
  if (!(err < tol)) report.passed = false;
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h, double tol) {
  Tensor probe = x.clone(true);
  std::function<Tensor()> loss = [&] { return f(probe); };
  Rng unused(0);
  return grad_check_params(loss, {{"x", probe}}, h, tol, 0, unused);
}

GradCheckReport grad_check_params(const std::function<Tensor()>& loss, const std::vector<NamedTensor>& params,
                                  double h, double tol, std::size_t max_coords_per_tensor, Rng& rng) {
  for (const auto& p : params) {
    Tensor t = p.tensor;
    t.zero_grad();
  }
  Tape::current().clear();
  Tensor out = loss();
  backward(out);

  GradCheckReport report;
  for (const auto& p : params) {
    Tensor t = p.tensor;
    const std::vector<double> analytic =
        t.has_grad() ? std::vector<double>(t.grad().begin(), t.grad().end()) : std::vector<double>(t.numel(), 0.0);

    std::vector<std::size_t> coords;
    if (max_coords_per_tensor == 0 || max_coords_per_tensor >= t.numel()) {
      coords.resize(t.numel());
      for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    } else {
      for (std::size_t i = 0; i < max_coords_per_tensor; ++i) coords.push_back(rng.below(t.numel()));
    }

    auto data = t.mutable_data();
    for (std::size_t i : coords) {
      const double orig = data[i];
      data[i] = orig + h;
      const double up = eval_no_grad(loss);
      data[i] = orig - h;
      const double down = eval_no_grad(loss);
      data[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      note(report, relative_error(analytic[i], numeric), p.name + "[" + std::to_string(i) + "]", tol);
    }
    t.zero_grad();
  }
  return report;
}

}  // namespace maven
