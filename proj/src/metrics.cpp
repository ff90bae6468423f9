#include "maven/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "maven/error.hpp"

namespace maven::metrics {

namespace {

struct Moments {
  double mean_x = 0.0, mean_y = 0.0, var_x = 0.0, var_y = 0.0, cov = 0.0;
};

Moments moments(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::LengthMismatch,
                "series lengths differ: " + std::to_string(x.size()) + " vs " + std::to_string(y.size()));
  }
  if (x.size() < 2) throw Error(ErrorCode::LengthMismatch, "need at least two points");
  const double n = static_cast<double>(x.size());
  Moments m;
  for (std::size_t i = 0; i < x.size(); ++i) {
    m.mean_x += x[i];
    m.mean_y += y[i];
  }
  m.mean_x /= n;
  m.mean_y /= n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - m.mean_x, dy = y[i] - m.mean_y;
    m.var_x += dx * dx;
    m.var_y += dy * dy;
    m.cov += dx * dy;
  }
  m.var_x /= n;
  m.var_y /= n;
  m.cov /= n;
  return m;
}

}  // namespace

double pearson(std::span<const double> x, std::span<const double> y) {
  const Moments m = moments(x, y);
  if (m.var_x == 0.0 || m.var_y == 0.0) throw Error(ErrorCode::DegenerateVariance, "pearson: constant series");
  const double r = m.cov / std::sqrt(m.var_x * m.var_y);
  return std::clamp(r, -1.0, 1.0);
}

CccResult ccc_checked(std::span<const double> x, std::span<const double> y) {
  const Moments m = moments(x, y);
  const double gap = m.mean_x - m.mean_y;
  const double denom = m.var_x + m.var_y + gap * gap;
  if (denom == 0.0) throw Error(ErrorCode::DegenerateDenominator, "ccc: both series constant and equal");
  if (m.var_x == 0.0 || m.var_y == 0.0) return {0.0, true};
  return {2.0 * m.cov / denom, false};
}

double ccc(std::span<const double> x, std::span<const double> y) {
  const CccResult r = ccc_checked(x, y);
  if (r.degenerate_variance) throw Error(ErrorCode::DegenerateVariance, "ccc: one series is constant");
  return r.value;
}

double ccc_average(double ccc_valence, double ccc_arousal) { return 0.5 * (ccc_valence + ccc_arousal); }

EvalReport evaluate(std::span<const double> pred_valence, std::span<const double> true_valence,
                    std::span<const double> pred_arousal, std::span<const double> true_arousal) {
  EvalReport r;
  r.n = pred_valence.size();
  auto dimension = [&r](const char* name, std::span<const double> p, std::span<const double> t, double& c,
                        double& rho) {
    const CccResult res = ccc_checked(p, t);
    c = res.value;
    if (res.degenerate_variance) {
      r.warnings.push_back(std::string(name) + ": constant series, CCC set to 0");
      rho = 0.0;
    } else {
      rho = pearson(p, t);
    }
  };
  dimension("valence", pred_valence, true_valence, r.ccc_valence, r.pearson_valence);
  dimension("arousal", pred_arousal, true_arousal, r.ccc_arousal, r.pearson_arousal);
  r.ccc_avg = ccc_average(r.ccc_valence, r.ccc_arousal);
  return r;
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << "samples          " << n << '\n'
     << "CCC valence      " << ccc_valence << '\n'
     << "CCC arousal      " << ccc_arousal << '\n'
     << "CCC average      " << ccc_avg << '\n'
     << "Pearson valence  " << pearson_valence << '\n'
     << "Pearson arousal  " << pearson_arousal << '\n';
  for (const auto& w : warnings) os << "warning: " << w << '\n';
  return os.str();
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["n"] = n;
  j["ccc_valence"] = ccc_valence;
  j["ccc_arousal"] = ccc_arousal;
  j["ccc_avg"] = ccc_avg;
  j["pearson_valence"] = pearson_valence;
  j["pearson_arousal"] = pearson_arousal;
  j["warnings"] = warnings;
  return j.dump(2) + "\n";
}

}  // namespace maven::metrics
