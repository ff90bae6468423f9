#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace maven::metrics {

// Sample Pearson correlation. LengthMismatch for unequal lengths or fewer
// than two points; DegenerateVariance when either series is constant.
double pearson(std::span<const double> x, std::span<const double> y);

// Lin's concordance correlation with population (1/N) moments throughout:
//   2 cov / (var_x + var_y + (mean_x - mean_y)^2)
// Both variances zero with equal means -> DegenerateDenominator.
struct CccResult {
  double value = 0.0;
  bool degenerate_variance = false;  // exactly one variance zero; value is 0
};
CccResult ccc_checked(std::span<const double> x, std::span<const double> y);
// Like ccc_checked but raises DegenerateVariance when one variance is zero.
double ccc(std::span<const double> x, std::span<const double> y);

struct EvalReport {
  double ccc_valence = 0.0;
  double ccc_arousal = 0.0;
  double ccc_avg = 0.0;
  double pearson_valence = 0.0;
  double pearson_arousal = 0.0;
  std::size_t n = 0;
  std::vector<std::string> warnings;

  std::string to_text() const;
  // Flat JSON object with the fields above.
  std::string to_json() const;
};

double ccc_average(double ccc_valence, double ccc_arousal);

// Dataset-level report over concatenated per-clip predictions. A constant
// prediction or label series yields CCC 0 plus a warning; Pearson is then
// reported as 0.
EvalReport evaluate(std::span<const double> pred_valence, std::span<const double> true_valence,
                    std::span<const double> pred_arousal, std::span<const double> true_arousal);

}  // namespace maven::metrics
