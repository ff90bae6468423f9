#pragma once

#include <cstdint>
#include <random>

namespace maven {

// Seedable generator whose output is identical across standard libraries:
// the mt19937_64 engine is fully specified by the standard, and the
// uniform/normal transforms below are implemented here rather than taken
// from <random>'s implementation-defined distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; no cached second variate so the stream position is simple.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  // Derives an independent child stream (e.g. per clip or per component).
  Rng fork(std::uint64_t salt);

 private:
  std::mt19937_64 engine_;
};

}  // namespace maven
