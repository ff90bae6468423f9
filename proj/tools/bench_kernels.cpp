// Serial vs OpenMP kernels: wall time per call and a bit-equality check.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "maven/kernels.hpp"
#include "maven/rng.hpp"

namespace {

using namespace maven;
using Clock = std::chrono::steady_clock;

std::vector<double> random_values(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

double time_per_call(const std::function<void()>& f, int reps) {
  f();
  const auto start = Clock::now();
  for (int i = 0; i < reps; ++i) f();
  return std::chrono::duration<double>(Clock::now() - start).count() / reps;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

void report(const std::string& name, double serial, double parallel, bool equal) {
  std::printf("%-28s serial %10.3f us  parallel %10.3f us  speedup %5.2fx  %s\n", name.c_str(), serial * 1e6,
              parallel * 1e6, serial / parallel, equal ? "bit-equal" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bench_kernels: serial vs OpenMP kernel timings"};
  std::vector<std::size_t> sizes{64, 256, 512};
  int reps = 20;
  app.add_option("--sizes", sizes, "square matrix sizes")->capture_default_str();
  app.add_option("--reps", reps, "timed repetitions per kernel")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  std::printf("openmp %s, max threads %d\n", kernels::openmp_available() ? "on" : "off", kernels::max_threads());
  Rng rng(1);
  bool all_equal = true;
  for (const std::size_t n : sizes) {
    const auto a = random_values(n * n, rng), b = random_values(n * n, rng);
    std::vector<double> cs(n * n), cp(n * n);
    const std::string tag = " " + std::to_string(n) + "x" + std::to_string(n);

    double ts = time_per_call([&] { kernels::matmul_serial(a, b, cs, n, n, n); }, reps);
    double tp = time_per_call([&] { kernels::matmul_parallel(a, b, cp, n, n, n); }, reps);
    report("matmul" + tag, ts, tp, same_bits(cs, cp));
    all_equal = all_equal && same_bits(cs, cp);

    ts = time_per_call([&] { kernels::matmul_bt_serial(a, b, cs, n, n, n); }, reps);
    tp = time_per_call([&] { kernels::matmul_bt_parallel(a, b, cp, n, n, n); }, reps);
    report("matmul_bt" + tag, ts, tp, same_bits(cs, cp));
    all_equal = all_equal && same_bits(cs, cp);

    ts = time_per_call([&] { kernels::matmul_at_serial(a, b, cs, n, n, n); }, reps);
    tp = time_per_call([&] { kernels::matmul_at_parallel(a, b, cp, n, n, n); }, reps);
    report("matmul_at" + tag, ts, tp, same_bits(cs, cp));
    all_equal = all_equal && same_bits(cs, cp);

    ts = time_per_call([&] { kernels::softmax_rows_serial(a, {}, cs, n, n); }, reps);
    tp = time_per_call([&] { kernels::softmax_rows_parallel(a, {}, cp, n, n); }, reps);
    report("softmax_rows" + tag, ts, tp, same_bits(cs, cp));
    all_equal = all_equal && same_bits(cs, cp);

    std::vector<double> is(n), ip(n);
    ts = time_per_call([&] { kernels::layer_norm_rows_serial(a, cs, is, n, n, 1e-5); }, reps);
    tp = time_per_call([&] { kernels::layer_norm_rows_parallel(a, cp, ip, n, n, 1e-5); }, reps);
    report("layer_norm_rows" + tag, ts, tp, same_bits(cs, cp) && same_bits(is, ip));
    all_equal = all_equal && same_bits(cs, cp) && same_bits(is, ip);
  }
  return all_equal ? 0 : 1;
}
