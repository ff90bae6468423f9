#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "maven/gradcheck.hpp"
#include "maven/head.hpp"
#include "maven/ops.hpp"
#include "test_util.hpp"

using namespace maven;
using namespace maven::head;
using maven::testing::check_throws_code;
using maven::testing::random_tensor;

namespace {

nn::Linear dense(std::vector<double> w, std::size_t in, std::size_t out, std::vector<double> b) {
  return {Tensor::from({in, out}, std::move(w), true), Tensor::from({out}, std::move(b), true)};
}

}  // namespace

TEST_CASE("pool examples") {
  const Tensor row = Tensor::matrix({{1.5, -2.0, 3.0}});
  CHECK(pool(row).values() == row.values());
  CHECK(pool(Tensor::matrix({{4, 5}, {4, 5}, {4, 5}})).values() == std::vector<double>{4, 5});
  CHECK(pool(Tensor::matrix({{1, 2}, {3, 4}})).values() == std::vector<double>{2, 3});

  const Tensor x = Tensor::from({4, 2}, {1, 2, 3, 4, 5, 6, 7, 8}, true);
  backward(ops::sum(pool(x)));
  for (double g : x.grad()) CHECK(g == 0.25);
}

TEST_CASE("predict_polar examples") {
  ModelConfig cfg;
  nn::ParameterStore store(cfg.seed);
  HeadParams params = HeadParams::create(store, cfg);
  Rng rng(3);
  CHECK(params.fc3.weight.shape() == Shape{cfg.d2, 2});

  SUBCASE("all-zero parameters") {
    for (auto& p : store.named()) {
      Tensor t = p.tensor;
      std::fill(t.mutable_data().begin(), t.mutable_data().end(), 0.0);
    }
    const PolarOutput out = predict_polar(random_tensor({1, cfg.d_beit}, rng), params, ops::Mode::Eval, rng);
    const PolarPrediction p = out.value();
    CHECK(p.intensity == 0.0);
    CHECK(p.theta == 0.0);
    CHECK(p.valence == 0.0);
    CHECK(p.arousal == 0.0);
  }
  SUBCASE("eval mode is a pure function") {
    NoGradGuard guard;
    const Tensor x = random_tensor({1, cfg.d_beit}, rng);
    const auto a = predict_polar(x, params, ops::Mode::Eval, rng).va();
    const auto b = predict_polar(x, params, ops::Mode::Eval, rng).va();
    CHECK(a.values() == b.values());
    // train mode draws dropout masks
    bool differs = false;
    for (int i = 0; i < 20 && !differs; ++i) {
      differs = predict_polar(x, params, ops::Mode::Train, rng).va().values() != a.values();
    }
    CHECK(differs);
  }
  SUBCASE("shape mismatch") {
    check_throws_code([&] { predict_polar(random_tensor({1, cfg.d_beit + 1}, rng), params, ops::Mode::Eval, rng); },
                      ErrorCode::ShapeMismatch);
  }
}

TEST_CASE("predict_polar hand-computed forward") {
  // x = 1.5: h1 = relu(2*1.5 - 1) = 2, h2 = relu(3*2 + 0.5) = 6.5,
  // [I, theta] = [6.5*1 + 0.1, 6.5*0.5 - 0.2] = [6.6, 3.05]
  const HeadParams params{dense({2}, 1, 1, {-1}), dense({3}, 1, 1, {0.5}), dense({1, 0.5}, 1, 2, {0.1, -0.2}), 0.2};
  Rng rng(5);
  const auto out = predict_polar(Tensor::matrix({{1.5}}), params, ops::Mode::Eval, rng);
  CHECK(std::abs(out.intensity.item() - 6.6) < 1e-15);
  CHECK(std::abs(out.theta.item() - 3.05) < 1e-15);
  CHECK(std::abs(out.valence.item() - 6.6 * std::cos(3.05)) < 1e-14);
  CHECK(std::abs(out.arousal.item() - 6.6 * std::sin(3.05)) < 1e-14);

  // a negative pre-activation is cut by the first ReLU
  const auto zero = predict_polar(Tensor::matrix({{-4.0}}), params, ops::Mode::Eval, rng);
  CHECK(std::abs(zero.intensity.item() - (0.5 * 1 + 0.1)) < 1e-15);
}

TEST_CASE("polar conversion examples") {
  auto [v1, a1] = polar_to_va(1.0, 0.0);
  CHECK(v1 == 1.0);
  CHECK(a1 == 0.0);
  for (double th : {-3.0, 0.3, 2.0}) {
    auto [v, a] = polar_to_va(0.0, th);
    CHECK(v == 0.0);
    CHECK(std::abs(a) == 0.0);
  }
  auto [v2, a2] = polar_to_va(std::sqrt(2.0), std::numbers::pi / 4);
  CHECK(std::abs(v2 - 1.0) < 1e-15);
  CHECK(std::abs(a2 - 1.0) < 1e-15);
  check_throws_code([] { polar_to_va(std::numeric_limits<double>::quiet_NaN(), 0.0); }, ErrorCode::NonFinite);
  check_throws_code([] { polar_to_va(1.0, std::numeric_limits<double>::infinity()); }, ErrorCode::NonFinite);

  auto [i1, t1] = va_to_polar(1.0, 0.0);
  CHECK(i1 == 1.0);
  CHECK(t1 == 0.0);
  auto [i0, t0] = va_to_polar(0.0, 0.0);
  CHECK(i0 == 0.0);
  CHECK(t0 == 0.0);
  auto [i2, t2] = va_to_polar(-1.0, 0.0);
  CHECK(i2 == 1.0);
  CHECK(t2 == std::numbers::pi);
  auto [i3, t3] = va_to_polar(-1.0, -0.0);
  CHECK(i3 == 1.0);
  CHECK(t3 == std::numbers::pi);
}

TEST_CASE("polar round trips") {
  Rng rng(7);
  for (int i = 0; i < 100000; ++i) {
    const double v = rng.uniform(-1.0, 1.0), a = rng.uniform(-1.0, 1.0);
    const auto [in, th] = va_to_polar(v, a);
    CHECK(th > -std::numbers::pi);
    CHECK(th <= std::numbers::pi);
    const auto [v2, a2] = polar_to_va(in, th);
    if (std::abs(v2 - v) > 1e-9 || std::abs(a2 - a) > 1e-9) FAIL("round trip failed at " << v << ", " << a);

    const double r = rng.uniform(0.0, 2.0), t = rng.uniform(-std::numbers::pi, std::numbers::pi);
    const auto [v3, a3] = polar_to_va(r, t);
    const auto [r3, t3] = va_to_polar(v3, a3);
    if (std::abs(r3 - r) > 1e-9 || std::abs(t3 - t) > 1e-9) FAIL("inverse round trip failed at " << r << ", " << t);
  }
}

TEST_CASE("PolarPrediction clamps only the reported copies") {
  const auto p = PolarPrediction::from_polar(2.0, 0.25);
  CHECK(std::abs(p.valence - 2.0 * std::cos(0.25)) < 1e-12);
  CHECK(std::abs(p.arousal - 2.0 * std::sin(0.25)) < 1e-12);
  CHECK(p.valence_clamped == 1.0);
  CHECK(p.arousal_clamped == p.arousal);
  CHECK(p.clamped);
  const auto q = PolarPrediction::from_polar(0.5, -1.0);
  CHECK_FALSE(q.clamped);
  CHECK(q.valence_clamped == q.valence);
}

TEST_CASE("mse_loss examples and properties") {
  const std::vector<VaLabel> truth{{0.2, -0.4}, {0.9, 0.1}};
  CHECK(mse_loss(truth, truth) == 0.0);
  const std::vector<VaLabel> one_truth{{0.3, 0.5}}, one_pred{{1.3, 0.5}};
  CHECK(mse_loss(one_pred, one_truth) == 1.0);
  const std::vector<VaLabel> zero{{0, 0}, {0, 0}}, errs{{1, 0}, {0, 1}};
  CHECK(mse_loss(errs, zero) == 1.0);

  check_throws_code([&] { mse_loss(std::span<const VaLabel>(truth), std::span<const VaLabel>(one_truth)); },
                    ErrorCode::LengthMismatch);
  check_throws_code([] { mse_loss(std::span<const VaLabel>(), std::span<const VaLabel>()); }, ErrorCode::EmptyBatch);

  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<VaLabel> p(1 + rng.below(6)), t(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
      t[i] = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    }
    const double l = mse_loss(p, t);
    CHECK(l > 0.0);
    CHECK(l == mse_loss(t, p));
    // the tensor form agrees
    std::vector<double> pv, tv;
    for (std::size_t i = 0; i < p.size(); ++i) {
      pv.insert(pv.end(), {p[i].valence, p[i].arousal});
      tv.insert(tv.end(), {t[i].valence, t[i].arousal});
    }
    const double lt = mse_loss(Tensor::from({p.size(), 2}, pv), Tensor::from({t.size(), 2}, tv)).item();
    CHECK(std::abs(lt - l) < 1e-14);
  }
  check_throws_code([] { mse_loss(Tensor::zeros({2, 2}), Tensor::zeros({3, 2})); }, ErrorCode::LengthMismatch);
}

TEST_CASE("gradient check through the full head") {
  ModelConfig cfg;
  nn::ParameterStore store(cfg.seed);
  const HeadParams params = HeadParams::create(store, cfg);
  Rng rng(13);
  const Tensor seq = random_tensor({5, cfg.d_beit}, rng);
  const Tensor truth = Tensor::matrix({{0.3, -0.6}});
  auto loss_of = [&](const Tensor& f) {
    Rng unused(0);
    return mse_loss(predict_polar(pool(f), params, ops::Mode::Eval, unused).va(), truth);
  };
  const auto wrt_input = grad_check(loss_of, seq);
  INFO("input " << wrt_input.max_rel_error);
  CHECK(wrt_input.passed);

  Rng pick(17);
  const auto wrt_params = grad_check_params([&] { return loss_of(seq); }, store.named(), 1e-5, 1e-4, 0, pick);
  INFO("params " << wrt_params.worst_coordinate << " " << wrt_params.max_rel_error);
  CHECK(wrt_params.passed);

  // the angular path on its own
  const auto trig = grad_check(
      [&](const Tensor& it) {
        const auto out = polar_to_va(ops::slice_cols(it, 0, 1), ops::slice_cols(it, 1, 1));
        return mse_loss(out.va(), truth);
      },
      Tensor::matrix({{0.7, 2.9}}));
  CHECK(trig.passed);
}
