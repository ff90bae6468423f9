#include "maven/gradcheck_suite.hpp"

#include <chrono>

#include "maven/model.hpp"
#include "maven/ops.hpp"

namespace maven {

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v));
}

Tensor weighted_sum(const Tensor& x, const Tensor& w) { return ops::sum(ops::mul(x, w)); }

std::vector<NamedTensor> with_prefix(const nn::ParameterStore& store, const std::string& prefix) {
  std::vector<NamedTensor> out;
  for (const auto& p : store.named()) {
    if (p.name.rfind(prefix, 0) == 0) out.push_back(p);
  }
  return out;
}

}  // namespace

bool GradCheckSuiteResult::passed() const {
  for (const auto& c : components) {
    if (!c.passed) return false;
  }
  return true;
}

std::vector<std::string> GradCheckSuiteResult::failures() const {
  std::vector<std::string> out;
  for (const auto& c : components) {
    if (!c.passed) out.push_back(c.name);
  }
  return out;
}

GradCheckSuiteResult run_gradcheck_suite(const GradCheckSuiteSettings& s,
                                         const std::function<void(const GradCheckReport&)>& on_component) {
  const auto start = std::chrono::steady_clock::now();
  GradCheckSuiteResult result;
  auto record = [&](std::string name, GradCheckReport r) {
    r.name = std::move(name);
    if (on_component) on_component(r);
    result.components.push_back(std::move(r));
  };

  // Kernels: each op composed only with a weighted sum, so a broken rule
  // shows up under its own name.
  Rng rng(s.seed);
  const Tensor x = random_tensor({2, 4}, rng);
  const Tensor w24 = random_tensor({2, 4}, rng);
  const Tensor w43 = random_tensor({4, 3}, rng);
  const Tensor w23 = random_tensor({2, 3}, rng);
  const Tensor w42 = random_tensor({4, 2}, rng);
  const Tensor w28 = random_tensor({2, 8}, rng);
  const Tensor w44 = random_tensor({4, 4}, rng);
  const Tensor w_row = random_tensor({4}, rng);
  const Tensor b3 = random_tensor({3}, rng);
  const Tensor gamma = random_tensor({4}, rng, 0.5, 1.5);
  const Tensor beta = random_tensor({4}, rng);
  const Tensor other = random_tensor({2, 4}, rng);
  const std::vector<unsigned char> mask{1, 0, 1, 1, 1, 1, 0, 1};
  const std::vector<std::size_t> idx{1, 0, 1, 1};

  struct KernelCase {
    const char* op;
    std::function<Tensor(const Tensor&)> f;
  };
  const std::vector<KernelCase> kernels{
      {"sum", [&](const Tensor& t) { return ops::sum(t); }},
      {"mul", [&](const Tensor& t) { return ops::sum(ops::mul(t, t)); }},
      {"matmul", [&](const Tensor& t) { return weighted_sum(ops::matmul(t, w43), w23); }},
      {"transpose", [&](const Tensor& t) { return weighted_sum(ops::transpose(t), ops::transpose(w24)); }},
      {"add", [&](const Tensor& t) { return weighted_sum(ops::add(t, other), w24); }},
      {"sub", [&](const Tensor& t) { return weighted_sum(ops::sub(other, t), w24); }},
      {"scale", [&](const Tensor& t) { return weighted_sum(ops::scale(t, -1.5), w24); }},
      {"scale_by", [&](const Tensor& t) { return weighted_sum(ops::scale_by(t, ops::slice_cols(ops::mean_rows(t), 0, 1)), w24); }},
      {"add_row", [&](const Tensor& t) { return weighted_sum(ops::add_row(t, w_row), w24); }},
      {"relu", [&](const Tensor& t) { return weighted_sum(ops::relu(t), w24); }},
      {"tanh", [&](const Tensor& t) { return weighted_sum(ops::tanh(t), w24); }},
      {"sin", [&](const Tensor& t) { return weighted_sum(ops::sin(t), w24); }},
      {"cos", [&](const Tensor& t) { return weighted_sum(ops::cos(t), w24); }},
      {"softmax", [&](const Tensor& t) { return weighted_sum(ops::softmax(t), w24); }},
      {"softmax.masked", [&](const Tensor& t) { return weighted_sum(ops::softmax(t, mask), w24); }},
      {"softmax_matmul", [&](const Tensor& t) { return weighted_sum(ops::matmul(ops::softmax(t), w44), w24); }},
      {"layer_norm", [&](const Tensor& t) { return weighted_sum(ops::layer_norm(t, gamma, beta, 1e-5), w24); }},
      {"linear", [&](const Tensor& t) { return weighted_sum(ops::linear(t, w43, b3), w23); }},
      {"concat_cols", [&](const Tensor& t) { return weighted_sum(ops::concat_cols({t, other}), w28); }},
      {"concat_rows", [&](const Tensor& t) { return weighted_sum(ops::concat_rows({other, t}), ops::concat_rows({w24, other})); }},
      {"slice_cols", [&](const Tensor& t) { return weighted_sum(ops::slice_cols(t, 1, 3), w23); }},
      {"gather_rows", [&](const Tensor& t) { return weighted_sum(ops::gather_rows(t, idx), ops::concat_rows({w24, other})); }},
      {"reshape", [&](const Tensor& t) { return weighted_sum(ops::reshape(t, {4, 2}), w42); }},
      {"mean_rows", [&](const Tensor& t) { return weighted_sum(ops::mean_rows(t), ops::slice_cols(ops::reshape(w24, {1, 8}), 0, 4)); }},
      {"dropout",
       [&](const Tensor& t) {
         Rng fixed(s.seed + 1);
         return weighted_sum(ops::dropout(t, 0.2, ops::Mode::Train, fixed), w24);
       }},
      {"cyclic_shift", [&](const Tensor& t) { return weighted_sum(ops::cyclic_shift(ops::reshape(t, {4, 2}), 2, 2, 1), w42); }},
  };
  for (const auto& k : kernels) record(std::string("kernel.") + k.op, grad_check(k.f, x, s.h, s.tol));
  {
    const Tensor g = gamma.clone(true), b = beta.clone(true);
    Rng pick(s.seed + 2);
    record("kernel.layer_norm.affine",
           grad_check_params([&] { return weighted_sum(ops::layer_norm(x, g, b, 1e-5), w24); }, {{"gamma", g}, {"beta", b}},
                             s.h, s.tol, 0, pick));
  }

  // Model components at the configured dims, on tiny raw inputs.
  const ModelConfig& cfg = s.model;
  const MavenModel model(cfg);
  const nn::ParameterStore& store = model.params();
  Rng data(s.seed + 3);
  const encoders::VideoClip clip{random_tensor({s.frames, s.frame_side, s.frame_side, 3}, data, 0.0, 1.0), 25.0};
  const std::size_t samples = cfg.stft_window + 10 * cfg.stft_hop;
  const encoders::AudioTrack audio{random_tensor({samples}, data, -0.5, 0.5), cfg.sample_rate};
  encoders::Transcript text{{}, cfg.vocab_size};
  for (std::size_t i = 0; i < std::min<std::size_t>(5, cfg.max_position); ++i) text.token_ids.push_back(data.below(cfg.vocab_size));
  const std::size_t t = s.frames;
  const Tensor truth = Tensor::matrix({{0.4, -0.3}});

  ModalityBundle features;
  {
    NoGradGuard guard;
    features = model.encode(clip, audio, text);
  }

  auto check = [&](const std::string& name, const std::string& prefix, const std::function<Tensor()>& loss) {
    Rng pick(s.seed + 4);
    record(name, grad_check_params(loss, with_prefix(store, prefix), s.h, s.tol, s.coords_per_tensor, pick));
  };

  const Tensor wv = random_tensor({t, cfg.d_v}, rng), wa = random_tensor({t, cfg.d_a}, rng);
  const Tensor wt = random_tensor({text.token_ids.size(), cfg.d_t}, rng);
  check("encoder.visual", "visual.", [&] { return weighted_sum(model.encoders().visual(clip), wv); });
  check("encoder.audio", "audio.", [&] { return weighted_sum(model.encoders().audio(audio, t), wa); });
  check("encoder.text", "text.", [&] { return weighted_sum(model.encoders().text(text), wt); });

  const auto& fusion = model.fusion();
  std::array<Tensor, 3> enhanced_w{random_tensor({t, cfg.d_v}, rng), wa, random_tensor({t, cfg.d_t}, rng)};
  auto enhanced_loss = [&] {
    const auto e = fusion.enhance(features);
    return ops::add(ops::add(weighted_sum(e[0], enhanced_w[0]), weighted_sum(e[1], enhanced_w[1])),
                    weighted_sum(e[2], enhanced_w[2]));
  };
  check("fusion.pathways", "fusion.pathway.", enhanced_loss);
  check("fusion.gates", "fusion.gate.", enhanced_loss);
  check("fusion.refine", "fusion.refine.", [&] {
    return weighted_sum(fusion.self_att_refine(Modality::Visual, features.f_v()), enhanced_w[0]);
  });
  const Tensor projected_w = random_tensor({t, cfg.d_proj}, rng);
  check("fusion.project", "fusion.proj", [&] {
    return weighted_sum(fusion.fuse_project(features.features), projected_w);
  });
  const Tensor stack_in = random_tensor({t + 1, cfg.d_proj}, rng);
  const Tensor stack_w = random_tensor({t + 1, cfg.d_beit}, rng);
  check("fusion.beit", "fusion.beit.", [&] { return weighted_sum(fusion.encoder_stack(stack_in), stack_w); });

  const Tensor pooled = random_tensor({1, cfg.d_beit}, rng);
  check("head", "head.", [&] {
    Rng unused(0);
    return head::mse_loss(head::predict_polar(pooled, model.head(), ops::Mode::Eval, unused).va(), truth);
  });

  check("model.full", "", [&] {
    Rng unused(0);
    return head::mse_loss(model.forward(model.encode(clip, audio, text), ops::Mode::Eval, unused).va(), truth);
  });

  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace maven
