#include "maven/run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "maven/error.hpp"

namespace maven {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); }

std::string_view kind_name(OptimizerKind k) { return k == OptimizerKind::Adam ? "adam" : "adamw"; }

OptimizerKind parse_kind(const std::string& s) {
  if (s == "adam") return OptimizerKind::Adam;
  if (s == "adamw") return OptimizerKind::AdamW;
  invalid("optimizer.kind must be adam or adamw, got '" + s + "'");
}

// Every key of patch must exist in base with a compatible JSON type.
void check_known(const ordered_json& base, const json& patch, const std::string& where) {
  if (!patch.is_object()) invalid(where.empty() ? "config must be a JSON object" : where + " must be an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!base.contains(key)) invalid("unknown config key '" + path + "'");
    const auto& b = base.at(key);
    if (b.is_object()) {
      check_known(b, value, path);
    } else if (b.is_number() != value.is_number() || b.is_string() != value.is_string() ||
               b.is_boolean() != value.is_boolean() || b.is_array() != value.is_array() ||
               (b.is_number_unsigned() && !value.is_number_unsigned())) {
      invalid("config key '" + path + "' has the wrong type");
    }
  }
}

template <typename T>
T read(const ordered_json& j, const char* section, const char* key) {
  try {
    return j.at(section).at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    invalid(std::string("config key '") + section + "." + key + "' has the wrong type or range");
  }
}

}  // namespace

RunConfig RunConfig::preset(const std::string& name) {
  RunConfig c;
  c.name = name;
  if (name == "desk") return c;
  if (name == "paper") {
    c.model = ModelConfig::paper();
    c.schedule.batch_size = 16;
    return c;
  }
  if (name == "abaw-sec42") {
    c.optimizer.kind = OptimizerKind::Adam;
    c.optimizer.weight_decay = 1e-3;
    c.schedule.epochs = 200;
    c.schedule.batch_size = 16;
    return c;
  }
  if (name == "overfit") {
    c.model.dropout = 0.0;
    c.optimizer.lr = 1e-3;
    c.optimizer.weight_decay = 0.0;
    c.schedule.epochs = 2000;
    c.schedule.batch_size = 8;
    c.schedule.max_steps = 500;
    c.synth.n_clips = 8;
    c.synth.n_val = 0;
    c.paths.eval_split = "train";
    return c;
  }
  invalid("unknown preset '" + name + "'");
}

std::vector<std::string> RunConfig::preset_names() { return {"desk", "paper", "abaw-sec42", "overfit"}; }

ordered_json RunConfig::to_json() const {
  ordered_json j;
  j["name"] = name;
  j["seed"] = seed;
  const ModelConfig& m = model;
  j["model"] = {{"d_v", m.d_v},
                {"patch", m.patch},
                {"window", m.window},
                {"visual_layers", m.visual_layers},
                {"d_a", m.d_a},
                {"mel_bands", m.mel_bands},
                {"stft_window", m.stft_window},
                {"stft_hop", m.stft_hop},
                {"sample_rate", m.sample_rate},
                {"conv_channels", m.conv_channels},
                {"conv_kernel", m.conv_kernel},
                {"conv_stride", m.conv_stride},
                {"d_t", m.d_t},
                {"vocab_size", m.vocab_size},
                {"max_position", m.max_position},
                {"text_layers", m.text_layers},
                {"heads", m.heads},
                {"ffn_mult", m.ffn_mult},
                {"ln_eps", m.ln_eps},
                {"d_proj", m.d_proj},
                {"d_beit", m.d_beit},
                {"fusion_heads", m.fusion_heads},
                {"gate_init", m.gate_init},
                {"d1", m.d1},
                {"d2", m.d2},
                {"dropout", m.dropout},
                {"seed", m.seed}};
  j["optimizer"] = {{"kind", kind_name(optimizer.kind)},
                    {"lr", optimizer.lr},
                    {"weight_decay", optimizer.weight_decay},
                    {"beta1", optimizer.beta1},
                    {"beta2", optimizer.beta2},
                    {"eps", optimizer.eps}};
  j["schedule"] = {{"epochs", schedule.epochs}, {"batch_size", schedule.batch_size}, {"max_steps", schedule.max_steps}};
  j["paths"] = {{"data_dir", paths.data_dir},         {"manifest", paths.manifest},
                {"run_dir", paths.run_dir},           {"checkpoint", paths.checkpoint},
                {"train_split", paths.train_split},   {"eval_split", paths.eval_split}};
  j["keep"] = synth::keep_string(keep);
  j["synth"] = {{"n_clips", synth.n_clips},
                {"n_val", synth.n_val},
                {"steps", synth.steps},
                {"sigma_intensity", synth.sigma_intensity},
                {"sigma_theta", synth.sigma_theta},
                {"snr", synth.snr},
                {"seed", synth.seed}};
  j["gradcheck"] = {{"h", gradcheck.h}, {"tol", gradcheck.tol}, {"coords_per_tensor", gradcheck.coords_per_tensor}};
  return j;
}

RunConfig RunConfig::from_json(const json& patch, const RunConfig& base) {
  ordered_json doc = base.to_json();
  check_known(doc, patch, "");
  doc.merge_patch(patch);

  RunConfig c;
  try {
    c.name = doc.at("name").get<std::string>();
    c.seed = doc.at("seed").get<std::uint64_t>();
    c.keep = synth::parse_keep(doc.at("keep").get<std::string>());
  } catch (const nlohmann::json::exception&) {
    invalid("name, seed or keep has the wrong type");
  }
  ModelConfig& m = c.model;
  m.d_v = read<std::size_t>(doc, "model", "d_v");
  m.patch = read<std::size_t>(doc, "model", "patch");
  m.window = read<std::size_t>(doc, "model", "window");
  m.visual_layers = read<std::size_t>(doc, "model", "visual_layers");
  m.d_a = read<std::size_t>(doc, "model", "d_a");
  m.mel_bands = read<std::size_t>(doc, "model", "mel_bands");
  m.stft_window = read<std::size_t>(doc, "model", "stft_window");
  m.stft_hop = read<std::size_t>(doc, "model", "stft_hop");
  m.sample_rate = read<double>(doc, "model", "sample_rate");
  m.conv_channels = read<std::vector<std::size_t>>(doc, "model", "conv_channels");
  m.conv_kernel = read<std::size_t>(doc, "model", "conv_kernel");
  m.conv_stride = read<std::size_t>(doc, "model", "conv_stride");
  m.d_t = read<std::size_t>(doc, "model", "d_t");
  m.vocab_size = read<std::size_t>(doc, "model", "vocab_size");
  m.max_position = read<std::size_t>(doc, "model", "max_position");
  m.text_layers = read<std::size_t>(doc, "model", "text_layers");
  m.heads = read<std::size_t>(doc, "model", "heads");
  m.ffn_mult = read<std::size_t>(doc, "model", "ffn_mult");
  m.ln_eps = read<double>(doc, "model", "ln_eps");
  m.d_proj = read<std::size_t>(doc, "model", "d_proj");
  m.d_beit = read<std::size_t>(doc, "model", "d_beit");
  m.fusion_heads = read<std::size_t>(doc, "model", "fusion_heads");
  m.gate_init = read<double>(doc, "model", "gate_init");
  m.d1 = read<std::size_t>(doc, "model", "d1");
  m.d2 = read<std::size_t>(doc, "model", "d2");
  m.dropout = read<double>(doc, "model", "dropout");
  m.seed = read<std::uint64_t>(doc, "model", "seed");

  c.optimizer.kind = parse_kind(read<std::string>(doc, "optimizer", "kind"));
  c.optimizer.lr = read<double>(doc, "optimizer", "lr");
  c.optimizer.weight_decay = read<double>(doc, "optimizer", "weight_decay");
  c.optimizer.beta1 = read<double>(doc, "optimizer", "beta1");
  c.optimizer.beta2 = read<double>(doc, "optimizer", "beta2");
  c.optimizer.eps = read<double>(doc, "optimizer", "eps");

  c.schedule.epochs = read<std::size_t>(doc, "schedule", "epochs");
  c.schedule.batch_size = read<std::size_t>(doc, "schedule", "batch_size");
  c.schedule.max_steps = read<std::size_t>(doc, "schedule", "max_steps");

  c.paths.data_dir = read<std::string>(doc, "paths", "data_dir");
  c.paths.manifest = read<std::string>(doc, "paths", "manifest");
  c.paths.run_dir = read<std::string>(doc, "paths", "run_dir");
  c.paths.checkpoint = read<std::string>(doc, "paths", "checkpoint");
  c.paths.train_split = read<std::string>(doc, "paths", "train_split");
  c.paths.eval_split = read<std::string>(doc, "paths", "eval_split");

  c.synth.n_clips = read<std::size_t>(doc, "synth", "n_clips");
  c.synth.n_val = read<std::size_t>(doc, "synth", "n_val");
  c.synth.steps = read<std::size_t>(doc, "synth", "steps");
  c.synth.sigma_intensity = read<double>(doc, "synth", "sigma_intensity");
  c.synth.sigma_theta = read<double>(doc, "synth", "sigma_theta");
  c.synth.snr = read<std::array<double, 3>>(doc, "synth", "snr");
  c.synth.seed = read<std::uint64_t>(doc, "synth", "seed");
  c.synth.d_v = m.d_v;
  c.synth.d_a = m.d_a;
  c.synth.d_t = m.d_t;

  c.gradcheck.h = read<double>(doc, "gradcheck", "h");
  c.gradcheck.tol = read<double>(doc, "gradcheck", "tol");
  c.gradcheck.coords_per_tensor = read<std::size_t>(doc, "gradcheck", "coords_per_tensor");
  c.validate();
  return c;
}

std::filesystem::path RunConfig::manifest_path() const {
  if (!paths.manifest.empty()) return paths.manifest;
  return std::filesystem::path(paths.data_dir) / "manifest.jsonl";
}

std::filesystem::path RunConfig::run_dir() const {
  if (!paths.run_dir.empty()) return paths.run_dir;
  const char* root = std::getenv("MAVEN_RUN_ROOT");
  return std::filesystem::path(root && *root ? root : "runs") / name;
}

std::filesystem::path RunConfig::checkpoint_path() const {
  if (!paths.checkpoint.empty()) return paths.checkpoint;
  return run_dir() / "best.mvnc";
}

void RunConfig::validate() const {
  model.validate();
  synth.validate();
  if (!(optimizer.lr >= 0.0) || !(optimizer.weight_decay >= 0.0)) invalid("lr and weight_decay must be >= 0");
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0) || !(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0))
    invalid("betas must lie in [0, 1)");
  if (!(optimizer.eps > 0.0)) invalid("optimizer.eps must be positive");
  if (schedule.batch_size == 0) invalid("schedule.batch_size must be positive");
  if (!(gradcheck.h > 0.0) || !(gradcheck.tol > 0.0)) invalid("gradcheck.h and gradcheck.tol must be positive");
  if (synth.d_v != model.d_v || synth.d_a != model.d_a || synth.d_t != model.d_t)
    invalid("synth dims must match model dims");
}

void apply_override(ordered_json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) invalid("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  ordered_json* node = &doc;
  std::stringstream parts(key);
  std::string part;
  std::vector<std::string> path;
  while (std::getline(parts, part, '.')) path.push_back(part);
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (!node->is_object() || !node->contains(path[i])) invalid("unknown config key '" + key + "'");
    node = &(*node)[path[i]];
  }
  if (node->is_object()) invalid("override '" + key + "' names a section, not a field");
  // Keys that hold strings accept bare words; everything else must keep its type.
  if (node->is_string() && !value.is_string()) value = text;
  *node = value;
}

RunConfig resolve_config(const std::string& preset, const std::string& config_file,
                         const std::vector<std::string>& overrides) {
  const RunConfig base = RunConfig::preset(preset);
  ordered_json doc = base.to_json();
  if (!config_file.empty()) {
    std::ifstream in(config_file);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot read config " + config_file);
    json file = json::parse(in, nullptr, false);
    if (file.is_discarded()) invalid("config " + config_file + " is not valid JSON");
    check_known(doc, file, "");
    doc.merge_patch(file);
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return RunConfig::from_json(doc, base);
}

void echo_config(const RunConfig& cfg, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  std::ofstream out(dir / "config.json");
  if (ec || !out) throw Error(ErrorCode::IoFailure, "cannot write " + (dir / "config.json").string());
  out << cfg.to_json().dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + (dir / "config.json").string());
}

}  // namespace maven
