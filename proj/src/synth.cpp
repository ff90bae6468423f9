#include "maven/synth.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "maven/error.hpp"
#include "maven/mvn_io.hpp"

namespace maven::synth {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifestName = "manifest.jsonl";
constexpr const char* kLabelsName = "labels.csv";

double reflect_unit(double x) {
  while (x > 1.0 || x < -1.0) x = x > 1.0 ? 2.0 - x : -2.0 - x;
  return x;
}

double wrap_angle(double th) {
  th = std::remainder(th, 2.0 * std::numbers::pi);
  return th == -std::numbers::pi ? std::numbers::pi : th;
}

std::string clip_name(std::size_t i) {
  std::string digits = std::to_string(i);
  return "clip_" + std::string(digits.size() < 4 ? 4 - digits.size() : 0, '0') + digits;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

}  // namespace

void SynthSpec::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::InvalidConfig, "synth: " + what);
  };
  require(n_clips + n_val > 0, "need at least one clip");
  require(steps > 0 && d_v > 0 && d_a > 0 && d_t > 0, "steps and feature widths must be positive");
  require(std::isfinite(sigma_intensity) && std::isfinite(sigma_theta) && sigma_intensity >= 0 && sigma_theta >= 0,
          "walk step scales must be finite and non-negative");
  for (double s : snr) require(std::isfinite(s), "snr must be finite");
}

const ClipRecord& DatasetManifest::find(const std::string& clip_id) const {
  for (const auto& c : clips) {
    if (c.clip_id == clip_id) return c;
  }
  throw Error(ErrorCode::MissingClip, "clip '" + clip_id + "' is not in the manifest");
}

std::vector<std::string> DatasetManifest::ids(const std::string& split) const {
  std::vector<std::string> out;
  for (const auto& c : clips) {
    if (split.empty() || c.split == split) out.push_back(c.clip_id);
  }
  return out;
}

std::vector<head::VaLabel> label_walk(std::size_t steps, double sigma_intensity, double sigma_theta, Rng& rng) {
  double intensity = rng.uniform(0.2, 0.9);
  double theta = rng.uniform(-std::numbers::pi, std::numbers::pi);
  std::vector<head::VaLabel> walk;
  walk.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    if (t > 0) {
      intensity = std::abs(intensity + sigma_intensity * rng.normal());
      theta = wrap_angle(theta + sigma_theta * rng.normal());
    }
    auto [v, a] = head::polar_to_va(intensity, theta);
    v = reflect_unit(v);
    a = reflect_unit(a);
    walk.push_back({v, a});
    std::tie(intensity, theta) = head::va_to_polar(v, a);
  }
  return walk;
}

head::VaLabel clip_label(std::span<const head::VaLabel> walk) {
  head::VaLabel mean;
  for (const auto& p : walk) {
    mean.valence += p.valence;
    mean.arousal += p.arousal;
  }
  mean.valence /= static_cast<double>(walk.size());
  mean.arousal /= static_cast<double>(walk.size());
  return mean;
}

DatasetManifest generate(const SynthSpec& spec, const fs::path& dir) {
  spec.validate();
  std::error_code ec;
  fs::create_directories(dir / "features", ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + (dir / "features").string() + ": " + ec.message());

  Rng root(spec.seed);
  const std::array<std::size_t, 3> dims{spec.d_v, spec.d_a, spec.d_t};
  const std::size_t total = spec.n_clips + spec.n_val;

  // one fixed lift per modality: (v, a) -> d_m
  std::array<std::vector<double>, 3> lift;
  Rng lift_rng = root.fork(1);
  for (std::size_t m = 0; m < 3; ++m) {
    lift[m].resize(2 * dims[m]);
    for (double& w : lift[m]) w = lift_rng.normal();
  }

  std::vector<std::vector<head::VaLabel>> walks(total);
  for (std::size_t i = 0; i < total; ++i) {
    Rng walk_rng = root.fork(100 + i);
    walks[i] = label_walk(spec.steps, spec.sigma_intensity, spec.sigma_theta, walk_rng);
  }

  auto signal = [&](std::size_t m, const head::VaLabel& p, std::size_t k) {
    return p.valence * lift[m][k] + p.arousal * lift[m][dims[m] + k];
  };
  std::array<double, 3> noise_sd{};
  for (std::size_t m = 0; m < 3; ++m) {
    if (spec.snr[m] <= 0.0) continue;
    double power = 0.0;
    for (const auto& w : walks)
      for (const auto& p : w)
        for (std::size_t k = 0; k < dims[m]; ++k) power += signal(m, p, k) * signal(m, p, k);
    power /= static_cast<double>(total * spec.steps * dims[m]);
    noise_sd[m] = std::sqrt(power / spec.snr[m]);
  }

  DatasetManifest manifest;
  manifest.root = dir;
  manifest.dims = dims;
  std::string labels = "clip_id,valence,arousal\n";
  std::string lines;
  for (std::size_t i = 0; i < total; ++i) {
    ClipRecord rec;
    rec.clip_id = clip_name(i);
    rec.split = i < spec.n_clips ? "train" : "val";
    rec.steps = spec.steps;
    rec.labels = kLabelsName;
    Rng noise_rng = root.fork(10000 + i);
    for (Modality mod : kModalities) {
      const std::size_t m = index_of(mod);
      std::vector<double> f(spec.steps * dims[m]);
      for (std::size_t t = 0; t < spec.steps; ++t)
        for (std::size_t k = 0; k < dims[m]; ++k) {
          f[t * dims[m] + k] = signal(m, walks[i][t], k) + noise_sd[m] * noise_rng.normal();
        }
      rec.features[m] = "features/" + rec.clip_id + "." + std::string(modality_tag(mod)) + ".mvn";
      io::save_tensor((dir / rec.features[m]).string(), Tensor::from({spec.steps, dims[m]}, std::move(f)));
    }
    const head::VaLabel y = clip_label(walks[i]);
    labels += rec.clip_id + "," + format_double(y.valence) + "," + format_double(y.arousal) + "\n";

    nlohmann::ordered_json j;
    j["clip_id"] = rec.clip_id;
    j["split"] = rec.split;
    j["steps"] = rec.steps;
    j["dims"] = {{"v", dims[0]}, {"a", dims[1]}, {"t", dims[2]}};
    j["features"] = {{"v", rec.features[0]}, {"a", rec.features[1]}, {"t", rec.features[2]}};
    j["labels"] = rec.labels;
    lines += j.dump() + "\n";
    manifest.clips.push_back(std::move(rec));
  }
  write_text(dir / kLabelsName, labels);
  write_text(dir / kManifestName, lines);
  return manifest;
}

DatasetManifest load_manifest(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open manifest " + manifest_path.string());
  DatasetManifest manifest;
  manifest.root = manifest_path.parent_path();
  std::string line;
  std::size_t lineno = 0;
  bool have_dims = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = manifest_path.string() + ":" + std::to_string(lineno);
    try {
      const auto j = nlohmann::json::parse(line);
      ClipRecord rec;
      rec.clip_id = j.at("clip_id").get<std::string>();
      rec.split = j.at("split").get<std::string>();
      rec.steps = j.at("steps").get<std::size_t>();
      rec.labels = j.at("labels").get<std::string>();
      std::array<std::size_t, 3> dims{};
      for (Modality m : kModalities) {
        const std::string tag(modality_tag(m));
        rec.features[index_of(m)] = j.at("features").at(tag).get<std::string>();
        dims[index_of(m)] = j.at("dims").at(tag).get<std::size_t>();
      }
      if (have_dims && dims != manifest.dims) {
        throw Error(ErrorCode::ShapeMismatch, where + ": feature dims differ from earlier records");
      }
      manifest.dims = dims;
      have_dims = true;
      manifest.clips.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ShapeMismatch, where + ": malformed record (" + e.what() + ")");
    }
  }
  return manifest;
}

std::vector<std::pair<std::string, head::VaLabel>> load_labels(const fs::path& csv) {
  std::ifstream in(csv);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open labels " + csv.string());
  std::string line;
  if (!std::getline(in, line) || line != "clip_id,valence,arousal") {
    throw Error(ErrorCode::ShapeMismatch, csv.string() + ": expected header clip_id,valence,arousal");
  }
  std::vector<std::pair<std::string, head::VaLabel>> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string id, v, a;
    head::VaLabel y;
    try {
      if (!std::getline(row, id, ',') || !std::getline(row, v, ',') || !std::getline(row, a)) throw std::exception();
      std::size_t used = 0;
      y.valence = std::stod(v, &used);
      if (used != v.size()) throw std::exception();
      y.arousal = std::stod(a, &used);
      if (used != a.size()) throw std::exception();
    } catch (const std::exception&) {
      throw Error(ErrorCode::ShapeMismatch, csv.string() + ":" + std::to_string(lineno) + ": malformed label row");
    }
    out.emplace_back(id, y);
  }
  return out;
}

std::vector<Example> load_batch(const DatasetManifest& manifest, std::span<const std::string> clip_ids) {
  std::map<std::string, std::map<std::string, head::VaLabel>> label_files;
  std::vector<Example> batch;
  batch.reserve(clip_ids.size());
  for (const auto& id : clip_ids) {
    const ClipRecord& rec = manifest.find(id);
    auto it = label_files.find(rec.labels);
    if (it == label_files.end()) {
      std::map<std::string, head::VaLabel> table;
      for (auto& [k, y] : load_labels(manifest.resolve(rec.labels))) table[k] = y;
      it = label_files.emplace(rec.labels, std::move(table)).first;
    }
    const auto label = it->second.find(id);
    if (label == it->second.end()) throw Error(ErrorCode::MissingClip, "clip '" + id + "' has no label in " + rec.labels);

    Example ex{id, {}, label->second};
    for (Modality m : kModalities) {
      const auto path = manifest.resolve(rec.features[index_of(m)]).string();
      Tensor f = io::load_tensor(path);
      const Shape want{rec.steps, manifest.dims[index_of(m)]};
      if (f.shape() != want) {
        throw Error(ErrorCode::ShapeMismatch, path + ": shape " + shape_str(f.shape()) + ", manifest says " +
                                                  shape_str(want));
      }
      ex.bundle[m] = std::move(f);
    }
    batch.push_back(std::move(ex));
  }
  return batch;
}

KeepSet parse_keep(std::string_view text) {
  if (text == "all") return kKeepAll;
  KeepSet keep{false, false, false};
  for (char c : text) {
    if (c == ',' || c == '+' || c == ' ') continue;
    keep[index_of(parse_modality(std::string_view(&c, 1)))] = true;
  }
  return keep;
}

std::string keep_string(const KeepSet& keep) {
  std::string s;
  for (Modality m : kModalities) {
    if (keep[index_of(m)]) s += modality_tag(m);
  }
  return s;
}

ModalityBundle modality_mask(const ModalityBundle& bundle, const KeepSet& keep) {
  if (!keep[0] && !keep[1] && !keep[2]) throw Error(ErrorCode::EmptyKeepSet, "keep-set must name at least one modality");
  ModalityBundle out = bundle;
  for (Modality m : kModalities) {
    if (keep[index_of(m)]) continue;
    out[m] = Tensor::zeros(bundle[m].shape());
    out.present[index_of(m)] = false;
  }
  return out;
}

encoders::VideoClip blob_video(std::span<const head::VaLabel> walk, std::size_t height, std::size_t width) {
  std::vector<double> px(walk.size() * height * width * 3);
  const double sigma = static_cast<double>(width) / 8.0;
  for (std::size_t t = 0; t < walk.size(); ++t) {
    const double cx = (walk[t].valence + 1.0) / 2.0 * static_cast<double>(width - 1);
    const double cy = (1.0 - walk[t].arousal) / 2.0 * static_cast<double>(height - 1);
    const double warmth = (walk[t].valence + 1.0) / 2.0;
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) {
        const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
        const double g = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        double* p = &px[((t * height + y) * width + x) * 3];
        p[0] = 0.1 + 0.9 * g * warmth;
        p[1] = 0.1 + 0.5 * g;
        p[2] = 0.1 + 0.9 * g * (1.0 - warmth);
      }
  }
  return {Tensor::from({walk.size(), height, width, 3}, std::move(px)), 25.0};
}

encoders::AudioTrack tone_audio(std::span<const head::VaLabel> walk, double sample_rate, std::size_t samples_per_step) {
  std::vector<double> s(walk.size() * samples_per_step);
  double phase = 0.0;
  for (std::size_t t = 0; t < walk.size(); ++t) {
    const double hz = 200.0 + 300.0 * (walk[t].arousal + 1.0);
    const double amp = 0.2 + 0.3 * std::abs(walk[t].valence);
    for (std::size_t i = 0; i < samples_per_step; ++i) {
      s[t * samples_per_step + i] = amp * std::sin(phase);
      phase += 2.0 * std::numbers::pi * hz / sample_rate;
    }
  }
  const std::size_t n = s.size();
  return {Tensor::from({n}, std::move(s)), sample_rate};
}

std::string template_transcript(std::span<const head::VaLabel> walk) {
  std::string text = "i feel";
  for (const auto& p : walk) {
    if (p.valence >= 0.0) {
      text += p.arousal >= 0.0 ? " excited" : " calm";
    } else {
      text += p.arousal >= 0.0 ? " angry" : " sad";
    }
  }
  return text;
}

}  // namespace maven::synth
