#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "maven/bundle.hpp"
#include "maven/encoders.hpp"
#include "maven/head.hpp"

namespace maven::synth {

struct SynthSpec {
  std::size_t n_clips = 8;  // training clips
  std::size_t n_val = 0;    // validation clips, generated after the training ones
  std::size_t steps = 16;   // T
  std::size_t d_v = 64;
  std::size_t d_a = 48;
  std::size_t d_t = 48;
  double sigma_intensity = 0.05;
  double sigma_theta = 0.25;
  std::array<double, 3> snr{20.0, 20.0, 20.0};  // per modality; <= 0 means noiseless
  std::uint64_t seed = 7;

  // InvalidConfig on zero sizes or non-finite values.
  void validate() const;
};

struct ClipRecord {
  std::string clip_id;
  std::array<std::string, 3> features;  // relative to the manifest directory
  std::string labels;                   // relative path of labels.csv
  std::string split;                    // "train" or "val"
  std::size_t steps = 0;
};

struct DatasetManifest {
  std::filesystem::path root;  // directory holding manifest.jsonl
  std::array<std::size_t, 3> dims{};
  std::vector<ClipRecord> clips;

  const ClipRecord& find(const std::string& clip_id) const;  // MissingClip
  std::vector<std::string> ids(const std::string& split) const;
  std::filesystem::path resolve(const std::string& relative) const { return root / relative; }
};

// Per-step latent circumplex walk on (I, theta), reflected into [-1, 1]^2.
std::vector<head::VaLabel> label_walk(std::size_t steps, double sigma_intensity, double sigma_theta, Rng& rng);
head::VaLabel clip_label(std::span<const head::VaLabel> walk);

// Writes features/<id>.{v,a,t}.mvn, labels.csv and manifest.jsonl under dir.
// IoFailure when dir cannot be created or written.
DatasetManifest generate(const SynthSpec& spec, const std::filesystem::path& dir);

// IoFailure for unreadable files; ShapeMismatch for malformed records.
DatasetManifest load_manifest(const std::filesystem::path& manifest_path);
std::vector<std::pair<std::string, head::VaLabel>> load_labels(const std::filesystem::path& csv);

struct Example {
  std::string clip_id;
  ModalityBundle bundle;
  head::VaLabel label;
};

// Examples in the requested order. MissingClip for unknown ids or ids absent
// from labels.csv; ShapeMismatch (naming the file) for corrupt features or
// features disagreeing with the manifest dims.
std::vector<Example> load_batch(const DatasetManifest& manifest, std::span<const std::string> clip_ids);

// Which modalities to keep, indexed by Modality.
using KeepSet = std::array<bool, 3>;
inline constexpr KeepSet kKeepAll{true, true, true};

// "vat", "v", "a,t", "all" ...; InvalidConfig on unknown letters.
KeepSet parse_keep(std::string_view text);
std::string keep_string(const KeepSet& keep);

// Dropped modalities become zeros with present = false. EmptyKeepSet when
// nothing is kept.
ModalityBundle modality_mask(const ModalityBundle& bundle, const KeepSet& keep);

// Raw inputs for smoke-testing the frontends: a blob whose position follows
// the (v, a) walk, a tone whose pitch follows arousal, and a transcript built
// from quadrant words.
encoders::VideoClip blob_video(std::span<const head::VaLabel> walk, std::size_t height, std::size_t width);
encoders::AudioTrack tone_audio(std::span<const head::VaLabel> walk, double sample_rate, std::size_t samples_per_step);
std::string template_transcript(std::span<const head::VaLabel> walk);

}  // namespace maven::synth
