#include "maven/model.hpp"

#include "maven/error.hpp"

namespace maven {

namespace {

const ModelConfig& validated(const ModelConfig& cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

MavenModel::MavenModel(const ModelConfig& cfg)
    : cfg_(validated(cfg)),
      store_(cfg.seed),
      encoders_(store_, cfg_),
      fusion_(store_, cfg_),
      head_(head::HeadParams::create(store_, cfg_)) {}

ModalityBundle MavenModel::encode(const encoders::VideoClip& clip, const encoders::AudioTrack& audio,
                                  const encoders::Transcript& transcript) const {
  return encoders_(clip, audio, transcript);
}

void MavenModel::check_bundle(const ModalityBundle& bundle) const {
  bundle.validate();
  const std::size_t widths[3] = {cfg_.d_v, cfg_.d_a, cfg_.d_t};
  for (Modality m : kModalities) {
    if (bundle[m].cols() != widths[index_of(m)]) {
      throw Error(ErrorCode::ShapeMismatch, "modality " + std::string(modality_tag(m)) + " has width " +
                                                std::to_string(bundle[m].cols()) + ", model expects " +
                                                std::to_string(widths[index_of(m)]));
    }
  }
}

head::PolarOutput MavenModel::forward(const ModalityBundle& bundle, ops::Mode mode, Rng& rng) const {
  check_bundle(bundle);
  return head::predict_polar(head::pool(fusion_(bundle)), head_, mode, rng);
}

}  // namespace maven
