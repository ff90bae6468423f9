#pragma once

#include "maven/bundle.hpp"
#include "maven/encoders.hpp"
#include "maven/fusion.hpp"
#include "maven/head.hpp"
#include "maven/model_config.hpp"
#include "maven/nn.hpp"

namespace maven {

// Encoders -> six-pathway fusion -> polar head. Parameters are created in a
// fixed order from cfg.seed, so two models built from equal configs are
// bit-identical.
class MavenModel {
 public:
  explicit MavenModel(const ModelConfig& cfg);

  MavenModel(const MavenModel&) = delete;
  MavenModel& operator=(const MavenModel&) = delete;

  const ModelConfig& config() const { return cfg_; }
  nn::ParameterStore& params() { return store_; }
  const nn::ParameterStore& params() const { return store_; }

  const encoders::Encoders& encoders() const { return encoders_; }
  const fusion::Fusion& fusion() const { return fusion_; }
  const head::HeadParams& head() const { return head_; }

  // Raw-input frontends producing an aligned bundle.
  ModalityBundle encode(const encoders::VideoClip& clip, const encoders::AudioTrack& audio,
                        const encoders::Transcript& transcript) const;

  // Feature-level forward: fusion, pooling, polar head.
  head::PolarOutput forward(const ModalityBundle& bundle, ops::Mode mode, Rng& rng) const;

  // ShapeMismatch when a bundle's lengths or widths disagree with the config.
  void check_bundle(const ModalityBundle& bundle) const;

 private:
  ModelConfig cfg_;
  nn::ParameterStore store_;
  encoders::Encoders encoders_;
  fusion::Fusion fusion_;
  head::HeadParams head_;
};

}  // namespace maven
