#pragma once

#include <array>
#include <cstddef>
#include <string_view>

#include "maven/tensor.hpp"

namespace maven {

enum class Modality : std::size_t { Visual = 0, Audio = 1, Text = 2 };

inline constexpr std::array<Modality, 3> kModalities{Modality::Visual, Modality::Audio, Modality::Text};

constexpr std::size_t index_of(Modality m) { return static_cast<std::size_t>(m); }

// "v", "a", "t" — used in parameter names and keep-set strings.
std::string_view modality_tag(Modality m);
// Accepts "v"/"V"/"visual" etc.; InvalidConfig otherwise.
Modality parse_modality(std::string_view s);

// One clip's aligned features: F_V (T x d_v), F_A (T x d_a), F_T' (T x d_t).
// Absent modalities hold zeros and present = false.
struct ModalityBundle {
  std::array<Tensor, 3> features;
  std::array<bool, 3> present{true, true, true};

  const Tensor& operator[](Modality m) const { return features[index_of(m)]; }
  Tensor& operator[](Modality m) { return features[index_of(m)]; }
  const Tensor& f_v() const { return features[0]; }
  const Tensor& f_a() const { return features[1]; }
  const Tensor& f_t() const { return features[2]; }
  bool has(Modality m) const { return present[index_of(m)]; }

  std::size_t steps() const { return features[0].rows(); }

  // ShapeMismatch unless all three are matrices sharing the leading extent.
  void validate() const;
};

}  // namespace maven
