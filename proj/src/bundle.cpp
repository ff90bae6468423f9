#include "maven/bundle.hpp"

#include <string>

#include "maven/error.hpp"

namespace maven {

std::string_view modality_tag(Modality m) {
  switch (m) {
    case Modality::Visual: return "v";
    case Modality::Audio: return "a";
    case Modality::Text: return "t";
  }
  return "?";
}

Modality parse_modality(std::string_view s) {
  if (s == "v" || s == "V" || s == "visual") return Modality::Visual;
  if (s == "a" || s == "A" || s == "audio") return Modality::Audio;
  if (s == "t" || s == "T" || s == "text") return Modality::Text;
  throw Error(ErrorCode::InvalidConfig, "unknown modality '" + std::string(s) + "'");
}

void ModalityBundle::validate() const {
  const std::size_t t = steps();
  for (Modality m : kModalities) {
    const Tensor& f = (*this)[m];
    if (f.ndim() != 2 || f.rows() != t) {
      throw Error(ErrorCode::ShapeMismatch, "modality " + std::string(modality_tag(m)) + " has shape " +
                                                shape_str(f.shape()) + ", expected " + std::to_string(t) + " rows");
    }
  }
}

}  // namespace maven
