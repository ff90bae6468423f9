#include "maven/error.hpp"

namespace maven {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NotScalar: return "NotScalar";
    case ErrorCode::DetachedGraph: return "DetachedGraph";
    case ErrorCode::IndivisibleExtent: return "IndivisibleExtent";
    case ErrorCode::AudioTooShort: return "AudioTooShort";
    case ErrorCode::TokenOutOfVocab: return "TokenOutOfVocab";
    case ErrorCode::SequenceTooLong: return "SequenceTooLong";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::MissingClip: return "MissingClip";
    case ErrorCode::EmptyKeepSet: return "EmptyKeepSet";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::GradCheckFailed: return "GradCheckFailed";
    case ErrorCode::CheckpointMismatch: return "CheckpointMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

int exit_class(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonFinite:
    case ErrorCode::DegenerateVariance:
    case ErrorCode::DegenerateDenominator:
    case ErrorCode::DivergedLoss:
    case ErrorCode::GradCheckFailed:
      return 3;
    case ErrorCode::InvalidConfig:
      return 1;
    default:
      return 2;
  }
}

}  // namespace maven
